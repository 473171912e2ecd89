"""Prime-order group backends with canonical byte encodings.

Two interchangeable implementations sit behind one interface:

* ``ristretto255`` -- the default. Bindings over the system libsodium give a
  prime-order group (no cofactor caveats) with canonical 32-byte encodings
  and constant-time scalar multiplication. Used for every security-relevant
  run; a 32-byte element is also what keeps printed receipts small.

* Schnorr subgroups of Z_p^* -- parametrized (p, q, g) with q | p-1. The
  reduced ``modp64`` instance exists purely to make large statistical
  simulations affordable; it offers no security and says so in its name.
  ``modp256``/``modp512`` serve mid-size tests and the batch-verification
  benchmark.

Elements travel as ``bytes`` (fixed width per group); scalars are plain
Python ints reduced modulo the group order at the boundary.
"""

from __future__ import annotations

import ctypes
import ctypes.util
import hashlib

from .encoding import encode

try:
    from gmpy2 import mpz, powmod as _powmod

    _HAVE_GMPY2 = True
except ImportError:  # pragma: no cover - gmpy2 is a declared dependency
    _HAVE_GMPY2 = False

    def mpz(x):
        return x

    def _powmod(b, e, m):
        return pow(b, e, m)


class GroupError(ValueError):
    """Raised for invalid group elements or unusable parameters."""


class PrimeOrderGroup:
    """Interface shared by both backends. All elements are canonical bytes."""

    name: str
    order: int
    element_size: int
    scalar_size: int
    generator: bytes
    identity: bytes

    def exp(self, base: bytes, e: int) -> bytes:
        raise NotImplementedError

    def exp_base(self, e: int) -> bytes:
        """Generator raised to e; backends may have a fast path."""
        return self.exp(self.generator, e)

    def mul(self, a: bytes, b: bytes) -> bytes:
        raise NotImplementedError

    def inv(self, a: bytes) -> bytes:
        raise NotImplementedError

    def div(self, a: bytes, b: bytes) -> bytes:
        return self.mul(a, self.inv(b))

    def is_element(self, a) -> bool:
        raise NotImplementedError

    def hash_to_group(self, data: bytes, domain: str = "hash-to-group/v1") -> bytes:
        raise NotImplementedError

    def msm(self, bases: list[bytes], scalars: list[int]) -> bytes:
        """Product of bases[i]^scalars[i]."""
        if len(bases) != len(scalars):
            raise ValueError("msm length mismatch")
        acc = self.identity
        for base, e in zip(bases, scalars):
            acc = self.mul(acc, self.exp(base, e))
        return acc

    def encode_scalar(self, e: int) -> bytes:
        return (e % self.order).to_bytes(self.scalar_size, "big")

    def decode_scalar(self, raw: bytes) -> int:
        if len(raw) != self.scalar_size:
            raise GroupError("bad scalar width")
        value = int.from_bytes(raw, "big")
        if value >= self.order:
            raise GroupError("scalar out of range")
        return value

    def random_scalar(self, stream) -> int:
        return stream.scalar(self.order)


# ---------------------------------------------------------------------------
# ristretto255 over libsodium


def _load_sodium():
    path = ctypes.util.find_library("sodium")
    if path is None:  # pragma: no cover - environment dependent
        return None
    try:
        lib = ctypes.CDLL(path)
    except OSError:  # pragma: no cover
        return None
    if lib.sodium_init() < 0:  # pragma: no cover
        return None
    needed = [
        "crypto_scalarmult_ristretto255",
        "crypto_scalarmult_ristretto255_base",
        "crypto_core_ristretto255_add",
        "crypto_core_ristretto255_sub",
        "crypto_core_ristretto255_from_hash",
        "crypto_core_ristretto255_is_valid_point",
    ]
    if not all(hasattr(lib, fn) for fn in needed):  # pragma: no cover
        return None
    return lib


_SODIUM = _load_sodium()

_RISTRETTO_ORDER = 2**252 + 27742317777372353535851937790883648493


class RistrettoGroup(PrimeOrderGroup):
    """ristretto255: prime order ~2^252, 32-byte canonical encodings."""

    name = "ristretto255"
    order = _RISTRETTO_ORDER
    element_size = 32
    scalar_size = 32
    identity = b"\x00" * 32

    def __init__(self):
        if _SODIUM is None:  # pragma: no cover - environment dependent
            raise GroupError(
                "libsodium with ristretto255 support is required for this group"
            )
        self._lib = _SODIUM
        self.generator = self.exp_base(1)

    def _scalar_le(self, e: int) -> bytes:
        return (e % self.order).to_bytes(32, "little")

    def exp_base(self, e: int) -> bytes:
        e %= self.order
        if e == 0:
            return self.identity
        out = ctypes.create_string_buffer(32)
        rc = self._lib.crypto_scalarmult_ristretto255_base(out, self._scalar_le(e))
        if rc != 0:  # pragma: no cover - only reachable for e == 0
            raise GroupError("scalar multiplication failed")
        return out.raw

    def exp(self, base: bytes, e: int) -> bytes:
        e %= self.order
        if e == 0 or base == self.identity:
            return self.identity
        out = ctypes.create_string_buffer(32)
        rc = self._lib.crypto_scalarmult_ristretto255(out, self._scalar_le(e), base)
        if rc != 0:
            raise GroupError("invalid group element")
        return out.raw

    def mul(self, a: bytes, b: bytes) -> bytes:
        out = ctypes.create_string_buffer(32)
        rc = self._lib.crypto_core_ristretto255_add(out, a, b)
        if rc != 0:
            raise GroupError("invalid group element")
        return out.raw

    def inv(self, a: bytes) -> bytes:
        out = ctypes.create_string_buffer(32)
        rc = self._lib.crypto_core_ristretto255_sub(out, self.identity, a)
        if rc != 0:
            raise GroupError("invalid group element")
        return out.raw

    def div(self, a: bytes, b: bytes) -> bytes:
        out = ctypes.create_string_buffer(32)
        rc = self._lib.crypto_core_ristretto255_sub(out, a, b)
        if rc != 0:
            raise GroupError("invalid group element")
        return out.raw

    def is_element(self, a) -> bool:
        if not isinstance(a, (bytes, bytearray)) or len(a) != 32:
            return False
        return self._lib.crypto_core_ristretto255_is_valid_point(bytes(a)) == 1

    def hash_to_group(self, data: bytes, domain: str = "hash-to-group/v1") -> bytes:
        uniform = hashlib.shake_256(encode(domain, self.name, data)).digest(64)
        out = ctypes.create_string_buffer(32)
        self._lib.crypto_core_ristretto255_from_hash(out, uniform)
        return out.raw


# ---------------------------------------------------------------------------
# Schnorr subgroups of Z_p^*


class SchnorrGroup(PrimeOrderGroup):
    """Order-q subgroup of Z_p^*, elements as fixed-width big-endian bytes."""

    def __init__(self, name: str, p: int, q: int, g: int):
        if (p - 1) % q != 0:
            raise GroupError("q must divide p-1")
        if pow(g, q, p) != 1 or g in (0, 1):
            raise GroupError("g does not generate the order-q subgroup")
        self.name = name
        self.order = q
        self.element_size = (p.bit_length() + 7) // 8
        self.scalar_size = (q.bit_length() + 7) // 8
        self._p = mpz(p)
        self._q = mpz(q)
        self._cofactor = (p - 1) // q
        self._p_int = p
        self._g = mpz(g)
        self.generator = self._enc(g)
        self.identity = self._enc(1)

    def _enc(self, x) -> bytes:
        return mpz(x).to_bytes(self.element_size, "big")

    def _dec(self, raw: bytes):
        if len(raw) != self.element_size:
            raise GroupError("bad element width")
        x = int.from_bytes(raw, "big")
        if not 0 < x < self._p_int:
            raise GroupError("element out of range")
        return mpz(x)

    def exp(self, base: bytes, e: int) -> bytes:
        # the generator is by far the most common base; skip its decode
        x = self._g if base == self.generator else self._dec(base)
        return self._enc(_powmod(x, e % self.order, self._p))

    def exp_base(self, e: int) -> bytes:
        return self._enc(_powmod(self._g, e % self.order, self._p))

    def mul(self, a: bytes, b: bytes) -> bytes:
        return self._enc(self._dec(a) * self._dec(b) % self._p)

    def inv(self, a: bytes) -> bytes:
        return self._enc(_powmod(self._dec(a), self._p - 2, self._p))

    def is_element(self, a) -> bool:
        if not isinstance(a, (bytes, bytearray)) or len(a) != self.element_size:
            return False
        x = int.from_bytes(bytes(a), "big")
        if not 0 < x < self._p_int:
            return False
        return _powmod(mpz(x), self._q, self._p) == 1

    def hash_to_group(self, data: bytes, domain: str = "hash-to-group/v1") -> bytes:
        counter = 0
        while True:
            raw = hashlib.shake_256(
                encode(domain, self.name, data, counter)
            ).digest(self.element_size + 16)
            x = int.from_bytes(raw, "big") % self._p_int
            el = _powmod(mpz(x), self._cofactor, self._p)
            if el != 1:  # skip the identity (and x == 0)
                return self._enc(el)
            counter += 1

    def msm(self, bases: list[bytes], scalars: list[int]) -> bytes:
        """Pippenger bucket method; big win over per-term powmod for n >> 1."""
        if len(bases) != len(scalars):
            raise ValueError("msm length mismatch")
        pairs = [
            (self._dec(b), e % self.order)
            for b, e in zip(bases, scalars)
            if e % self.order != 0
        ]
        if not pairs:
            return self.identity
        if len(pairs) < 16:
            acc = mpz(1)
            for b, e in pairs:
                acc = acc * _powmod(b, e, self._p) % self._p
            return self._enc(acc)
        p = self._p
        width = max(e.bit_length() for _, e in pairs)
        c = min(14, max(4, len(pairs).bit_length() - 3))
        mask = (1 << c) - 1
        acc = mpz(1)
        for shift in range(((width + c - 1) // c) * c - c, -1, -c):
            if acc != 1:
                for _ in range(c):
                    acc = acc * acc % p
            buckets = [None] * (mask + 1)
            for b, e in pairs:
                digit = (e >> shift) & mask
                if digit:
                    cur = buckets[digit]
                    buckets[digit] = b if cur is None else cur * b % p
            running = mpz(1)
            total = mpz(1)
            for digit in range(mask, 0, -1):
                if buckets[digit] is not None:
                    running = running * buckets[digit] % p
                total = total * running % p
            acc = acc * total % p
        return self._enc(acc)


_MODP_PARAMS = {
    # Reduced-size group for statistical simulation only: NOT secure.
    "modp64": (
        0x9EA8E22AE0EF49BF,
        0xC169EA42E65207,
        0x54B3C61C829A0513,
    ),
    "modp256": (
        0x973229E3FC1DD9AC66623D5292AC814808188895AF9737BC88AF86FC12D8DF29,
        0xA1FD6094C470D4C4C3BD116227809E67777C07CD,
        0x92F3D6826F68D2190FB1D1615BA685AADF4FC71B74BFBD410968C0456DBC5687,
    ),
    "modp512": (
        0xC0359B9ADA37CC6ABD2921B228326E5D01A68F52CA213760343E481A551AA05D751F3B3BB197D7FD035301D5B93E9EB67E20664215F99F6033264C5E0CD898DF,
        0xDCA861A8F99ABEE98EAAC68A3D3C20D6EEA602B7D17633F9706EF0D866B03C0D,
        0xBE14D34E009A3E41F7312536236018BF1A516038F198932F5F09F6C0075F52D81C4E4ADF55EAA74F24E0DAAAD4F108C5546BB393BDB4E46A97FED15A3574F528,
    ),
}

_CACHE: dict[str, PrimeOrderGroup] = {}


def available_groups() -> list[str]:
    names = list(_MODP_PARAMS)
    if _SODIUM is not None:
        names.insert(0, "ristretto255")
    return names


def get_group(name: str) -> PrimeOrderGroup:
    """Fetch a group backend by name; instances are cached singletons."""
    if name in _CACHE:
        return _CACHE[name]
    if name == "ristretto255":
        group: PrimeOrderGroup = RistrettoGroup()
    elif name in _MODP_PARAMS:
        group = SchnorrGroup(name, *_MODP_PARAMS[name])
    else:
        raise GroupError(f"unknown group {name!r}; known: {available_groups()}")
    _CACHE[name] = group
    return group


DEFAULT_GROUP = "ristretto255" if _SODIUM is not None else "modp512"
