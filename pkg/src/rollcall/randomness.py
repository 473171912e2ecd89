"""Deterministic randomness with named derivation labels.

All protocol randomness flows from one master seed. Each actor and phase
derives its own child stream under a human-readable label, so a full
election transcript is reproducible bit for bit from (seed, config) while
streams for different actors stay computationally independent.

The stream is SHAKE-256 in counter mode over the derived key; no global
state, safe to fork children at any point.
"""

from __future__ import annotations

import hashlib

from .encoding import encode


_CHILD_PREFIX = hashlib.shake_256(b"seed-child/v1")
_BLOCK_PREFIX = hashlib.shake_256(b"seed-block/v1")
_BLOCK = 136  # one SHAKE-256 rate's worth per squeeze

# (nbytes, rejection limit) per bound; bounds are group orders, a handful
_bound_cache: dict = {}


class SeedStream:
    """A deterministic byte stream with labeled child derivation."""

    __slots__ = ("_key", "_counter", "_buffer", "_pos", "_block_base")

    def __init__(self, key: bytes):
        if not isinstance(key, bytes) or len(key) == 0:
            raise ValueError("seed key must be non-empty bytes")
        if len(key) != 32:
            # normalize so derivation framing below needs no length prefix
            key = hashlib.shake_256(b"seed-key/v1" + key).digest(32)
        self._key = key
        self._counter = 0
        self._buffer = b""
        self._pos = 0
        base = _BLOCK_PREFIX.copy()
        base.update(key)
        self._block_base = base

    @classmethod
    def from_seed(cls, seed: int | bytes | str, label: str = "root") -> "SeedStream":
        if isinstance(seed, int):
            seed = seed.to_bytes(max(1, (seed.bit_length() + 7) // 8), "big")
        elif isinstance(seed, str):
            seed = seed.encode("utf-8")
        return cls(hashlib.shake_256(encode("seed-stream/v1", seed, label)).digest(32))

    def child(self, label: str) -> "SeedStream":
        """Derive an independent stream; same label twice gives the same stream."""
        # key is fixed-width, so appending the label stays unambiguous
        h = _CHILD_PREFIX.copy()
        h.update(self._key)
        h.update(label.encode("utf-8"))
        return SeedStream(h.digest(32))

    def take(self, n: int) -> bytes:
        pos = self._pos
        end = pos + n
        if end <= len(self._buffer):
            self._pos = end
            return self._buffer[pos:end]
        chunks = [self._buffer[pos:]]
        need = n - len(chunks[0])
        while need > 0:
            h = self._block_base.copy()
            h.update(self._counter.to_bytes(8, "big"))
            self._counter += 1
            block = h.digest(_BLOCK)
            chunks.append(block)
            need -= _BLOCK
        data = b"".join(chunks)
        self._buffer = data
        self._pos = n
        return data[:n]

    def integer_below(self, bound: int) -> int:
        """Uniform integer in [0, bound) by rejection sampling."""
        cached = _bound_cache.get(bound)
        if cached is None:
            if bound <= 0:
                raise ValueError("bound must be positive")
            nbytes = (bound.bit_length() + 7) // 8 + 1
            # one spare byte drops the rejection rate below 1/256
            limit = 256**nbytes - (256**nbytes) % bound
            if len(_bound_cache) < 4096:
                _bound_cache[bound] = (nbytes, limit)
        else:
            nbytes, limit = cached
        while True:
            candidate = int.from_bytes(self.take(nbytes), "big")
            if candidate < limit:
                return candidate % bound

    def scalar(self, order: int) -> int:
        """Uniform nonzero scalar modulo a group order."""
        while True:
            value = self.integer_below(order)
            if value != 0:
                return value

    def shuffle(self, items: list) -> list:
        """Fisher-Yates over a copy, driven by this stream."""
        out = list(items)
        for i in range(len(out) - 1, 0, -1):
            j = self.integer_below(i + 1)
            out[i], out[j] = out[j], out[i]
        return out

    def permutation(self, n: int) -> list[int]:
        return self.shuffle(list(range(n)))

    def sample_indices(self, population: int, count: int) -> list[int]:
        """First ``count`` survivors of a partial Fisher-Yates over range(population)."""
        if count > population:
            raise ValueError("sample larger than population")
        idx = list(range(population))
        for i in range(count):
            j = i + self.integer_below(population - i)
            idx[i], idx[j] = idx[j], idx[i]
        return sorted(idx[:count])

    def choice(self, items):
        if not items:
            raise ValueError("empty choice")
        return items[self.integer_below(len(items))]
