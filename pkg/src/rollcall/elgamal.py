"""Threshold ElGamal over a prime-order group.

Key generation is kappa-out-of-kappa: every trustee holds an additive
share of the secret, publishes its public share with a proof of key
possession (so a trustee cannot choose its share as a function of the
others'), and the joint key is the product of the shares.

Decryption produces one share per trustee, each carrying a discrete-log
equality proof tying the share to that trustee's public key. Combining
verifies every proof and fails loudly, naming the faulty trustees.

Zero encryption randomness is representable at this layer (the algebra
does not care) but ``ciphertext_valid`` -- the predicate every protocol
component applies to untrusted ciphertexts -- rejects it, since a zero-
randomness ciphertext exposes its plaintext directly.
"""

from __future__ import annotations

from dataclasses import dataclass

from .encoding import DecodeError, encode
from .group import GroupError, PrimeOrderGroup
from .proofs import (
    ChaumPedersenProof,
    DEC_SHARE_TAG,
    SchnorrProof,
    challenge_scalar,
    derive_weights,
    prove_dlog_eq,
    prove_pop,
    verify_dlog_eq,
    verify_pop,
)


class DecryptionError(ValueError):
    """Raised when decryption shares are missing, duplicated, or invalid."""


@dataclass(frozen=True)
class Ciphertext:
    c1: bytes
    c2: bytes

    def to_bytes(self) -> bytes:
        return self.c1 + self.c2

    @classmethod
    def byte_size(cls, group: PrimeOrderGroup) -> int:
        return 2 * group.element_size

    @classmethod
    def from_bytes(cls, group: PrimeOrderGroup, raw: bytes) -> "Ciphertext":
        if len(raw) != 2 * group.element_size:
            raise DecodeError("bad ciphertext length")
        return cls(raw[: group.element_size], raw[group.element_size :])

    def as_pair(self) -> tuple:
        return (self.c1, self.c2)


@dataclass(frozen=True)
class KeyShare:
    index: int  # 1-based trustee index
    secret: int
    public: bytes
    pop: SchnorrProof


@dataclass(frozen=True)
class JointPublicKey:
    group_name: str
    kappa: int
    share_publics: tuple
    share_pops: tuple
    pk: bytes

    def context(self) -> bytes:
        return encode("jpk/v1", self.group_name, self.kappa, list(self.share_publics))


@dataclass(frozen=True)
class DecryptionShare:
    index: int
    value: bytes
    proof: ChaumPedersenProof


def keygen(
    group: PrimeOrderGroup, kappa: int, stream, context: bytes = b""
) -> tuple[JointPublicKey, list[KeyShare]]:
    """Generate kappa additive key shares and the joint public key."""
    if kappa < 1:
        raise ValueError("kappa must be at least 1")
    shares = []
    publics = []
    pops = []
    pk = group.identity
    for index in range(1, kappa + 1):
        secret = group.random_scalar(stream.child(f"trustee/{index}/key"))
        public = group.exp_base(secret)
        pop = prove_pop(
            group,
            secret,
            public,
            stream.child(f"trustee/{index}/pop"),
            context=encode("pop-ctx/v1", context, index),
        )
        shares.append(KeyShare(index, secret, public, pop))
        publics.append(public)
        pops.append(pop)
        pk = group.mul(pk, public)
    jpk = JointPublicKey(group.name, kappa, tuple(publics), tuple(pops), pk)
    if not verify_joint_key(group, jpk, context):
        raise GroupError("joint key failed verification after generation")
    return jpk, shares


def verify_joint_key(
    group: PrimeOrderGroup, jpk: JointPublicKey, context: bytes = b""
) -> bool:
    """Check every trustee's possession proof and the product relation."""
    if jpk.group_name != group.name or jpk.kappa != len(jpk.share_publics):
        return False
    acc = group.identity
    for index, (public, pop) in enumerate(zip(jpk.share_publics, jpk.share_pops), 1):
        if not verify_pop(group, public, pop, context=encode("pop-ctx/v1", context, index)):
            return False
        acc = group.mul(acc, public)
    return acc == jpk.pk


def encrypt(
    group: PrimeOrderGroup, pk: bytes, message: bytes, stream
) -> tuple[Ciphertext, int]:
    """Encrypt a group element; randomness is drawn nonzero. Returns (ct, r)."""
    r = group.random_scalar(stream)
    return encrypt_with_randomness(group, pk, message, r), r


def encrypt_with_randomness(
    group: PrimeOrderGroup, pk: bytes, message: bytes, r: int
) -> Ciphertext:
    """Algebra-layer encryption; r = 0 is representable here on purpose."""
    return Ciphertext(group.exp_base(r), group.mul(message, group.exp(pk, r)))


def reencrypt(
    group: PrimeOrderGroup, pk: bytes, ct: Ciphertext, stream
) -> tuple[Ciphertext, int]:
    r = group.random_scalar(stream)
    return reencrypt_with_randomness(group, pk, ct, r), r


def reencrypt_with_randomness(
    group: PrimeOrderGroup, pk: bytes, ct: Ciphertext, r: int
) -> Ciphertext:
    return Ciphertext(
        group.mul(ct.c1, group.exp_base(r)), group.mul(ct.c2, group.exp(pk, r))
    )


def ciphertext_valid(group: PrimeOrderGroup, ct) -> bool:
    """Protocol-layer validity: well-formed elements, nonzero randomness."""
    if not isinstance(ct, Ciphertext):
        return False
    if not (group.is_element(ct.c1) and group.is_element(ct.c2)):
        return False
    return ct.c1 != group.identity


def _share_base(ct: Ciphertext, context: bytes) -> bytes:
    return encode("dec-share-ctx/v1", ct.c1, ct.c2, context)


def _share_context(ct: Ciphertext, index: int, context: bytes) -> bytes:
    # the base is one complete canonical encoding, so a fixed-width index
    # suffix stays unambiguous and lets callers reuse the base across trustees
    return _share_base(ct, context) + index.to_bytes(4, "big")


def compute_decryption_share(
    group: PrimeOrderGroup,
    ct: Ciphertext,
    key_share: KeyShare,
    stream,
    context: bytes = b"",
    base: bytes | None = None,
    prove: bool = True,
) -> DecryptionShare:
    value = group.exp(ct.c1, key_share.secret)
    if not prove:
        # for openings consumed in-process only; never post these shares
        return DecryptionShare(key_share.index, value, None)
    if base is None:
        base = _share_base(ct, context)
    proof = prove_dlog_eq(
        group,
        key_share.secret,
        group.generator,
        key_share.public,
        ct.c1,
        value,
        stream,
        domain=DEC_SHARE_TAG,
        context=base + key_share.index.to_bytes(4, "big"),
        # no self-check: every share proof is either verified on combine or
        # posted in a bundle the roll audit batch-verifies
        check=False,
    )
    return DecryptionShare(key_share.index, value, proof)


def verify_decryption_share(
    group: PrimeOrderGroup,
    ct: Ciphertext,
    share_public: bytes,
    share: DecryptionShare,
    context: bytes = b"",
    base: bytes | None = None,
) -> bool:
    if share.proof is None:
        return False
    if base is None:
        base = _share_base(ct, context)
    return verify_dlog_eq(
        group,
        group.generator,
        share_public,
        ct.c1,
        share.value,
        share.proof,
        domain=DEC_SHARE_TAG,
        context=base + share.index.to_bytes(4, "big"),
    )


def combine_decryption_shares(
    group: PrimeOrderGroup,
    jpk: JointPublicKey,
    ct: Ciphertext,
    shares: list,
    context: bytes = b"",
    verify: bool = True,
) -> bytes:
    """Verify all kappa shares and recover the plaintext element."""
    if len(shares) != jpk.kappa:
        raise DecryptionError(
            f"need exactly {jpk.kappa} shares, got {len(shares)}"
        )
    seen = {share.index for share in shares}
    if seen != set(range(1, jpk.kappa + 1)):
        raise DecryptionError(f"share indexes {sorted(seen)} do not cover all trustees")
    bad = []
    blind = group.identity
    base = _share_base(ct, context) if verify else None
    for share in shares:
        if verify:
            public = jpk.share_publics[share.index - 1]
            if not verify_decryption_share(group, ct, public, share, base=base):
                bad.append(share.index)
        blind = group.mul(blind, share.value)
    if bad:
        raise DecryptionError(f"invalid decryption shares from trustees {bad}")
    return group.div(ct.c2, blind)


def threshold_decrypt(
    group: PrimeOrderGroup,
    jpk: JointPublicKey,
    key_shares: list,
    ct: Ciphertext,
    stream,
    context: bytes = b"",
    prove: bool = True,
    verify: bool = True,
) -> tuple[bytes, list]:
    """Full decryption by all trustees; returns (plaintext element, shares).

    ``prove=False`` skips the per-share proofs for openings that are consumed
    and discarded in-process; such shares must never be posted. ``verify=False``
    skips the redundant self-check when the shares will be verified downstream
    (e.g. posted bundles covered by the batched roll audit).
    """
    if verify and not prove:
        raise ValueError("cannot verify shares produced without proofs")
    base = _share_base(ct, context) if prove else None
    shares = [
        compute_decryption_share(
            group,
            ct,
            ks,
            stream.child(f"dec/{ks.index}") if prove else None,
            context,
            base,
            prove,
        )
        for ks in key_shares
    ]
    message = combine_decryption_shares(group, jpk, ct, shares, context, verify=verify)
    return message, shares


def verify_decryption(
    group: PrimeOrderGroup,
    jpk: JointPublicKey,
    ct: Ciphertext,
    message: bytes,
    shares: list,
    context: bytes = b"",
) -> bool:
    """Audit-grade check that ``message`` is the decryption witnessed by ``shares``."""
    try:
        recovered = combine_decryption_shares(group, jpk, ct, shares, context)
    except (DecryptionError, GroupError, DecodeError, ValueError, TypeError):
        return False
    return recovered == message


def serialize_shares(group: PrimeOrderGroup, shares: list) -> bytes:
    """Canonical bytes for a decryption-share bundle (board storage)."""
    if any(share.proof is None for share in shares):
        raise ValueError("refusing to serialize unproven decryption shares")
    return encode(
        "dec-shares/v1",
        [
            [share.index, share.value, share.proof.to_bytes(group)]
            for share in shares
        ],
    )


def deserialize_shares(group: PrimeOrderGroup, raw: bytes) -> list:
    from .encoding import Decoder

    dec = Decoder(raw)
    if dec.read_str() != "dec-shares/v1":
        raise DecodeError("not a share bundle")
    shares = []
    for _ in range(dec.read_list_header()):
        if dec.read_list_header() != 3:
            raise DecodeError("bad share tuple")
        index = dec.read_int()
        value = dec.read_fixed(group.element_size)
        proof = ChaumPedersenProof.from_bytes(group, dec.read_bytes())
        shares.append(DecryptionShare(index, value, proof))
    dec.expect_end()
    return shares


def batch_verify_decryption(
    group: PrimeOrderGroup,
    jpk: JointPublicKey,
    items: list,  # [(Ciphertext, message_bytes, [DecryptionShare])]
    context: bytes = b"",
) -> bool:
    """Batched equivalent of verifying every item with :func:`verify_decryption`.

    The per-share proof equations are folded into two multi-exponentiations
    under small random weights derived from the batch itself. Wrong in any
    single bit of any item, the random linear combination survives with
    probability ~2^-64, so agreement with the naive loop is exact for all
    practical purposes while the group work drops by well over the 3x the
    batch path is expected to deliver at 10^4 items.
    """
    try:
        kappa = jpk.kappa
        expected = set(range(1, kappa + 1))
        # Cheap structural pass first; also the plaintext recombination,
        # which involves no exponentiation at all.
        for ct, message, shares in items:
            if len(shares) != kappa or {s.index for s in shares} != expected:
                return False
            if not (group.is_element(ct.c1) and group.is_element(ct.c2)):
                return False
            if not group.is_element(message):
                return False
            blind = group.identity
            for share in shares:
                if share.proof is None:
                    return False
                if not (
                    group.is_element(share.value)
                    and group.is_element(share.proof.commitment_a)
                    and group.is_element(share.proof.commitment_b)
                ):
                    return False
                blind = group.mul(blind, share.value)
            if group.div(ct.c2, blind) != message:
                return False

        flat = []  # (ct, share, challenge)
        for ct, _message, shares in items:
            base = _share_base(ct, context)
            for share in shares:
                ctx = base + share.index.to_bytes(4, "big")
                public = jpk.share_publics[share.index - 1]
                chal = challenge_scalar(
                    group,
                    DEC_SHARE_TAG,
                    group.generator,
                    public,
                    ct.c1,
                    share.value,
                    ctx,
                    share.proof.commitment_a,
                    share.proof.commitment_b,
                )
                flat.append((ct, share, chal))
        if not flat:
            return True

        batch_material = encode(
            context,
            [[ct.c1, ct.c2, share.value] for ct, share, _ in flat],
        )
        weights = derive_weights(
            group, DEC_SHARE_TAG, len(flat), batch_material
        )
        order = group.order

        # Equation A, per share: g^s == t_a * pub^chal
        bases_a: list[bytes] = []
        scalars_a: list[int] = []
        g_exp = 0
        pub_acc: dict[int, int] = {}
        for (ct, share, chal), w in zip(flat, weights):
            g_exp = (g_exp + w * share.proof.response) % order
            bases_a.append(share.proof.commitment_a)
            scalars_a.append((-w) % order)
            pub_acc[share.index] = (pub_acc.get(share.index, 0) - w * chal) % order
        bases_a.append(group.generator)
        scalars_a.append(g_exp)
        for index, exponent in pub_acc.items():
            bases_a.append(jpk.share_publics[index - 1])
            scalars_a.append(exponent)
        if group.msm(bases_a, scalars_a) != group.identity:
            return False

        # Equation B, per share: c1^s == t_b * d^chal
        bases_b: list[bytes] = []
        scalars_b: list[int] = []
        c1_acc: dict[bytes, int] = {}
        for (ct, share, chal), w in zip(flat, weights):
            c1_acc[ct.c1] = (c1_acc.get(ct.c1, 0) + w * share.proof.response) % order
            bases_b.append(share.proof.commitment_b)
            scalars_b.append((-w) % order)
            bases_b.append(share.value)
            scalars_b.append((-w * chal) % order)
        for c1, exponent in c1_acc.items():
            bases_b.append(c1)
            scalars_b.append(exponent)
        return group.msm(bases_b, scalars_b) == group.identity
    except (GroupError, DecodeError, DecryptionError, ValueError, TypeError):
        return False
