"""Non-interactive zero-knowledge proofs (sigma protocols, Fiat-Shamir).

Four proof families cover the whole protocol:

* ``SchnorrProof``        knowledge of a discrete log (key possession)
* ``ChaumPedersenProof``  equality of discrete logs (decryption shares)
* ``EncKnowledgeProof``   knowledge of encryption randomness binding stated
                          plaintexts to ciphertexts
* ``EqProof``             two ciphertext vectors encrypt the same plaintexts

Challenges are SHAKE-256 over ``domain tag || canonical statement encoding
|| commitments``; every family carries its own versioned tag, so a
transcript can never verify under a different statement type.

Transcripts serialize to a fixed byte length for a given group and
statement shape. That is load-bearing: equality proofs are split in two
one-time-pad halves across receipt quadrants, and XOR of equal-length
strings must reproduce the transcript exactly.

Verifiers never raise on malformed input; they return False.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .encoding import DecodeError, encode
from .group import GroupError, PrimeOrderGroup

POP_TAG = "nizk-pop/v1"
DEC_SHARE_TAG = "nizk-dec-share/v1"
ENC_TAG = "nizk-enc/v1"
EQ_TAG = "nizk-eq/v1"


class ProofError(ValueError):
    """Raised when a prover cannot produce a valid proof (bad witness)."""


def challenge_scalar(group: PrimeOrderGroup, domain: str, *parts) -> int:
    """Fiat-Shamir challenge: hash to a scalar with a domain tag."""
    material = hashlib.shake_256(
        encode("fiat-shamir/v1", domain, group.name, list(parts))
    ).digest(2 * group.scalar_size + 16)
    return int.from_bytes(material, "big") % group.order


def derive_weights(group: PrimeOrderGroup, domain: str, count: int, *parts) -> list[int]:
    """Small-exponent batching weights, bound to the batch by hashing it."""
    stream = hashlib.shake_256(
        encode("batch-weights/v1", domain, group.name, list(parts))
    ).digest(8 * count)
    return [
        int.from_bytes(stream[8 * i : 8 * i + 8], "big") | 1 for i in range(count)
    ]


# ---------------------------------------------------------------------------
# Schnorr proof of knowledge of a discrete log


@dataclass(frozen=True)
class SchnorrProof:
    commitment: bytes
    response: int

    def to_bytes(self, group: PrimeOrderGroup) -> bytes:
        return self.commitment + group.encode_scalar(self.response)

    @classmethod
    def byte_size(cls, group: PrimeOrderGroup) -> int:
        return group.element_size + group.scalar_size

    @classmethod
    def from_bytes(cls, group: PrimeOrderGroup, raw: bytes) -> "SchnorrProof":
        if len(raw) != cls.byte_size(group):
            raise DecodeError("bad proof length")
        el = group.element_size
        return cls(raw[:el], group.decode_scalar(raw[el:]))


def prove_pop(
    group: PrimeOrderGroup, secret: int, public: bytes, stream, context: bytes = b""
) -> SchnorrProof:
    w = group.random_scalar(stream)
    t = group.exp_base(w)
    chal = challenge_scalar(group, POP_TAG, public, context, t)
    proof = SchnorrProof(t, (w + chal * secret) % group.order)
    if not verify_pop(group, public, proof, context):
        raise ProofError("key possession proof failed self-check")
    return proof


def verify_pop(
    group: PrimeOrderGroup, public: bytes, proof: SchnorrProof, context: bytes = b""
) -> bool:
    try:
        if not (group.is_element(public) and group.is_element(proof.commitment)):
            return False
        chal = challenge_scalar(group, POP_TAG, public, context, proof.commitment)
        lhs = group.exp_base(proof.response)
        rhs = group.mul(proof.commitment, group.exp(public, chal))
        return lhs == rhs
    except (GroupError, DecodeError, ValueError, TypeError):
        return False


# ---------------------------------------------------------------------------
# Chaum-Pedersen proof of discrete-log equality


@dataclass(frozen=True)
class ChaumPedersenProof:
    commitment_a: bytes
    commitment_b: bytes
    response: int

    def to_bytes(self, group: PrimeOrderGroup) -> bytes:
        return (
            self.commitment_a + self.commitment_b + group.encode_scalar(self.response)
        )

    @classmethod
    def byte_size(cls, group: PrimeOrderGroup) -> int:
        return 2 * group.element_size + group.scalar_size

    @classmethod
    def from_bytes(cls, group: PrimeOrderGroup, raw: bytes) -> "ChaumPedersenProof":
        if len(raw) != cls.byte_size(group):
            raise DecodeError("bad proof length")
        el = group.element_size
        return cls(raw[:el], raw[el : 2 * el], group.decode_scalar(raw[2 * el :]))


def _cp_statement(base_a, pub_a, base_b, pub_b, context):
    return (base_a, pub_a, base_b, pub_b, context)


def prove_dlog_eq(
    group: PrimeOrderGroup,
    secret: int,
    base_a: bytes,
    pub_a: bytes,
    base_b: bytes,
    pub_b: bytes,
    stream,
    domain: str = DEC_SHARE_TAG,
    context: bytes = b"",
    check: bool = True,
) -> ChaumPedersenProof:
    """Prove log_{base_a}(pub_a) == log_{base_b}(pub_b) == secret.

    ``check=False`` skips the self-verification; only for callers whose
    output gets verified downstream anyway (batched bundle audits).
    """
    w = group.random_scalar(stream)
    ta = group.exp(base_a, w)
    tb = group.exp(base_b, w)
    chal = challenge_scalar(
        group, domain, *_cp_statement(base_a, pub_a, base_b, pub_b, context), ta, tb
    )
    proof = ChaumPedersenProof(ta, tb, (w + chal * secret) % group.order)
    if check and not verify_dlog_eq(
        group, base_a, pub_a, base_b, pub_b, proof, domain, context
    ):
        raise ProofError("dlog-equality proof failed self-check")
    return proof


def verify_dlog_eq(
    group: PrimeOrderGroup,
    base_a: bytes,
    pub_a: bytes,
    base_b: bytes,
    pub_b: bytes,
    proof: ChaumPedersenProof,
    domain: str = DEC_SHARE_TAG,
    context: bytes = b"",
) -> bool:
    try:
        for el in (base_a, pub_a, base_b, pub_b, proof.commitment_a, proof.commitment_b):
            if not group.is_element(el):
                return False
        chal = challenge_scalar(
            group,
            domain,
            *_cp_statement(base_a, pub_a, base_b, pub_b, context),
            proof.commitment_a,
            proof.commitment_b,
        )
        ok_a = group.exp(base_a, proof.response) == group.mul(
            proof.commitment_a, group.exp(pub_a, chal)
        )
        ok_b = group.exp(base_b, proof.response) == group.mul(
            proof.commitment_b, group.exp(pub_b, chal)
        )
        return ok_a and ok_b
    except (GroupError, DecodeError, ValueError, TypeError):
        return False


# ---------------------------------------------------------------------------
# Knowledge of encryption randomness for stated plaintexts
#
# Statement: pk, [(m_i, (c1_i, c2_i))]. Witness: r_i with c1_i = g^{r_i},
# c2_i = m_i * pk^{r_i}. One shared challenge keeps the transcript compact
# and its length fixed by the pair count.


@dataclass(frozen=True)
class EncKnowledgeProof:
    commitments: tuple  # ((t1_i, t2_i), ...)
    challenge: int
    responses: tuple  # (s_i, ...)

    @property
    def count(self) -> int:
        return len(self.responses)

    def to_bytes(self, group: PrimeOrderGroup) -> bytes:
        out = bytearray()
        for t1, t2 in self.commitments:
            out += t1
            out += t2
        out += group.encode_scalar(self.challenge)
        for s in self.responses:
            out += group.encode_scalar(s)
        return bytes(out)

    @classmethod
    def byte_size(cls, group: PrimeOrderGroup, count: int) -> int:
        return count * (2 * group.element_size + group.scalar_size) + group.scalar_size

    @classmethod
    def from_bytes(
        cls, group: PrimeOrderGroup, count: int, raw: bytes
    ) -> "EncKnowledgeProof":
        if len(raw) != cls.byte_size(group, count):
            raise DecodeError("bad proof length")
        el = group.element_size
        commitments = []
        pos = 0
        for _ in range(count):
            commitments.append((raw[pos : pos + el], raw[pos + el : pos + 2 * el]))
            pos += 2 * el
        chal = group.decode_scalar(raw[pos : pos + group.scalar_size])
        pos += group.scalar_size
        responses = []
        for _ in range(count):
            responses.append(group.decode_scalar(raw[pos : pos + group.scalar_size]))
            pos += group.scalar_size
        return cls(tuple(commitments), chal, tuple(responses))


def _enc_statement(pk, items):
    return (pk, [[m, c1, c2] for (m, (c1, c2)) in items])


def prove_enc_knowledge(
    group: PrimeOrderGroup,
    pk: bytes,
    items: list,  # [(m_bytes, (c1, c2), r_int)]
    stream,
    context: bytes = b"",
) -> EncKnowledgeProof:
    statement_items = [(m, ct) for (m, ct, _r) in items]
    witnesses = [r for (_m, _ct, r) in items]
    ws = [group.random_scalar(stream) for _ in items]
    commitments = [(group.exp_base(w), group.exp(pk, w)) for w in ws]
    chal = challenge_scalar(
        group,
        ENC_TAG,
        *_enc_statement(pk, statement_items),
        context,
        [list(pair) for pair in commitments],
    )
    responses = tuple((w + chal * r) % group.order for w, r in zip(ws, witnesses))
    proof = EncKnowledgeProof(tuple(commitments), chal, responses)
    if not verify_enc_knowledge(group, pk, statement_items, proof, context):
        raise ProofError("plaintext-knowledge proof failed self-check")
    return proof


def verify_enc_knowledge(
    group: PrimeOrderGroup,
    pk: bytes,
    items: list,  # [(m_bytes, (c1, c2))]
    proof: EncKnowledgeProof,
    context: bytes = b"",
) -> bool:
    try:
        if proof.count != len(items) or len(proof.commitments) != len(items):
            return False
        if not group.is_element(pk):
            return False
        for m, (c1, c2) in items:
            if not (
                group.is_element(m) and group.is_element(c1) and group.is_element(c2)
            ):
                return False
        for t1, t2 in proof.commitments:
            if not (group.is_element(t1) and group.is_element(t2)):
                return False
        chal = challenge_scalar(
            group,
            ENC_TAG,
            *_enc_statement(pk, items),
            context,
            [list(pair) for pair in proof.commitments],
        )
        if chal != proof.challenge:
            return False
        for (m, (c1, c2)), (t1, t2), s in zip(items, proof.commitments, proof.responses):
            if group.exp_base(s) != group.mul(t1, group.exp(c1, chal)):
                return False
            blinded = group.div(c2, m)
            if group.exp(pk, s) != group.mul(t2, group.exp(blinded, chal)):
                return False
        return True
    except (GroupError, DecodeError, ValueError, TypeError):
        return False


# ---------------------------------------------------------------------------
# Plaintext equality of two ciphertext vectors
#
# Statement: pk, [((c1_i, c2_i), (c1*_i, c2*_i))]. Witness: delta_i =
# r_i - r*_i such that the component-wise quotient encrypts 1.


@dataclass(frozen=True)
class EqProof:
    commitments: tuple
    challenge: int
    responses: tuple

    @property
    def count(self) -> int:
        return len(self.responses)

    def to_bytes(self, group: PrimeOrderGroup) -> bytes:
        out = bytearray()
        for t1, t2 in self.commitments:
            out += t1
            out += t2
        out += group.encode_scalar(self.challenge)
        for s in self.responses:
            out += group.encode_scalar(s)
        return bytes(out)

    @classmethod
    def byte_size(cls, group: PrimeOrderGroup, count: int) -> int:
        return count * (2 * group.element_size + group.scalar_size) + group.scalar_size

    @classmethod
    def from_bytes(cls, group: PrimeOrderGroup, count: int, raw: bytes) -> "EqProof":
        if len(raw) != cls.byte_size(group, count):
            raise DecodeError("bad proof length")
        el = group.element_size
        commitments = []
        pos = 0
        for _ in range(count):
            commitments.append((raw[pos : pos + el], raw[pos + el : pos + 2 * el]))
            pos += 2 * el
        chal = group.decode_scalar(raw[pos : pos + group.scalar_size])
        pos += group.scalar_size
        responses = []
        for _ in range(count):
            responses.append(group.decode_scalar(raw[pos : pos + group.scalar_size]))
            pos += group.scalar_size
        return cls(tuple(commitments), chal, tuple(responses))


def _eq_statement(pk, pairs):
    return (pk, [[a1, a2, b1, b2] for ((a1, a2), (b1, b2)) in pairs])


def prove_plaintext_eq(
    group: PrimeOrderGroup,
    pk: bytes,
    pairs: list,  # [((c1, c2), (c1*, c2*))]
    deltas: list,  # [r_i - r*_i mod order]
    stream,
    context: bytes = b"",
) -> EqProof:
    if len(pairs) != len(deltas):
        raise ValueError("pairs/deltas length mismatch")
    ws = [group.random_scalar(stream) for _ in pairs]
    commitments = [(group.exp_base(w), group.exp(pk, w)) for w in ws]
    chal = challenge_scalar(
        group,
        EQ_TAG,
        *_eq_statement(pk, pairs),
        context,
        [list(pair) for pair in commitments],
    )
    responses = tuple((w + chal * d) % group.order for w, d in zip(ws, deltas))
    proof = EqProof(tuple(commitments), chal, responses)
    if not verify_plaintext_eq(group, pk, pairs, proof, context):
        raise ProofError("plaintext-equality proof failed self-check")
    return proof


def verify_plaintext_eq(
    group: PrimeOrderGroup,
    pk: bytes,
    pairs: list,
    proof: EqProof,
    context: bytes = b"",
) -> bool:
    try:
        if proof.count != len(pairs) or len(proof.commitments) != len(pairs):
            return False
        if not group.is_element(pk):
            return False
        for (a1, a2), (b1, b2) in pairs:
            for el in (a1, a2, b1, b2):
                if not group.is_element(el):
                    return False
        for t1, t2 in proof.commitments:
            if not (group.is_element(t1) and group.is_element(t2)):
                return False
        chal = challenge_scalar(
            group,
            EQ_TAG,
            *_eq_statement(pk, pairs),
            context,
            [list(pair) for pair in proof.commitments],
        )
        if chal != proof.challenge:
            return False
        for ((a1, a2), (b1, b2)), (t1, t2), s in zip(
            pairs, proof.commitments, proof.responses
        ):
            u = group.div(a1, b1)
            v = group.div(a2, b2)
            if group.exp_base(s) != group.mul(t1, group.exp(u, chal)):
                return False
            if group.exp(pk, s) != group.mul(t2, group.exp(v, chal)):
                return False
        return True
    except (GroupError, DecodeError, ValueError, TypeError):
        return False


def verify_plaintext_eq_bytes(
    group: PrimeOrderGroup,
    pk: bytes,
    pairs: list,
    raw: bytes,
    context: bytes = b"",
) -> bool:
    """Verify a serialized equality proof; False on any malformation."""
    try:
        proof = EqProof.from_bytes(group, len(pairs), raw)
    except (DecodeError, GroupError, ValueError, TypeError):
        return False
    return verify_plaintext_eq(group, pk, pairs, proof, context)
