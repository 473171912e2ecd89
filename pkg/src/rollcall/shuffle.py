"""Verifiable re-encryption mixing of parallel ciphertext columns.

Each mix server applies ONE secret permutation to all columns at once,
re-encrypts every ciphertext, and emits a proof with two layers:

* a Pedersen-style commitment to the permutation matrix (one commitment
  per row, plus a chained commitment whose collapse pins the product of
  the challenges), proving the committed matrix really is a permutation;

* per-column consistency: for each column, the challenge-weighted product
  of output ciphertexts is a re-encryption of the challenge-weighted
  product of inputs, with all columns sharing the single response vector
  tied to the matrix commitment -- so no column can be permuted
  differently from the others.

The commitment key (h_0, h_1..h_n) is derived by hashing a public context
string to the group, giving nothing-up-my-sleeve generators with unknown
relative discrete logs.

Verification is stateless and boolean: a verifier holding the input
columns, the output columns, and the proof accepts or rejects; any
single-bit change to any ciphertext, commitment, or response rejects.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .elgamal import Ciphertext
from .encoding import DecodeError, Decoder, encode
from .group import GroupError, PrimeOrderGroup
from .randomness import SeedStream

SHUFFLE_TAG = "shuffle/v1"


@dataclass(frozen=True)
class ShuffleProof:
    perm_commitments: tuple  # n elements
    chain: tuple  # n elements (chain anchor h_0 is part of the key)
    t1: bytes
    t2: bytes
    t3: bytes
    t4: tuple  # per column: (t4a, t4b)
    t_hat: tuple  # n elements
    s1: int
    s2: int
    s3: int
    s4: tuple  # per column scalar
    s_prime: tuple  # n scalars
    s_hat: tuple  # n scalars


@dataclass(frozen=True)
class ShuffleStep:
    server_index: int
    outputs: tuple  # columns x rows of Ciphertext
    proof: ShuffleProof


def derive_commitment_key(
    group: PrimeOrderGroup, n: int, context: bytes
) -> list[bytes]:
    """h_0 .. h_n from public context; independent generators by hashing."""
    return [
        group.hash_to_group(
            encode("shuffle-ck/v1", context, i), domain="shuffle-ck/v1"
        )
        for i in range(n + 1)
    ]


def _statement_digest(
    group: PrimeOrderGroup,
    pk: bytes,
    columns_in: list,
    columns_out: list,
    perm_commitments: list,
    server_index: int,
    context: bytes,
) -> bytes:
    return hashlib.shake_256(
        encode(
            SHUFFLE_TAG,
            group.name,
            pk,
            context,
            server_index,
            [[ct.c1 + ct.c2 for ct in col] for col in columns_in],
            [[ct.c1 + ct.c2 for ct in col] for col in columns_out],
            list(perm_commitments),
        )
    ).digest(32)


def _row_challenges(group: PrimeOrderGroup, stmt: bytes, n: int) -> list[int]:
    stream = SeedStream(hashlib.shake_256(encode("shuffle-u/v1", stmt)).digest(32))
    return [stream.scalar(group.order) for _ in range(n)]


def _final_challenge(group: PrimeOrderGroup, stmt: bytes, proof_parts) -> int:
    material = hashlib.shake_256(
        encode("shuffle-c/v1", stmt, proof_parts)
    ).digest(2 * group.scalar_size + 16)
    return int.from_bytes(material, "big") % group.order


def shuffle_step(
    group: PrimeOrderGroup,
    pk: bytes,
    columns: list,  # m columns, each a list of n Ciphertext
    stream: SeedStream,
    server_index: int,
    context: bytes = b"",
    commitment_key: list | None = None,
) -> ShuffleStep:
    step, _witness = shuffle_step_with_witness(
        group, pk, columns, stream, server_index, context, commitment_key
    )
    return step


def shuffle_step_with_witness(
    group: PrimeOrderGroup,
    pk: bytes,
    columns: list,
    stream: SeedStream,
    server_index: int,
    context: bytes = b"",
    commitment_key: list | None = None,
):
    """Mix + prove; also returns (permutation, randomness) for tests."""
    if not columns or not columns[0]:
        raise ValueError("shuffle needs at least one column with one row")
    n = len(columns[0])
    m = len(columns)
    if any(len(col) != n for col in columns):
        raise ValueError("ragged columns")
    order = group.order
    key = commitment_key or derive_commitment_key(group, n, context)
    if len(key) != n + 1:
        raise ValueError("commitment key size mismatch")
    h0, hs = key[0], key[1:]

    perm = stream.child("perm").permutation(n)
    inv = [0] * n
    for out_pos, in_pos in enumerate(perm):
        inv[in_pos] = out_pos

    rand_stream = stream.child("reenc")
    reenc_rand = [
        [rand_stream.scalar(order) for _ in range(n)] for _ in range(m)
    ]
    outputs = []
    for j in range(m):
        col = columns[j]
        out_col = []
        for i in range(n):
            src = col[perm[i]]
            r = reenc_rand[j][i]
            out_col.append(
                Ciphertext(
                    group.mul(src.c1, group.exp_base(r)),
                    group.mul(src.c2, group.exp(pk, r)),
                )
            )
        outputs.append(tuple(out_col))

    # Commitment to the permutation matrix: row i commits to h_{inv[i]+1}.
    com_stream = stream.child("perm-com")
    s = [com_stream.scalar(order) for _ in range(n)]
    perm_commitments = [
        group.mul(group.exp_base(s[i]), hs[inv[i]]) for i in range(n)
    ]

    stmt = _statement_digest(
        group, pk, columns, outputs, perm_commitments, server_index, context
    )
    u = _row_challenges(group, stmt, n)
    u_perm = [u[perm[i]] for i in range(n)]

    # Chained commitment pinning prod(u_perm) == prod(u).
    chain_stream = stream.child("chain")
    r_hat = [chain_stream.scalar(order) for _ in range(n)]
    chain = []
    prev = h0
    for i in range(n):
        link = group.mul(group.exp_base(r_hat[i]), group.exp(prev, u_perm[i]))
        chain.append(link)
        prev = link

    w_stream = stream.child("announce")
    w1 = w_stream.scalar(order)
    w2 = w_stream.scalar(order)
    w3 = w_stream.scalar(order)
    w4 = [w_stream.scalar(order) for _ in range(m)]
    w_prime = [w_stream.scalar(order) for _ in range(n)]
    w_hat = [w_stream.scalar(order) for _ in range(n)]

    t1 = group.exp_base(w1)
    t2 = group.exp_base(w2)
    t3 = group.mul(group.exp_base(w3), group.msm(hs, w_prime))
    t4 = []
    for j in range(m):
        a_bases = [ct.c1 for ct in outputs[j]]
        b_bases = [ct.c2 for ct in outputs[j]]
        t4a = group.mul(group.exp_base((-w4[j]) % order), group.msm(a_bases, w_prime))
        t4b = group.mul(group.exp(pk, (-w4[j]) % order), group.msm(b_bases, w_prime))
        t4.append((t4a, t4b))
    t_hat = []
    prev = h0
    for i in range(n):
        t_hat.append(group.mul(group.exp_base(w_hat[i]), group.exp(prev, w_prime[i])))
        prev = chain[i]

    chal = _final_challenge(
        group,
        stmt,
        [
            list(chain),
            t1,
            t2,
            t3,
            [list(pair) for pair in t4],
            list(t_hat),
        ],
    )

    r_bar = sum(s) % order
    r_tilde = sum(si * ui for si, ui in zip(s, u)) % order
    # Collapse exponent of the chain: Horner over the permuted challenges.
    r_hat_collapse = 0
    for i in range(n):
        r_hat_collapse = (r_hat_collapse * u_perm[i] + r_hat[i]) % order
    s1 = (w1 + chal * r_bar) % order
    s2 = (w2 + chal * r_hat_collapse) % order
    s3 = (w3 + chal * r_tilde) % order
    s4 = []
    for j in range(m):
        r_tilde_col = sum(
            reenc_rand[j][i] * u_perm[i] for i in range(n)
        ) % order
        s4.append((w4[j] + chal * r_tilde_col) % order)
    s_prime = tuple((w_prime[i] + chal * u_perm[i]) % order for i in range(n))
    s_hat = tuple((w_hat[i] + chal * r_hat[i]) % order for i in range(n))

    proof = ShuffleProof(
        tuple(perm_commitments),
        tuple(chain),
        t1,
        t2,
        t3,
        tuple(t4),
        tuple(t_hat),
        s1,
        s2,
        s3,
        tuple(s4),
        s_prime,
        s_hat,
    )
    step = ShuffleStep(server_index, tuple(outputs), proof)
    return step, (perm, reenc_rand)


def verify_shuffle_step(
    group: PrimeOrderGroup,
    pk: bytes,
    columns_in: list,
    step: ShuffleStep,
    context: bytes = b"",
    commitment_key: list | None = None,
) -> bool:
    try:
        columns_out = step.outputs
        proof = step.proof
        if not columns_in or not columns_in[0]:
            return False
        n = len(columns_in[0])
        m = len(columns_in)
        if len(columns_out) != m or any(len(col) != n for col in columns_in):
            return False
        if any(len(col) != n for col in columns_out):
            return False
        if not (
            len(proof.perm_commitments) == n
            and len(proof.chain) == n
            and len(proof.t_hat) == n
            and len(proof.s_prime) == n
            and len(proof.s_hat) == n
            and len(proof.t4) == m
            and len(proof.s4) == m
        ):
            return False
        for col in list(columns_in) + list(columns_out):
            for ct in col:
                if not (group.is_element(ct.c1) and group.is_element(ct.c2)):
                    return False
        for el in (
            list(proof.perm_commitments)
            + list(proof.chain)
            + [proof.t1, proof.t2, proof.t3]
            + [e for pair in proof.t4 for e in pair]
            + list(proof.t_hat)
        ):
            if not group.is_element(el):
                return False

        order = group.order
        key = commitment_key or derive_commitment_key(group, n, context)
        if len(key) != n + 1:
            return False
        h0, hs = key[0], key[1:]

        stmt = _statement_digest(
            group,
            pk,
            columns_in,
            columns_out,
            list(proof.perm_commitments),
            step.server_index,
            context,
        )
        u = _row_challenges(group, stmt, n)
        chal = _final_challenge(
            group,
            stmt,
            [
                list(proof.chain),
                proof.t1,
                proof.t2,
                proof.t3,
                [list(pair) for pair in proof.t4],
                list(proof.t_hat),
            ],
        )
        neg_chal = (-chal) % order

        # Matrix column sums: prod(c_i) / prod(h_k) == g^{r_bar}.
        c_bar = group.identity
        for c in proof.perm_commitments:
            c_bar = group.mul(c_bar, c)
        for h in hs:
            c_bar = group.div(c_bar, h)
        if group.exp_base(proof.s1) != group.mul(proof.t1, group.exp(c_bar, chal)):
            return False

        # Chain collapse: c_hat_n / h0^{prod u} == g^{r_hat_collapse}.
        u_prod = 1
        for ui in u:
            u_prod = (u_prod * ui) % order
        c_hat = group.div(proof.chain[-1], group.exp(h0, u_prod))
        if group.exp_base(proof.s2) != group.mul(proof.t2, group.exp(c_hat, chal)):
            return False

        # Challenge-weighted commitment product.
        c_tilde = group.msm(list(proof.perm_commitments), u)
        lhs = group.mul(group.exp_base(proof.s3), group.msm(hs, list(proof.s_prime)))
        if lhs != group.mul(proof.t3, group.exp(c_tilde, chal)):
            return False

        # Per-column consistency under the shared responses.
        for j in range(m):
            a_in = [ct.c1 for ct in columns_in[j]]
            b_in = [ct.c2 for ct in columns_in[j]]
            a_out = [ct.c1 for ct in columns_out[j]]
            b_out = [ct.c2 for ct in columns_out[j]]
            a_tilde = group.msm(a_in, u)
            b_tilde = group.msm(b_in, u)
            t4a, t4b = proof.t4[j]
            lhs_a = group.mul(
                group.exp_base((-proof.s4[j]) % order),
                group.msm(a_out, list(proof.s_prime)),
            )
            if lhs_a != group.mul(t4a, group.exp(a_tilde, chal)):
                return False
            lhs_b = group.mul(
                group.exp(pk, (-proof.s4[j]) % order),
                group.msm(b_out, list(proof.s_prime)),
            )
            if lhs_b != group.mul(t4b, group.exp(b_tilde, chal)):
                return False

        # Chain links.
        prev = h0
        for i in range(n):
            lhs = group.mul(
                group.exp_base(proof.s_hat[i]), group.exp(prev, proof.s_prime[i])
            )
            rhs = group.mul(proof.t_hat[i], group.exp(proof.chain[i], chal))
            if lhs != rhs:
                return False
            prev = proof.chain[i]
        return True
    except (GroupError, DecodeError, ValueError, TypeError, AttributeError):
        return False


def verify_shuffle(
    group: PrimeOrderGroup,
    pk: bytes,
    initial_columns: list,
    steps: list,
    context: bytes = b"",
    expected_servers: int | None = None,
) -> bool:
    """Verify a full mix chain; inputs of step k+1 must be outputs of step k."""
    try:
        if expected_servers is not None and len(steps) != expected_servers:
            return False
        if not steps:
            return False
        seen = [step.server_index for step in steps]
        if len(set(seen)) != len(seen):
            return False
        n = len(initial_columns[0]) if initial_columns else 0
        if n == 0:
            return False
        key = derive_commitment_key(group, n, context)
        current = initial_columns
        for step in steps:
            if not verify_shuffle_step(
                group, pk, current, step, context, commitment_key=key
            ):
                return False
            current = step.outputs
        return True
    except (GroupError, DecodeError, ValueError, TypeError, AttributeError):
        return False


# ---------------------------------------------------------------------------
# serialization (board storage of mix transcripts)


def step_to_bytes(group: PrimeOrderGroup, step: ShuffleStep) -> bytes:
    proof = step.proof
    return encode(
        "shuffle-step/v1",
        step.server_index,
        [[ct.c1 + ct.c2 for ct in col] for col in step.outputs],
        list(proof.perm_commitments),
        list(proof.chain),
        proof.t1,
        proof.t2,
        proof.t3,
        [list(pair) for pair in proof.t4],
        list(proof.t_hat),
        proof.s1,
        proof.s2,
        proof.s3,
        [group.encode_scalar(x) for x in proof.s4],
        [group.encode_scalar(x) for x in proof.s_prime],
        [group.encode_scalar(x) for x in proof.s_hat],
    )


def step_from_bytes(group: PrimeOrderGroup, raw: bytes) -> ShuffleStep:
    dec = Decoder(raw)
    if dec.read_str() != "shuffle-step/v1":
        raise DecodeError("not a shuffle step")
    server_index = dec.read_int()
    outputs = []
    for _ in range(dec.read_list_header()):
        col = []
        for _ in range(dec.read_list_header()):
            col.append(Ciphertext.from_bytes(group, dec.read_bytes()))
        outputs.append(tuple(col))
    el = group.element_size

    def read_elements():
        return tuple(dec.read_fixed(el) for _ in range(dec.read_list_header()))

    perm_commitments = read_elements()
    chain = read_elements()
    t1 = dec.read_fixed(el)
    t2 = dec.read_fixed(el)
    t3 = dec.read_fixed(el)
    t4 = []
    for _ in range(dec.read_list_header()):
        count = dec.read_list_header()
        if count != 2:
            raise DecodeError("bad t4 pair")
        t4.append((dec.read_fixed(el), dec.read_fixed(el)))
    t_hat = read_elements()
    s1 = dec.read_int()
    s2 = dec.read_int()
    s3 = dec.read_int()

    def read_scalars():
        return tuple(
            group.decode_scalar(dec.read_fixed(group.scalar_size))
            for _ in range(dec.read_list_header())
        )

    s4 = read_scalars()
    s_prime = read_scalars()
    s_hat = read_scalars()
    dec.expect_end()
    if s1 >= group.order or s2 >= group.order or s3 >= group.order:
        raise DecodeError("scalar out of range")
    proof = ShuffleProof(
        perm_commitments,
        chain,
        t1,
        t2,
        t3,
        tuple(t4),
        t_hat,
        s1,
        s2,
        s3,
        s4,
        s_prime,
        s_hat,
    )
    return ShuffleStep(server_index, tuple(outputs), proof)
