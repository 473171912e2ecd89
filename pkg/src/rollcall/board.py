"""Append-only bulletin board, digest-seeded sampling, payload registry.

The board is a set of named sections (registration rows, roll rows, cast
updates, vote records, the authorization ledger, mix transcripts, meta
events). Every append folds the record into one running digest, so any
later mutation is caught by replaying the log. Records are canonical bytes;
typed entries below wrap them.

``select_h_alpha`` turns the current digest into an audit sample: the
digest seeds a deterministic stream that drives a partial Fisher-Yates,
yielding the first alpha survivors. Anyone can recompute the sample from
the public log; nobody can steer it without changing the digest.

Large private payloads (photos, eligibility documents, validity
transcripts) never appear on the board. The registry holds them off-board,
keyed by a hash-to-group element; ciphertexts encrypt only the element.
Turning an element back into bytes requires naming a purpose, recipient
and location, and that act is itself appended to the board's authorization
ledger -- which is how leakage accounting becomes a checkable property
instead of a promise.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass

from .elgamal import Ciphertext
from .encoding import DecodeError, Decoder, encode
from .group import PrimeOrderGroup
from .randomness import SeedStream

SECTION_REGISTRATIONS = "ERR"
SECTION_ROLL = "ER"
SECTION_CAST_INFO = "CI"
SECTION_VOTES = "EV"
SECTION_AUTH = "AUTH"
SECTION_MIX = "MIX"
SECTION_META = "META"

SECTIONS = (
    SECTION_REGISTRATIONS,
    SECTION_ROLL,
    SECTION_CAST_INFO,
    SECTION_VOTES,
    SECTION_AUTH,
    SECTION_MIX,
    SECTION_META,
)


class BoardError(ValueError):
    pass


_LINK_TAG = encode("board-link/v1")
_DIGEST_HEADER = b"B" + (32).to_bytes(4, "big")  # chain digests are sha256


def _fold_link(digest: bytes, section: str, index: int, record: bytes) -> bytes:
    # streams the exact bytes of encode("board-link/v1", digest, section,
    # index, record) into the hash without materializing the concatenation
    h = hashlib.sha256(_LINK_TAG)
    h.update(_DIGEST_HEADER)
    h.update(digest)
    h.update(encode(section, index))
    h.update(b"B" + len(record).to_bytes(4, "big"))
    h.update(record)
    return h.digest()


class Board:
    """Sectioned append-only log with one running digest."""

    def __init__(self, board_id: str):
        self.board_id = board_id
        self.sections: dict[str, list[bytes]] = {name: [] for name in SECTIONS}
        self.digest = hashlib.sha256(encode("board-genesis/v1", board_id)).digest()
        # global append order; digests depend on it, so persistence keeps it
        self._order: list[tuple[str, int, bytes]] = []

    def append(self, section: str, record: bytes) -> tuple[int, bytes]:
        if section not in self.sections:
            raise BoardError(f"unknown section {section!r}")
        if not isinstance(record, bytes):
            raise BoardError("records must be bytes")
        rows = self.sections[section]
        index = len(rows)
        rows.append(record)
        self.digest = _fold_link(self.digest, section, index, record)
        self._order.append((section, index, record))
        return index, self.digest

    def entries(self, section: str) -> list[bytes]:
        if section not in self.sections:
            raise BoardError(f"unknown section {section!r}")
        return list(self.sections[section])

    def entry(self, section: str, index: int) -> bytes:
        rows = self.entries(section)
        if not 0 <= index < len(rows):
            raise BoardError(f"no row {index} in section {section}")
        return rows[index]

    def size(self, section: str) -> int:
        return len(self.sections[section])

    def replay_digest(self) -> bytes:
        """Recompute the digest from genesis over the global append order;
        equality with ``self.digest`` proves nothing was altered in place."""
        digest = hashlib.sha256(encode("board-genesis/v1", self.board_id)).digest()
        for section, index, record in self._order:
            digest = _fold_link(digest, section, index, record)
        return digest

    # -- persistence ---------------------------------------------------------

    def save(self, directory: str) -> None:
        os.makedirs(directory, exist_ok=True)
        manifest = {
            "board_id": self.board_id,
            "digest": self.digest.hex(),
            "order": [[s, i] for s, i, _ in self._order],
        }
        with open(os.path.join(directory, "board.json"), "w") as fh:
            json.dump(manifest, fh, indent=1)
        for section, rows in self.sections.items():
            with open(os.path.join(directory, f"{section}.log"), "w") as fh:
                for row in rows:
                    fh.write(row.hex() + "\n")

    @classmethod
    def load(cls, directory: str) -> "Board":
        with open(os.path.join(directory, "board.json")) as fh:
            manifest = json.load(fh)
        board = cls(manifest["board_id"])
        sections: dict[str, list[bytes]] = {}
        for section in SECTIONS:
            path = os.path.join(directory, f"{section}.log")
            rows = []
            if os.path.exists(path):
                with open(path) as fh:
                    rows = [bytes.fromhex(line.strip()) for line in fh if line.strip()]
            sections[section] = rows
        cursor = {name: 0 for name in SECTIONS}
        for section, index in manifest["order"]:
            if index != cursor[section]:
                raise BoardError("board order log is inconsistent")
            cursor[section] += 1
            board.append(section, sections[section][index])
        for section in SECTIONS:
            if cursor[section] != len(sections[section]):
                raise BoardError(f"section {section} has unreferenced rows")
        if board.digest != bytes.fromhex(manifest["digest"]):
            raise BoardError("digest mismatch after replay; board was modified")
        return board


def select_h_alpha(
    digest: bytes, population: int, alpha: int, label: str = ""
) -> list[int]:
    """Sample alpha of ``population`` indices from a board digest.

    Pure function of (digest, population, alpha, label): the digest seeds a
    deterministic stream driving a partial Fisher-Yates; the first alpha
    survivors, sorted, are the sample. alpha > population clamps to all.
    """
    if population < 0 or alpha < 0:
        raise ValueError("population and alpha must be non-negative")
    alpha = min(alpha, population)
    if alpha == 0:
        return []
    seed = hashlib.shake_256(
        encode("board-sample/v1", digest, population, alpha, label)
    ).digest(32)
    return SeedStream(seed).sample_indices(population, alpha)


# ---------------------------------------------------------------------------
# payload registry with authorization ledger


@dataclass(frozen=True)
class AuthRecord:
    purpose: str
    recipient: str
    section: str
    row: int
    column: str
    element: bytes

    def to_bytes(self) -> bytes:
        return encode(
            "auth/v1",
            self.purpose,
            self.recipient,
            self.section,
            self.row,
            self.column,
            self.element,
        )

    @classmethod
    def from_bytes(cls, raw: bytes) -> "AuthRecord":
        dec = Decoder(raw)
        if dec.read_str() != "auth/v1":
            raise DecodeError("not an auth record")
        out = cls(
            dec.read_str(),
            dec.read_str(),
            dec.read_str(),
            dec.read_int(),
            dec.read_str(),
            dec.read_bytes(),
        )
        dec.expect_end()
        return out


class PayloadRegistry:
    """Off-board store, hash-to-group indexed, decode-through-ledger only."""

    def __init__(self, group: PrimeOrderGroup):
        self.group = group
        self._store: dict[bytes, bytes] = {}

    def encode_payload(self, payload: bytes) -> bytes:
        """Map payload bytes to a group element and remember the preimage."""
        element = self.group.hash_to_group(payload, domain="payload/v1")
        existing = self._store.get(element)
        if existing is not None and existing != payload:
            raise BoardError("hash-to-group collision between distinct payloads")
        self._store[element] = payload
        return element

    def element_for(self, payload: bytes) -> bytes:
        return self.group.hash_to_group(payload, domain="payload/v1")

    def holds(self, element: bytes) -> bool:
        return element in self._store

    def decode(
        self,
        board: Board,
        element: bytes,
        *,
        purpose: str,
        recipient: str,
        section: str,
        row: int,
        column: str,
    ) -> bytes:
        """Return the payload behind an element, logging the authorization.

        Raises KeyError for unknown elements (nothing is logged then: there
        is nothing to disclose).
        """
        payload = self._store.get(element)
        if payload is None:
            raise KeyError("element not present in registry")
        board.append(
            SECTION_AUTH,
            AuthRecord(purpose, recipient, section, row, column, element).to_bytes(),
        )
        return payload

    # -- persistence ----------------------------------------------------------

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(
                {el.hex(): payload.hex() for el, payload in self._store.items()}, fh
            )

    @classmethod
    def load(cls, group: PrimeOrderGroup, path: str) -> "PayloadRegistry":
        registry = cls(group)
        with open(path) as fh:
            data = json.load(fh)
        registry._store = {
            bytes.fromhex(el): bytes.fromhex(payload) for el, payload in data.items()
        }
        return registry


def auth_records(board: Board) -> list[AuthRecord]:
    return [AuthRecord.from_bytes(raw) for raw in board.entries(SECTION_AUTH)]


def decoded_rows(
    board: Board, section: str, purpose_prefix: str = ""
) -> set[int]:
    """Distinct rows of a section whose payloads were decoded (optionally
    restricted to purposes with a given prefix)."""
    rows = set()
    for record in auth_records(board):
        if record.section == section and record.purpose.startswith(purpose_prefix):
            rows.add(record.row)
    return rows


# ---------------------------------------------------------------------------
# typed board entries


@dataclass(frozen=True)
class ErrEntry:
    """One registration row: identifier plus four ciphertext columns."""

    uid: str
    c_vid: Ciphertext
    c_block: Ciphertext
    c_ed: Ciphertext
    c_photo: Ciphertext

    def columns(self) -> tuple:
        return (self.c_vid, self.c_block, self.c_ed, self.c_photo)

    def to_bytes(self) -> bytes:
        return encode(
            "err/v1",
            self.uid,
            self.c_vid.to_bytes(),
            self.c_block.to_bytes(),
            self.c_ed.to_bytes(),
            self.c_photo.to_bytes(),
        )

    @classmethod
    def from_bytes(cls, group: PrimeOrderGroup, raw: bytes) -> "ErrEntry":
        dec = Decoder(raw)
        if dec.read_str() != "err/v1":
            raise DecodeError("not a registration row")
        uid = dec.read_str()
        cts = [Ciphertext.from_bytes(group, dec.read_bytes()) for _ in range(4)]
        dec.expect_end()
        return cls(uid, *cts)


@dataclass(frozen=True)
class ErEntry:
    """One roll row: mixed ciphertexts, public openings, response, booth."""

    c_vid: Ciphertext
    c_block: Ciphertext
    c_ed: Ciphertext
    c_photo: Ciphertext
    vid: str
    block: int
    vid_shares: bytes  # serialized decryption share bundle
    block_shares: bytes
    resp: int
    booth: int  # -1 when no booth was assigned (resp == 0)

    def columns(self) -> tuple:
        return (self.c_vid, self.c_block, self.c_ed, self.c_photo)

    def to_bytes(self) -> bytes:
        return encode(
            "er/v1",
            self.c_vid.to_bytes(),
            self.c_block.to_bytes(),
            self.c_ed.to_bytes(),
            self.c_photo.to_bytes(),
            self.vid,
            self.block,
            self.vid_shares,
            self.block_shares,
            self.resp,
            self.booth + 1,
        )

    @classmethod
    def from_bytes(cls, group: PrimeOrderGroup, raw: bytes) -> "ErEntry":
        dec = Decoder(raw)
        if dec.read_str() != "er/v1":
            raise DecodeError("not a roll row")
        cts = [Ciphertext.from_bytes(group, dec.read_bytes()) for _ in range(4)]
        vid = dec.read_str()
        block = dec.read_int()
        vid_shares = dec.read_bytes()
        block_shares = dec.read_bytes()
        resp = dec.read_int()
        booth = dec.read_int() - 1
        dec.expect_end()
        return cls(*cts, vid, block, vid_shares, block_shares, resp, booth)


@dataclass(frozen=True)
class CastInfoEntry:
    """Cast-time update for one roll row. Dummy fills are byte-identical."""

    row: int
    c_photo_cast: Ciphertext
    c_validity: Ciphertext

    def to_bytes(self) -> bytes:
        return encode(
            "ci/v1",
            self.row,
            self.c_photo_cast.to_bytes(),
            self.c_validity.to_bytes(),
        )

    @classmethod
    def from_bytes(cls, group: PrimeOrderGroup, raw: bytes) -> "CastInfoEntry":
        dec = Decoder(raw)
        if dec.read_str() != "ci/v1":
            raise DecodeError("not a cast-info row")
        row = dec.read_int()
        a = Ciphertext.from_bytes(group, dec.read_bytes())
        b = Ciphertext.from_bytes(group, dec.read_bytes())
        dec.expect_end()
        return cls(row, a, b)


@dataclass(frozen=True)
class VoteEntry:
    """Accepted vote record: roll identifier plus the encrypted ballot."""

    vid: str
    ev: bytes  # opaque serialized ballot from the vote-casting layer

    def to_bytes(self) -> bytes:
        return encode("ev/v1", self.vid, self.ev)

    @classmethod
    def from_bytes(cls, raw: bytes) -> "VoteEntry":
        dec = Decoder(raw)
        if dec.read_str() != "ev/v1":
            raise DecodeError("not a vote row")
        out = cls(dec.read_str(), dec.read_bytes())
        dec.expect_end()
        return out


@dataclass(frozen=True)
class MetaEvent:
    kind: str
    payload: bytes

    def to_bytes(self) -> bytes:
        return encode("meta/v1", self.kind, self.payload)

    @classmethod
    def from_bytes(cls, raw: bytes) -> "MetaEvent":
        dec = Decoder(raw)
        if dec.read_str() != "meta/v1":
            raise DecodeError("not a meta event")
        out = cls(dec.read_str(), dec.read_bytes())
        dec.expect_end()
        return out
