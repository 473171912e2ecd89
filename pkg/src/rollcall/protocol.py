"""The five-phase roll protocol: setup, registration, roll preparation,
casting, close.

One ``Election`` object carries the public board plus every actor's
private state (trustee key shares, the eligibility officer's decrypted
row data, the polling officers' cast bookkeeping). Methods are the
protocol's honest actors; an adversary harness manipulates state around
them rather than through them.

Registration receipts come in four independently parseable quadrants.
The two left quadrants name the person (identifier, registration photo);
the two right quadrants name the roll entry (roll id, block, eligibility
record). Each side carries the ciphertexts it talks about and a proof,
and the cross-side equality proof is split by XOR into one half per
cipher quadrant, so that no single quadrant pair both names the person
and names the roll entry unless both plaintext quadrants are disclosed
together -- which the audit never does.
"""

from __future__ import annotations

from dataclasses import dataclass

from .board import (
    Board,
    CastInfoEntry,
    ErEntry,
    ErrEntry,
    MetaEvent,
    PayloadRegistry,
    SECTION_CAST_INFO,
    SECTION_META,
    SECTION_MIX,
    SECTION_REGISTRATIONS,
    SECTION_ROLL,
    SECTION_VOTES,
    VoteEntry,
)
from .elgamal import (
    Ciphertext,
    JointPublicKey,
    ciphertext_valid,
    encrypt,
    keygen,
    serialize_shares,
    threshold_decrypt,
)
from .encoding import DecodeError, Decoder, encode, xor_bytes
from .group import DEFAULT_GROUP, GroupError, PrimeOrderGroup, get_group
from .oracles import (
    ENV_CASTING,
    ENV_PRE_CASTING,
    ENV_PRE_REGISTRATION,
    ENV_REGISTRATION,
    PhotoToken,
    World,
)
from .proofs import (
    EncKnowledgeProof,
    SchnorrProof,
    prove_enc_knowledge,
    prove_plaintext_eq,
    prove_pop,
    verify_enc_knowledge,
    verify_plaintext_eq_bytes,
    verify_pop,
)
from .randomness import SeedStream
from .shuffle import shuffle_step, step_to_bytes, verify_shuffle


class ProtocolError(RuntimeError):
    """An honest actor hit a state the protocol says cannot happen."""


PHASE_REGISTRATION = "registration"
PHASE_CASTING = "casting"
PHASE_CLOSED = "closed"

# authorization-ledger purposes
PURPOSE_DUPREG_CHECK = "dupreg-check"
PURPOSE_DUPREG_RELEASE = "dupreg-release"
PURPOSE_ROLL_PUBLIC = "roll-open-public"
PURPOSE_ROLL_EO = "roll-open-eo"
PURPOSE_CAST_PO = "cast-po"
PURPOSE_CAST_INELIGIBLE = "cast-ineligible-open"

_RECEIPT_CTX = "reg-receipt/v1"
STUB_TAG = "stub-vote/v1"


# ---------------------------------------------------------------------------
# payload formats (what ciphertext plaintexts decode to)


def payload_element(group: PrimeOrderGroup, payload: bytes) -> bytes:
    """Deterministic payload-to-element map, same as the registry's."""
    return group.hash_to_group(payload, domain="payload/v1")


def vid_payload(vid: str) -> bytes:
    return encode("pl-vid/v1", vid)


def block_payload(block: int) -> bytes:
    return encode("pl-block/v1", block)


def ed_payload(ed: bytes) -> bytes:
    return encode("pl-ed/v1", ed)


def photo_payload(photo: PhotoToken) -> bytes:
    return encode("pl-photo/v1", photo.to_bytes())


def validity_payload(transcript: bytes) -> bytes:
    return encode("pl-validity/v1", transcript)


def _parse_payload(tag: str, payload: bytes):
    dec = Decoder(payload)
    if dec.read_str() != tag:
        raise DecodeError(f"payload is not {tag}")
    return dec


def parse_vid(payload: bytes) -> str:
    dec = _parse_payload("pl-vid/v1", payload)
    vid = dec.read_str()
    dec.expect_end()
    return vid


def parse_block(payload: bytes) -> int:
    dec = _parse_payload("pl-block/v1", payload)
    block = dec.read_int()
    dec.expect_end()
    return block


def parse_ed(payload: bytes) -> bytes:
    dec = _parse_payload("pl-ed/v1", payload)
    ed = dec.read_bytes()
    dec.expect_end()
    return ed


def parse_photo(payload: bytes) -> PhotoToken:
    dec = _parse_payload("pl-photo/v1", payload)
    photo = PhotoToken.from_bytes(dec.read_bytes())
    dec.expect_end()
    return photo


def parse_validity(payload: bytes) -> bytes:
    dec = _parse_payload("pl-validity/v1", payload)
    transcript = dec.read_bytes()
    dec.expect_end()
    return transcript


# ---------------------------------------------------------------------------
# registration receipts


@dataclass(frozen=True)
class RegReject:
    """Identifier check failed: the person does not own what they presented."""

    uid: str
    photo_pre: PhotoToken

    kind = "reg-reject"

    def to_bytes(self, group=None) -> bytes:
        return encode("reg-reject/v1", self.uid, self.photo_pre.to_bytes())

    @classmethod
    def from_bytes(cls, group, raw: bytes) -> "RegReject":
        dec = Decoder(raw)
        if dec.read_str() != "reg-reject/v1":
            raise DecodeError("not a registration rejection")
        uid = dec.read_str()
        photo = PhotoToken.from_bytes(dec.read_bytes())
        dec.expect_end()
        return cls(uid, photo)


@dataclass(frozen=True)
class RegDupReg:
    """Repeat registration: the previously registered photo is released."""

    photo_pre: PhotoToken
    photo_prior: PhotoToken

    kind = "reg-dup"

    def to_bytes(self, group=None) -> bytes:
        return encode(
            "reg-dup/v1", self.photo_pre.to_bytes(), self.photo_prior.to_bytes()
        )

    @classmethod
    def from_bytes(cls, group, raw: bytes) -> "RegDupReg":
        dec = Decoder(raw)
        if dec.read_str() != "reg-dup/v1":
            raise DecodeError("not a duplicate-registration receipt")
        pre = PhotoToken.from_bytes(dec.read_bytes())
        prior = PhotoToken.from_bytes(dec.read_bytes())
        dec.expect_end()
        return cls(pre, prior)


@dataclass(frozen=True)
class RegAccept:
    """Accepted registration, four quadrants.

    identity side: (uid, registration photo, encryption proof) over the
    photo ciphertext; roll side: (roll id, block, eligibility record,
    encryption proof) over three fresh ciphertexts. The equality proof
    linking row ciphertexts to the fresh ones is XOR-split across the two
    cipher quadrants.
    """

    uid: str
    photo_reg: PhotoToken
    rho_enc1: EncKnowledgeProof
    row_cts: tuple  # (c_vid, c_block, c_ed, c_photo) as posted to the board
    rho_eq_first: bytes
    vid: str
    block: int
    ed: bytes
    rho_enc2: EncKnowledgeProof
    star_cts: tuple  # (c*_vid, c*_block, c*_ed), receipt-only
    rho_eq_second: bytes
    err_row: int

    kind = "reg-accept"

    # -- quadrant encodings (each stands alone) --

    def identity_plain(self, group) -> bytes:
        return encode(
            "rq-id-plain/v1",
            self.uid,
            self.photo_reg.to_bytes(),
            self.rho_enc1.to_bytes(group),
        )

    def identity_cipher(self, group=None) -> bytes:
        return encode(
            "rq-id-cipher/v1",
            [ct.to_bytes() for ct in self.row_cts],
            self.rho_eq_first,
        )

    def roll_plain(self, group) -> bytes:
        return encode(
            "rq-roll-plain/v1",
            self.vid,
            self.block,
            self.ed,
            self.rho_enc2.to_bytes(group),
        )

    def roll_cipher(self, group=None) -> bytes:
        return encode(
            "rq-roll-cipher/v1",
            [ct.to_bytes() for ct in self.star_cts],
            self.rho_eq_second,
        )

    def to_bytes(self, group) -> bytes:
        return encode(
            "reg-accept/v1",
            self.identity_plain(group),
            self.identity_cipher(),
            self.roll_plain(group),
            self.roll_cipher(),
            self.err_row,
        )

    @classmethod
    def from_bytes(cls, group, raw: bytes) -> "RegAccept":
        dec = Decoder(raw)
        if dec.read_str() != "reg-accept/v1":
            raise DecodeError("not an accepted-registration receipt")
        uid, photo, rho1 = parse_identity_plain(group, dec.read_bytes())
        row_cts, first = parse_identity_cipher(group, dec.read_bytes())
        vid, block, ed, rho2 = parse_roll_plain(group, dec.read_bytes())
        star_cts, second = parse_roll_cipher(group, dec.read_bytes())
        err_row = dec.read_int()
        dec.expect_end()
        return cls(
            uid, photo, rho1, row_cts, first, vid, block, ed, rho2, star_cts,
            second, err_row,
        )


def parse_identity_plain(group, raw: bytes):
    dec = Decoder(raw)
    if dec.read_str() != "rq-id-plain/v1":
        raise DecodeError("not an identity plain quadrant")
    uid = dec.read_str()
    photo = PhotoToken.from_bytes(dec.read_bytes())
    rho = EncKnowledgeProof.from_bytes(group, 1, dec.read_bytes())
    dec.expect_end()
    return uid, photo, rho


def parse_identity_cipher(group, raw: bytes):
    dec = Decoder(raw)
    if dec.read_str() != "rq-id-cipher/v1":
        raise DecodeError("not an identity cipher quadrant")
    count = dec.read_list_header()
    if count != 4:
        raise DecodeError("identity cipher quadrant carries four ciphertexts")
    cts = tuple(Ciphertext.from_bytes(group, dec.read_bytes()) for _ in range(4))
    first = dec.read_bytes()
    dec.expect_end()
    return cts, first


def parse_roll_plain(group, raw: bytes):
    dec = Decoder(raw)
    if dec.read_str() != "rq-roll-plain/v1":
        raise DecodeError("not a roll plain quadrant")
    vid = dec.read_str()
    block = dec.read_int()
    ed = dec.read_bytes()
    rho = EncKnowledgeProof.from_bytes(group, 3, dec.read_bytes())
    dec.expect_end()
    return vid, block, ed, rho


def parse_roll_cipher(group, raw: bytes):
    dec = Decoder(raw)
    if dec.read_str() != "rq-roll-cipher/v1":
        raise DecodeError("not a roll cipher quadrant")
    count = dec.read_list_header()
    if count != 3:
        raise DecodeError("roll cipher quadrant carries three ciphertexts")
    cts = tuple(Ciphertext.from_bytes(group, dec.read_bytes()) for _ in range(3))
    second = dec.read_bytes()
    dec.expect_end()
    return cts, second


# ---------------------------------------------------------------------------
# cast receipts


@dataclass(frozen=True)
class CastUnknownVid:
    vid: str

    kind = "cast-unknown"

    def to_bytes(self, group=None) -> bytes:
        return encode("cast-unknown/v1", self.vid)

    @classmethod
    def from_bytes(cls, group, raw: bytes) -> "CastUnknownVid":
        dec = Decoder(raw)
        if dec.read_str() != "cast-unknown/v1":
            raise DecodeError("not an unknown-id rejection")
        vid = dec.read_str()
        dec.expect_end()
        return cls(vid)


@dataclass(frozen=True)
class CastWrongPerson:
    vid: str
    photo_pre: PhotoToken

    kind = "cast-wrong-person"

    def to_bytes(self, group=None) -> bytes:
        return encode("cast-wrong/v1", self.vid, self.photo_pre.to_bytes())

    @classmethod
    def from_bytes(cls, group, raw: bytes) -> "CastWrongPerson":
        dec = Decoder(raw)
        if dec.read_str() != "cast-wrong/v1":
            raise DecodeError("not a wrong-person rejection")
        vid = dec.read_str()
        photo = PhotoToken.from_bytes(dec.read_bytes())
        dec.expect_end()
        return cls(vid, photo)


@dataclass(frozen=True)
class CastIneligible:
    """Turned away for ineligibility, with the roll row's record opened."""

    vid: str
    row: int
    photo_pre: PhotoToken
    ed_opened: bytes
    shares: bytes  # serialized decryption-share bundle for the opening

    kind = "cast-ineligible"

    def to_bytes(self, group=None) -> bytes:
        return encode(
            "cast-inel/v1",
            self.vid,
            self.row,
            self.photo_pre.to_bytes(),
            self.ed_opened,
            self.shares,
        )

    @classmethod
    def from_bytes(cls, group, raw: bytes) -> "CastIneligible":
        dec = Decoder(raw)
        if dec.read_str() != "cast-inel/v1":
            raise DecodeError("not an ineligibility rejection")
        vid = dec.read_str()
        row = dec.read_int()
        photo = PhotoToken.from_bytes(dec.read_bytes())
        ed_opened = dec.read_bytes()
        shares = dec.read_bytes()
        dec.expect_end()
        return cls(vid, row, photo, ed_opened, shares)


@dataclass(frozen=True)
class CastDupCast:
    """Second visit for an already-voted row, person verified present."""

    photo_pre: PhotoToken
    photo_cast: PhotoToken

    kind = "cast-dup"

    def to_bytes(self, group=None) -> bytes:
        return encode(
            "cast-dup/v1", self.photo_pre.to_bytes(), self.photo_cast.to_bytes()
        )

    @classmethod
    def from_bytes(cls, group, raw: bytes) -> "CastDupCast":
        dec = Decoder(raw)
        if dec.read_str() != "cast-dup/v1":
            raise DecodeError("not a duplicate-cast receipt")
        pre = PhotoToken.from_bytes(dec.read_bytes())
        cast = PhotoToken.from_bytes(dec.read_bytes())
        dec.expect_end()
        return cls(pre, cast)


@dataclass(frozen=True)
class CastAccept:
    vid: str
    row: int
    ballot: bytes  # serialized ballot ciphertext, as posted

    kind = "cast-accept"

    def to_bytes(self, group=None) -> bytes:
        return encode("cast-accept/v1", self.vid, self.row, self.ballot)

    @classmethod
    def from_bytes(cls, group, raw: bytes) -> "CastAccept":
        dec = Decoder(raw)
        if dec.read_str() != "cast-accept/v1":
            raise DecodeError("not an accepted-cast receipt")
        vid = dec.read_str()
        row = dec.read_int()
        ballot = dec.read_bytes()
        dec.expect_end()
        return cls(vid, row, ballot)


_RECEIPT_TYPES = {
    "reg-reject/v1": RegReject,
    "reg-dup/v1": RegDupReg,
    "reg-accept/v1": RegAccept,
    "cast-unknown/v1": CastUnknownVid,
    "cast-wrong/v1": CastWrongPerson,
    "cast-inel/v1": CastIneligible,
    "cast-dup/v1": CastDupCast,
    "cast-accept/v1": CastAccept,
}


def receipt_from_bytes(group, raw: bytes):
    """Parse any receipt by its leading tag."""
    dec = Decoder(raw)
    tag = dec.read_str()
    cls = _RECEIPT_TYPES.get(tag)
    if cls is None:
        raise DecodeError(f"unknown receipt tag {tag!r}")
    return cls.from_bytes(group, raw)


# ---------------------------------------------------------------------------
# stand-in vote-casting layer

# The roll protocol treats the vote system as a black box that yields an
# encrypted ballot plus a transcript whose validity anyone can check.
# The stand-in: ElGamal ballot, transcript = proof of knowledge of the
# ballot's encryption randomness, bound to the ballot body.


@dataclass(frozen=True)
class StubVote:
    ballot: Ciphertext
    transcript: bytes


def stub_cast(group: PrimeOrderGroup, pk: bytes, choice: bytes, stream) -> StubVote:
    elem = group.hash_to_group(encode("stub-choice/v1", choice))
    ballot, r = encrypt(group, pk, elem, stream)
    proof = prove_pop(
        group,
        r,
        ballot.c1,
        stream.child("transcript"),
        context=encode(STUB_TAG, ballot.c2),
    )
    return StubVote(ballot, proof.to_bytes(group))


def stub_transcript_size(group: PrimeOrderGroup) -> int:
    return SchnorrProof.byte_size(group)


def stub_valid(group: PrimeOrderGroup, transcript: bytes, ballot_bytes) -> int:
    """1 iff the transcript proves the ballot well-formed. Garbage gives 0."""
    if not ballot_bytes:
        return 0
    try:
        ballot = Ciphertext.from_bytes(group, ballot_bytes)
        proof = SchnorrProof.from_bytes(group, transcript)
    except (DecodeError, GroupError, ValueError, TypeError):
        return 0
    if not ciphertext_valid(group, ballot):
        return 0
    return int(
        verify_pop(group, ballot.c1, proof, context=encode(STUB_TAG, ballot.c2))
    )


def stub_dummy(group: PrimeOrderGroup, pk: bytes, stream) -> StubVote:
    """Filler with the byte profile of a real vote and an invalid transcript."""
    elem = group.hash_to_group(stream.take(32))
    ballot, _ = encrypt(group, pk, elem, stream)
    return StubVote(ballot, stream.child("junk").take(stub_transcript_size(group)))


# ---------------------------------------------------------------------------
# election configuration and state


@dataclass(frozen=True)
class ElectionConfig:
    seed: int = 7
    group_name: str = DEFAULT_GROUP
    kappa: int = 3
    alpha: int = 20
    n_blocks: int = 4
    n_booths: int = 2
    vid_digits: int = 10
    board_id: str = "election"
    check_receipts: bool = True  # run the voter-side check on issue
    verify_mix_inline: bool = True  # roll preparation re-verifies the mix
    issue_receipts: bool = True  # False: board rows only, for bulk trials

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "group_name": self.group_name,
            "kappa": self.kappa,
            "alpha": self.alpha,
            "n_blocks": self.n_blocks,
            "n_booths": self.n_booths,
            "vid_digits": self.vid_digits,
            "board_id": self.board_id,
            "check_receipts": self.check_receipts,
            "verify_mix_inline": self.verify_mix_inline,
            "issue_receipts": self.issue_receipts,
        }

    @classmethod
    def from_json(cls, data: dict) -> "ElectionConfig":
        return cls(**data)


class Election:
    """All actors of one election around one board.

    Public state: ``board``, ``jpk``, ``registry`` (decode-through-ledger).
    Private state: ``trustees`` (key shares), ``eo_rows`` (the eligibility
    officer's decrypted roll data), polling-officer cast bookkeeping.
    """

    def __init__(self, config: ElectionConfig, world: World):
        if config.kappa < 1:
            raise ValueError("need at least one mix/key server")
        if config.n_booths < 1 or config.n_blocks < 1:
            raise ValueError("need at least one booth and one block")
        self.config = config
        self.world = world
        self.group: PrimeOrderGroup = get_group(config.group_name)
        self.board = Board(config.board_id)
        self.registry = PayloadRegistry(self.group)
        self.master = SeedStream.from_seed(config.seed, "election")
        setup_ctx = encode("election-setup/v1", config.board_id, config.group_name)
        self.jpk, self.trustees = keygen(
            self.group, config.kappa, self.master.child("keygen"), setup_ctx
        )
        self.context = encode(
            "election/v1", config.board_id, self.group.name, self.jpk.pk
        )
        self.phase = PHASE_REGISTRATION
        self.used_vids: set[str] = set()
        self.uid_rows: dict[str, int] = {}
        self.reg_receipts: dict[str, object] = {}
        self.roll_by_vid: dict[str, int] = {}
        self.eo_rows: list[dict] = []  # per roll row: photo, ed, resp, elements
        self.po_cast: dict[int, bytes] = {}  # row -> posted ballot bytes
        self.dummy_fill_rows: set[int] = set()
        self.cast_receipts: list = []
        self._er_cache: list[ErEntry] | None = None
        self.board.append(
            SECTION_META,
            MetaEvent(
                "genesis",
                encode(
                    "genesis/v1",
                    config.board_id,
                    self.group.name,
                    config.kappa,
                    config.alpha,
                    config.n_blocks,
                    config.n_booths,
                    config.vid_digits,
                ),
            ).to_bytes(),
        )
        self.board.append(
            SECTION_META,
            MetaEvent(
                "joint-key",
                encode(
                    "joint-key/v1",
                    self.jpk.pk,
                    list(self.jpk.share_publics),
                    [pop.to_bytes(self.group) for pop in self.jpk.share_pops],
                ),
            ).to_bytes(),
        )

    # -- plumbing -----------------------------------------------------------

    def _require_phase(self, *allowed: str) -> None:
        if self.phase not in allowed:
            raise ProtocolError(
                f"operation allowed in {allowed}, but the election is in "
                f"phase {self.phase!r}"
            )

    def _receipt_ctx(self) -> bytes:
        # Never bind uid or vid here: quadrants must verify in isolation.
        return encode(_RECEIPT_CTX, self.context)

    def _encrypt_payload(self, payload: bytes, stream) -> tuple[Ciphertext, int, bytes]:
        element = self.registry.encode_payload(payload)
        ct, r = encrypt(self.group, self.jpk.pk, element, stream)
        return ct, r, element

    def _fresh_vid(self, stream) -> str:
        while True:
            vid = "".join(
                str(stream.integer_below(10)) for _ in range(self.config.vid_digits)
            )
            if vid not in self.used_vids:
                return vid

    def err_entries(self) -> list[ErrEntry]:
        return [
            ErrEntry.from_bytes(self.group, raw)
            for raw in self.board.entries(SECTION_REGISTRATIONS)
        ]

    def er_entries(self) -> list[ErEntry]:
        if self._er_cache is None or len(self._er_cache) != self.board.size(
            SECTION_ROLL
        ):
            self._er_cache = [
                ErEntry.from_bytes(self.group, raw)
                for raw in self.board.entries(SECTION_ROLL)
            ]
        return self._er_cache

    def ci_by_row(self) -> dict[int, CastInfoEntry]:
        """Latest cast-info entry per roll row."""
        latest: dict[int, CastInfoEntry] = {}
        for raw in self.board.entries(SECTION_CAST_INFO):
            entry = CastInfoEntry.from_bytes(self.group, raw)
            latest[entry.row] = entry
        return latest

    def votes_by_vid(self) -> dict[str, bytes]:
        out: dict[str, bytes] = {}
        for raw in self.board.entries(SECTION_VOTES):
            entry = VoteEntry.from_bytes(raw)
            out[entry.vid] = entry.ev
        return out

    # -- registration ---------------------------------------------------------

    def register(
        self,
        subject_id: int,
        presented_uid: str | None = None,
        presented_ed: bytes | None = None,
    ):
        """One person at the registration desk. Returns their receipt."""
        self._require_phase(PHASE_REGISTRATION)
        subject = self.world.subjects[subject_id]
        uid = subject.uid if presented_uid is None else presented_uid
        photo_pre = self.world.capture(subject_id, ENV_PRE_REGISTRATION)

        if not self.world.owns_uid(photo_pre, uid):
            return RegReject(uid, photo_pre)

        if uid in self.uid_rows:
            return self._register_duplicate(uid, photo_pre)

        photo_reg = self.world.capture(subject_id, ENV_REGISTRATION)
        if not self.world.live(photo_reg, ENV_REGISTRATION):
            raise ProtocolError("desk camera produced a non-live capture")
        if presented_ed is None:
            presented_ed = subject.eligibility[0] if subject.eligibility else b""

        stream = self.master.child(f"reg/{uid}")
        vid = self._fresh_vid(stream.child("vid"))
        block = subject_id % self.config.n_blocks

        c_vid, r_vid, el_vid = self._encrypt_payload(
            vid_payload(vid), stream.child("c-vid")
        )
        c_block, r_block, el_block = self._encrypt_payload(
            block_payload(block), stream.child("c-block")
        )
        c_ed, r_ed, el_ed = self._encrypt_payload(
            ed_payload(presented_ed), stream.child("c-ed")
        )
        c_photo, r_photo, el_photo = self._encrypt_payload(
            photo_payload(photo_reg), stream.child("c-photo")
        )

        if not self.config.issue_receipts:
            # statistical harness mode: the board row is all that matters,
            # so skip the receipt ciphertexts and proofs entirely
            row, _ = self.board.append(
                SECTION_REGISTRATIONS,
                ErrEntry(uid, c_vid, c_block, c_ed, c_photo).to_bytes(),
            )
            self.uid_rows[uid] = row
            self.used_vids.add(vid)
            return None

        s_vid, t_vid = encrypt(self.group, self.jpk.pk, el_vid, stream.child("s-vid"))
        s_block, t_block = encrypt(
            self.group, self.jpk.pk, el_block, stream.child("s-block")
        )
        s_ed, t_ed = encrypt(self.group, self.jpk.pk, el_ed, stream.child("s-ed"))

        ctx = self._receipt_ctx()
        rho_enc1 = prove_enc_knowledge(
            self.group,
            self.jpk.pk,
            [(el_photo, c_photo.as_pair(), r_photo)],
            stream.child("enc1"),
            context=ctx,
        )
        rho_enc2 = prove_enc_knowledge(
            self.group,
            self.jpk.pk,
            [
                (el_vid, s_vid.as_pair(), t_vid),
                (el_block, s_block.as_pair(), t_block),
                (el_ed, s_ed.as_pair(), t_ed),
            ],
            stream.child("enc2"),
            context=ctx,
        )
        order = self.group.order
        rho_eq = prove_plaintext_eq(
            self.group,
            self.jpk.pk,
            [
                (c_vid.as_pair(), s_vid.as_pair()),
                (c_block.as_pair(), s_block.as_pair()),
                (c_ed.as_pair(), s_ed.as_pair()),
            ],
            [
                (r_vid - t_vid) % order,
                (r_block - t_block) % order,
                (r_ed - t_ed) % order,
            ],
            stream.child("eq"),
            context=ctx,
        )
        eq_bytes = rho_eq.to_bytes(self.group)
        pad = stream.child("pad").take(len(eq_bytes))

        row, _ = self.board.append(
            SECTION_REGISTRATIONS,
            ErrEntry(uid, c_vid, c_block, c_ed, c_photo).to_bytes(),
        )
        self.uid_rows[uid] = row
        self.used_vids.add(vid)

        receipt = RegAccept(
            uid=uid,
            photo_reg=photo_reg,
            rho_enc1=rho_enc1,
            row_cts=(c_vid, c_block, c_ed, c_photo),
            rho_eq_first=pad,
            vid=vid,
            block=block,
            ed=presented_ed,
            rho_enc2=rho_enc2,
            star_cts=(s_vid, s_block, s_ed),
            rho_eq_second=xor_bytes(pad, eq_bytes),
            err_row=row,
        )
        if self.config.check_receipts and not check_accept_receipt(
            self, receipt, photo_pre=photo_pre, expected_ed=presented_ed
        ):
            raise ProtocolError("issued receipt failed the voter-side check")
        self.reg_receipts[uid] = receipt
        return receipt

    def _register_duplicate(self, uid: str, photo_pre: PhotoToken) -> RegDupReg:
        row = self.uid_rows[uid]
        entry = ErrEntry.from_bytes(
            self.group, self.board.entry(SECTION_REGISTRATIONS, row)
        )
        element, _ = threshold_decrypt(
            self.group,
            self.jpk,
            self.trustees,
            entry.c_photo,
            self.master.child(f"dupreg/{uid}"),
            context=self.context,
            prove=False,
            verify=False,
        )
        # The check decode stays with the desk; the release decode is what
        # hands the photo to the person. Order matters: match first.
        payload = self.registry.decode(
            self.board,
            element,
            purpose=PURPOSE_DUPREG_CHECK,
            recipient="ro",
            section=SECTION_REGISTRATIONS,
            row=row,
            column="photo",
        )
        photo_prior = parse_photo(payload)
        if not self.world.match(photo_prior, photo_pre):
            # owns_uid passed and identifiers are unique, so the registered
            # photo can only be this person; anything else is a broken world.
            raise ProtocolError("registered photo does not match the holder")
        self.registry.decode(
            self.board,
            element,
            purpose=PURPOSE_DUPREG_RELEASE,
            recipient="voter",
            section=SECTION_REGISTRATIONS,
            row=row,
            column="photo",
        )
        return RegDupReg(photo_pre, photo_prior)

    # -- roll preparation -------------------------------------------------------

    def prepare_roll(self) -> None:
        """Mix the registration columns, open ids and blocks, screen rows."""
        self._require_phase(PHASE_REGISTRATION)
        entries = self.err_entries()
        n = len(entries)
        if n == 0:
            self.board.append(
                SECTION_META, MetaEvent("roll-empty", b"").to_bytes()
            )
            self.phase = PHASE_CASTING
            return

        columns = [
            [e.c_vid for e in entries],
            [e.c_block for e in entries],
            [e.c_ed for e in entries],
            [e.c_photo for e in entries],
        ]
        current = columns
        steps = []
        for server in range(1, self.config.kappa + 1):
            step = shuffle_step(
                self.group,
                self.jpk.pk,
                current,
                self.master.child(f"mix/{server}"),
                server_index=server,
                context=self.context,
            )
            steps.append(step)
            self.board.append(SECTION_MIX, step_to_bytes(self.group, step))
            current = [list(col) for col in step.outputs]
        if self.config.verify_mix_inline and not verify_shuffle(
            self.group,
            self.jpk.pk,
            columns,
            steps,
            context=self.context,
            expected_servers=self.config.kappa,
        ):
            raise ProtocolError("mix chain failed verification before opening")

        opened = []
        for i in range(n):
            # vid/block bundles are posted and batch-verified by the roll
            # audit; ed/photo openings stay with the eligibility desk and
            # are consumed here, so they carry no proofs at all
            el_vid, vid_shares = threshold_decrypt(
                self.group,
                self.jpk,
                self.trustees,
                current[0][i],
                self.master.child(f"open/vid/{i}"),
                context=self.context,
                verify=False,
            )
            vid = parse_vid(
                self.registry.decode(
                    self.board,
                    el_vid,
                    purpose=PURPOSE_ROLL_PUBLIC,
                    recipient="public",
                    section=SECTION_ROLL,
                    row=i,
                    column="vid",
                )
            )
            el_block, block_shares = threshold_decrypt(
                self.group,
                self.jpk,
                self.trustees,
                current[1][i],
                self.master.child(f"open/block/{i}"),
                context=self.context,
                verify=False,
            )
            block = parse_block(
                self.registry.decode(
                    self.board,
                    el_block,
                    purpose=PURPOSE_ROLL_PUBLIC,
                    recipient="public",
                    section=SECTION_ROLL,
                    row=i,
                    column="block",
                )
            )
            el_ed, _ = threshold_decrypt(
                self.group,
                self.jpk,
                self.trustees,
                current[2][i],
                self.master.child(f"open/ed/{i}"),
                context=self.context,
                prove=False,
                verify=False,
            )
            ed = parse_ed(
                self.registry.decode(
                    self.board,
                    el_ed,
                    purpose=PURPOSE_ROLL_EO,
                    recipient="eo",
                    section=SECTION_ROLL,
                    row=i,
                    column="ed",
                )
            )
            el_photo, _ = threshold_decrypt(
                self.group,
                self.jpk,
                self.trustees,
                current[3][i],
                self.master.child(f"open/photo/{i}"),
                context=self.context,
                prove=False,
                verify=False,
            )
            photo = parse_photo(
                self.registry.decode(
                    self.board,
                    el_photo,
                    purpose=PURPOSE_ROLL_EO,
                    recipient="eo",
                    section=SECTION_ROLL,
                    row=i,
                    column="photo",
                )
            )
            resp = self.world.eligible(photo, ed)
            opened.append(
                {
                    "vid": vid,
                    "block": block,
                    "vid_shares": vid_shares,
                    "block_shares": block_shares,
                    "ed": ed,
                    "photo": photo,
                    "photo_element": el_photo,
                    "resp": resp,
                }
            )

        if len({o["vid"] for o in opened}) != n:
            raise ProtocolError("mixed roll ids are not pairwise distinct")

        assigned = 0
        for i, o in enumerate(opened):
            if o["resp"]:
                booth = assigned % self.config.n_booths
                assigned += 1
            else:
                booth = -1
            self.board.append(
                SECTION_ROLL,
                ErEntry(
                    current[0][i],
                    current[1][i],
                    current[2][i],
                    current[3][i],
                    o["vid"],
                    o["block"],
                    serialize_shares(self.group, o["vid_shares"]),
                    serialize_shares(self.group, o["block_shares"]),
                    o["resp"],
                    booth,
                ).to_bytes(),
            )
            self.roll_by_vid[o["vid"]] = i
            self.eo_rows.append(
                {
                    "photo": o["photo"],
                    "photo_element": o["photo_element"],
                    "ed": o["ed"],
                    "resp": o["resp"],
                    "booth": booth,
                }
            )
        self.board.append(SECTION_META, MetaEvent("roll-ready", b"").to_bytes())
        self.phase = PHASE_CASTING

    # -- casting ------------------------------------------------------------

    def cast(self, subject_id: int, claimed_vid: str):
        """One person at a booth claiming a roll id. Returns their receipt."""
        self._require_phase(PHASE_CASTING)
        photo_pre = self.world.capture(subject_id, ENV_PRE_CASTING)

        row = self.roll_by_vid.get(claimed_vid)
        if row is None:
            receipt = CastUnknownVid(claimed_vid)
            self.cast_receipts.append(receipt)
            return receipt
        er = self.er_entries()[row]
        eo = self.eo_rows[row]

        # the booth officer pulls the registered photo for the row
        photo_reg = parse_photo(
            self.registry.decode(
                self.board,
                eo["photo_element"],
                purpose=PURPOSE_CAST_PO,
                recipient=f"po/{max(er.booth, 0)}",
                section=SECTION_ROLL,
                row=row,
                column="photo",
            )
        )
        if not self.world.match(photo_pre, photo_reg):
            receipt = CastWrongPerson(claimed_vid, photo_pre)
            self.cast_receipts.append(receipt)
            return receipt

        if er.resp == 0:
            el_ed, shares = threshold_decrypt(
                self.group,
                self.jpk,
                self.trustees,
                er.c_ed,
                self.master.child(f"inel/{row}"),
                context=self.context,
            )
            ed_opened = parse_ed(
                self.registry.decode(
                    self.board,
                    el_ed,
                    purpose=PURPOSE_CAST_INELIGIBLE,
                    recipient="public",
                    section=SECTION_ROLL,
                    row=row,
                    column="ed",
                )
            )
            receipt = CastIneligible(
                claimed_vid,
                row,
                photo_pre,
                ed_opened,
                serialize_shares(self.group, shares),
            )
            self.cast_receipts.append(receipt)
            return receipt

        if row in self.po_cast:
            photo_cast = self.world.capture(subject_id, ENV_CASTING)
            if not self.world.live(photo_cast, ENV_CASTING):
                raise ProtocolError("booth camera produced a non-live capture")
            receipt = CastDupCast(photo_pre, photo_cast)
            self.cast_receipts.append(receipt)
            return receipt

        photo_cast = self.world.capture(subject_id, ENV_CASTING)
        if not self.world.live(photo_cast, ENV_CASTING):
            raise ProtocolError("booth camera produced a non-live capture")
        stream = self.master.child(f"cast/{row}")
        vote = stub_cast(
            self.group, self.jpk.pk, stream.child("choice").take(8), stream.child("vote")
        )
        ballot_bytes = vote.ballot.to_bytes()
        c_photo_cast, _, _ = self._encrypt_payload(
            photo_payload(photo_cast), stream.child("ci-photo")
        )
        c_validity, _, _ = self._encrypt_payload(
            validity_payload(vote.transcript), stream.child("ci-validity")
        )
        self.board.append(
            SECTION_CAST_INFO,
            CastInfoEntry(row, c_photo_cast, c_validity).to_bytes(),
        )
        self.board.append(SECTION_VOTES, VoteEntry(claimed_vid, ballot_bytes).to_bytes())
        self.po_cast[row] = ballot_bytes
        receipt = CastAccept(claimed_vid, row, ballot_bytes)
        self.cast_receipts.append(receipt)
        return receipt

    def mask_abstentions(self, rows=None) -> int:
        """Optional cover fill DURING casting: dummy cast-info entries for
        not-yet-voted rows, so the board never shows who has voted so far.
        A later real cast simply appends a newer entry for the row."""
        self._require_phase(PHASE_CASTING)
        count = 0
        for row, eo in enumerate(self.eo_rows):
            if eo["resp"] != 1 or row in self.po_cast or row in self.dummy_fill_rows:
                continue
            if rows is not None and row not in rows:
                continue
            self._append_dummy_ci(row)
            count += 1
        return count

    def _append_dummy_ci(self, row: int) -> None:
        stream = self.master.child(f"fill/{row}")
        fake_token = stream.child("photo").take(_dummy_token_width())
        dummy_photo = encode("pl-photo/v1", fake_token)
        dummy_validity = validity_payload(
            stream.child("validity").take(stub_transcript_size(self.group))
        )
        c_photo, _, _ = self._encrypt_payload(dummy_photo, stream.child("ci-photo"))
        c_validity, _, _ = self._encrypt_payload(
            dummy_validity, stream.child("ci-validity")
        )
        self.board.append(
            SECTION_CAST_INFO, CastInfoEntry(row, c_photo, c_validity).to_bytes()
        )
        self.dummy_fill_rows.add(row)

    def close_polls(self) -> None:
        """Fill cast-info and a dummy ballot for every eligible row that
        never cast, then close. After this, neither the cast-info section
        nor the ballot section says who showed up."""
        self._require_phase(PHASE_CASTING)
        for row, eo in enumerate(self.eo_rows):
            if eo["resp"] != 1:
                continue
            if row not in self.po_cast and row not in self.dummy_fill_rows:
                self._append_dummy_ci(row)
            if row not in self.po_cast:
                stream = self.master.child(f"fill-ev/{row}")
                filler = stub_dummy(self.group, self.jpk.pk, stream)
                vid = self.er_entries()[row].vid
                self.board.append(
                    SECTION_VOTES,
                    VoteEntry(vid, filler.ballot.to_bytes()).to_bytes(),
                )
        self.board.append(SECTION_META, MetaEvent("closed", b"").to_bytes())
        self.phase = PHASE_CLOSED

    # -- extensions -----------------------------------------------------------

    def recover_vid(self, subject_id: int, experimental: bool = False):
        """Look up a forgotten roll id by photo. Experimental: the lookup
        gives the desk a photo-to-roll-id link, so it is off by default."""
        if not experimental:
            raise ProtocolError(
                "roll-id recovery is an experimental extension; "
                "pass experimental=True to acknowledge the privacy cost"
            )
        self._require_phase(PHASE_CASTING, PHASE_CLOSED)
        photo = self.world.capture(subject_id, ENV_PRE_CASTING)
        for row, eo in enumerate(self.eo_rows):
            if self.world.match(photo, eo["photo"]):
                return self.er_entries()[row].vid
        return None


def _dummy_token_width() -> int:
    sample = PhotoToken(ENV_CASTING, b"\x00" * 16, b"\x00" * 8, b"\x00" * 16)
    return len(sample.to_bytes())


def setup(config: ElectionConfig, world: World) -> Election:
    return Election(config, world)


# ---------------------------------------------------------------------------
# voter-side receipt check


def check_accept_receipt(
    election: Election,
    receipt: RegAccept,
    photo_pre: PhotoToken | None = None,
    expected_ed: bytes | None = None,
) -> bool:
    """What the voter checks before leaving the desk: the printed photo is
    them, the roll-side plaintexts are right, all three proofs verify, and
    the board row is exactly the ciphertexts on the receipt."""
    group = election.group
    pk = election.jpk.pk
    ctx = election._receipt_ctx()
    cfg = election.config
    if photo_pre is not None and not election.world.match(
        receipt.photo_reg, photo_pre
    ):
        return False
    if expected_ed is not None and receipt.ed != expected_ed:
        return False
    if len(receipt.vid) != cfg.vid_digits or not receipt.vid.isdigit():
        return False
    if not 0 <= receipt.block < cfg.n_blocks:
        return False
    el_photo = payload_element(group, photo_payload(receipt.photo_reg))
    if not verify_enc_knowledge(
        group,
        pk,
        [(el_photo, receipt.row_cts[3].as_pair())],
        receipt.rho_enc1,
        context=ctx,
    ):
        return False
    plain_elements = [
        payload_element(group, vid_payload(receipt.vid)),
        payload_element(group, block_payload(receipt.block)),
        payload_element(group, ed_payload(receipt.ed)),
    ]
    if not verify_enc_knowledge(
        group,
        pk,
        [
            (el, ct.as_pair())
            for el, ct in zip(plain_elements, receipt.star_cts)
        ],
        receipt.rho_enc2,
        context=ctx,
    ):
        return False
    if len(receipt.rho_eq_first) != len(receipt.rho_eq_second):
        return False
    eq_bytes = xor_bytes(receipt.rho_eq_first, receipt.rho_eq_second)
    pairs = [
        (receipt.row_cts[k].as_pair(), receipt.star_cts[k].as_pair())
        for k in range(3)
    ]
    if not verify_plaintext_eq_bytes(group, pk, pairs, eq_bytes, context=ctx):
        return False
    board = election.board
    if not 0 <= receipt.err_row < board.size(SECTION_REGISTRATIONS):
        return False
    try:
        entry = ErrEntry.from_bytes(
            group, board.entry(SECTION_REGISTRATIONS, receipt.err_row)
        )
    except DecodeError:
        return False
    if entry.uid != receipt.uid or entry.columns() != receipt.row_cts:
        return False
    return True


def accept_receipt_sizes(group: PrimeOrderGroup, receipt: RegAccept) -> tuple[int, int]:
    """(total serialized size, photo bytes inside it)."""
    total = len(receipt.to_bytes(group))
    return total, len(receipt.photo_reg.to_bytes())
