"""Receipt audits and the universal post-close audit.

Individual audits take one receipt and re-check the story it tells,
using only what the receipt itself disclosures plus public board data
and identity-oracle queries the disputing person can demonstrate in
front of the auditor. For accepted registrations the auditor flips a
three-way coin and sees exactly one quadrant pair, never both plaintext
quadrants of the same receipt.

The universal audit replays the whole board: structure, a sampled
identity check over the registration section, the mix chain with every
posted opening, and a sampled cast-consistency check over the roll.
Sampling is seeded from the final board digest, so the sample is fixed
only once the board is.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .board import (
    Board,
    CastInfoEntry,
    ErEntry,
    ErrEntry,
    SECTION_CAST_INFO,
    SECTION_MIX,
    SECTION_REGISTRATIONS,
    SECTION_ROLL,
    SECTION_VOTES,
    VoteEntry,
    select_h_alpha,
)
from .elgamal import (
    batch_verify_decryption,
    deserialize_shares,
    threshold_decrypt,
    verify_decryption,
)
from .encoding import DecodeError, encode
from .group import GroupError
from .oracles import ENV_CASTING, ENV_REGISTRATION
from .proofs import verify_enc_knowledge, verify_plaintext_eq_bytes
from .protocol import (
    CastAccept,
    CastDupCast,
    CastIneligible,
    CastUnknownVid,
    CastWrongPerson,
    Election,
    RegAccept,
    RegDupReg,
    RegReject,
    parse_ed,
    parse_photo,
    parse_validity,
    payload_element,
    block_payload,
    ed_payload,
    photo_payload,
    stub_valid,
    vid_payload,
)
from .randomness import SeedStream

PURPOSE_AUDIT_ERR = "audit-err"
PURPOSE_AUDIT_ER = "audit-er"
PURPOSE_AUDIT_CAST = "audit-cast"

QUAD_IDENTITY_PLAIN = "identity-plain"
QUAD_IDENTITY_CIPHER = "identity-cipher"
QUAD_ROLL_PLAIN = "roll-plain"
QUAD_ROLL_CIPHER = "roll-cipher"

_BETA_QUADRANTS = {
    0: (QUAD_IDENTITY_PLAIN, QUAD_IDENTITY_CIPHER),
    1: (QUAD_ROLL_PLAIN, QUAD_ROLL_CIPHER),
    2: (QUAD_IDENTITY_CIPHER, QUAD_ROLL_CIPHER),
}


@dataclass(frozen=True)
class Disclosure:
    """What one audit transcript revealed about one receipt."""

    receipt_id: bytes
    quadrants: tuple


@dataclass
class AuditReport:
    verdict: int
    kind: str
    beta: int | None = None
    disclosure: Disclosure | None = None
    reasons: list = field(default_factory=list)

    def fail(self, reason: str) -> None:
        self.verdict = 0
        self.reasons.append(reason)


def receipt_id(group, receipt) -> bytes:
    return hashlib.sha256(receipt.to_bytes(group)).digest()


# ---------------------------------------------------------------------------
# individual registration audit


def ind_reg_audit(
    election: Election,
    receipt,
    beta: int | None = None,
    stream: SeedStream | None = None,
) -> AuditReport:
    """Re-check one registration receipt. ``beta`` forces the coin."""
    if isinstance(receipt, RegReject):
        report = AuditReport(1, receipt.kind)
        # a rejection is proper iff the person indeed does not own the id
        if election.world.owns_uid(receipt.photo_pre, receipt.uid):
            report.fail("rejected person owns the presented identifier")
        return report

    if isinstance(receipt, RegDupReg):
        report = AuditReport(1, receipt.kind)
        if not election.world.match(receipt.photo_pre, receipt.photo_prior):
            report.fail("released prior photo is of someone else")
        return report

    if not isinstance(receipt, RegAccept):
        raise TypeError(f"not a registration receipt: {receipt!r}")

    if beta is None:
        if stream is None:
            stream = SeedStream.from_seed(election.board.digest, "reg-audit-coin")
        beta = stream.integer_below(3)
    if beta not in _BETA_QUADRANTS:
        raise ValueError("the audit coin has three sides")

    report = AuditReport(
        1,
        receipt.kind,
        beta=beta,
        disclosure=Disclosure(
            receipt_id(election.group, receipt), _BETA_QUADRANTS[beta]
        ),
    )
    group = election.group
    pk = election.jpk.pk
    ctx = election._receipt_ctx()

    if beta == 0:
        # identity side: the row is on the board verbatim, the photo proof
        # verifies, and the pictured person owns the identifier.
        board = election.board
        if not 0 <= receipt.err_row < board.size(SECTION_REGISTRATIONS):
            report.fail("receipt points outside the registration section")
            return report
        try:
            entry = ErrEntry.from_bytes(
                group, board.entry(SECTION_REGISTRATIONS, receipt.err_row)
            )
        except DecodeError:
            report.fail("referenced registration row does not parse")
            return report
        if entry.uid != receipt.uid or entry.columns() != receipt.row_cts:
            report.fail("receipt row differs from the posted row")
        el_photo = payload_element(group, photo_payload(receipt.photo_reg))
        if not verify_enc_knowledge(
            group,
            pk,
            [(el_photo, receipt.row_cts[3].as_pair())],
            receipt.rho_enc1,
            context=ctx,
        ):
            report.fail("photo encryption proof fails")
        if not election.world.owns_uid(receipt.photo_reg, receipt.uid):
            report.fail("pictured person does not own the identifier")
        if not election.world.live(receipt.photo_reg, ENV_REGISTRATION):
            report.fail("registration photo is not a live desk capture")
        return report

    if beta == 1:
        # roll side: the printed roll entry matches its fresh ciphertexts
        cfg = election.config
        if len(receipt.vid) != cfg.vid_digits or not receipt.vid.isdigit():
            report.fail("roll id has the wrong shape")
        if not 0 <= receipt.block < cfg.n_blocks:
            report.fail("block out of range")
        elements = [
            payload_element(group, vid_payload(receipt.vid)),
            payload_element(group, block_payload(receipt.block)),
            payload_element(group, ed_payload(receipt.ed)),
        ]
        if not verify_enc_knowledge(
            group,
            pk,
            [(el, ct.as_pair()) for el, ct in zip(elements, receipt.star_cts)],
            receipt.rho_enc2,
            context=ctx,
        ):
            report.fail("roll-side encryption proof fails")
        return report

    # beta == 2: the two cipher quadrants must encrypt the same triple
    if len(receipt.rho_eq_first) != len(receipt.rho_eq_second):
        report.fail("equality proof halves have different lengths")
        return report
    eq_bytes = bytes(
        a ^ b for a, b in zip(receipt.rho_eq_first, receipt.rho_eq_second)
    )
    pairs = [
        (receipt.row_cts[k].as_pair(), receipt.star_cts[k].as_pair())
        for k in range(3)
    ]
    if not verify_plaintext_eq_bytes(group, pk, pairs, eq_bytes, context=ctx):
        report.fail("cross-quadrant equality proof fails")
    # the board half must actually be board data
    posted = {
        tuple(ct.to_bytes() for ct in ErrEntry.from_bytes(group, raw).columns())
        for raw in election.board.entries(SECTION_REGISTRATIONS)
    }
    if tuple(ct.to_bytes() for ct in receipt.row_cts) not in posted:
        report.fail("cipher quadrant does not appear on the board")
    return report


# ---------------------------------------------------------------------------
# individual cast audit


def ind_cast_audit(election: Election, receipt) -> AuditReport:
    """Re-check one cast receipt against the closed board."""
    world = election.world
    entries = election.er_entries()
    by_vid = {e.vid: i for i, e in enumerate(entries)}

    if isinstance(receipt, CastUnknownVid):
        report = AuditReport(1, receipt.kind)
        if receipt.vid in by_vid:
            report.fail("rejected roll id is on the roll")
        return report

    if isinstance(receipt, CastWrongPerson):
        report = AuditReport(1, receipt.kind)
        row = by_vid.get(receipt.vid)
        if row is None:
            report.fail("receipt names a roll id that does not exist")
            return report
        photo_reg = parse_photo(
            election.registry.decode(
                election.board,
                election.eo_rows[row]["photo_element"],
                purpose=PURPOSE_AUDIT_CAST,
                recipient="auditor",
                section=SECTION_ROLL,
                row=row,
                column="photo",
            )
        )
        if world.match(receipt.photo_pre, photo_reg):
            report.fail("claimant matches the registered photo after all")
        return report

    if isinstance(receipt, CastIneligible):
        report = AuditReport(1, receipt.kind)
        row = by_vid.get(receipt.vid)
        if row is None or row != receipt.row:
            report.fail("receipt row and roll id disagree")
            return report
        er = entries[row]
        if er.resp != 0:
            report.fail("row was screened eligible")
        try:
            shares = deserialize_shares(election.group, receipt.shares)
        except (DecodeError, GroupError, ValueError):
            report.fail("opening shares do not parse")
            return report
        element = payload_element(election.group, ed_payload(receipt.ed_opened))
        if not verify_decryption(
            election.group,
            election.jpk,
            er.c_ed,
            element,
            shares,
            context=election.context,
        ):
            report.fail("opened record does not match the row ciphertext")
        if world.eligible(receipt.photo_pre, receipt.ed_opened):
            report.fail("person is eligible under the opened record")
        return report

    if isinstance(receipt, CastDupCast):
        report = AuditReport(1, receipt.kind)
        if not world.match(receipt.photo_pre, receipt.photo_cast):
            report.fail("booth capture is of a different person")
        if not world.live(receipt.photo_cast, ENV_CASTING):
            report.fail("booth capture is not live")
        return report

    if isinstance(receipt, CastAccept):
        report = AuditReport(1, receipt.kind)
        row = by_vid.get(receipt.vid)
        if row is None or row != receipt.row:
            report.fail("accepted roll id is not on the roll at that row")
            return report
        votes = election.votes_by_vid()
        if votes.get(receipt.vid) != receipt.ballot:
            report.fail("posted ballot differs from the receipt ballot")
        return report

    raise TypeError(f"not a cast receipt: {receipt!r}")


# ---------------------------------------------------------------------------
# universal audit


@dataclass
class UnivReport:
    verdict: int
    reasons: list = field(default_factory=list)
    err_sample: list = field(default_factory=list)
    er_sample: list = field(default_factory=list)
    checked_votes: int = 0

    def fail(self, reason: str) -> None:
        self.verdict = 0
        self.reasons.append(reason)


def univ_audit(election: Election, alpha: int | None = None) -> UnivReport:
    """Replay the closed board: structure, sampled identity checks, the
    mix chain with all openings, sampled cast-consistency checks."""
    report = UnivReport(1)
    group = election.group
    board = election.board
    world = election.world
    if alpha is None:
        alpha = election.config.alpha

    # structure
    if board.replay_digest() != board.digest:
        report.fail("board digest chain does not replay")
        return report
    try:
        err_entries = [
            ErrEntry.from_bytes(group, raw)
            for raw in board.entries(SECTION_REGISTRATIONS)
        ]
        er_entries = [
            ErEntry.from_bytes(group, raw) for raw in board.entries(SECTION_ROLL)
        ]
        vote_entries = [
            VoteEntry.from_bytes(raw) for raw in board.entries(SECTION_VOTES)
        ]
        ci_entries = [
            CastInfoEntry.from_bytes(group, raw)
            for raw in board.entries(SECTION_CAST_INFO)
        ]
    except DecodeError as exc:
        report.fail(f"board record does not parse: {exc}")
        return report

    n = len(err_entries)
    uids = [e.uid for e in err_entries]
    if len(set(uids)) != n:
        report.fail("registration identifiers are not pairwise distinct")
    if len(er_entries) != n:
        report.fail("roll and registration sections differ in length")
    if n == 0:
        return report

    # registration sample: the pictured person owns the row's identifier
    err_rows = select_h_alpha(board.digest, n, alpha, label="univ/err")
    report.err_sample = list(err_rows)
    for row in err_rows:
        entry = err_entries[row]
        element, _ = threshold_decrypt(
            group,
            election.jpk,
            election.trustees,
            entry.c_photo,
            election.master.child(f"audit/err/{row}"),
            context=election.context,
        )
        try:
            photo = parse_photo(
                election.registry.decode(
                    board,
                    element,
                    purpose=PURPOSE_AUDIT_ERR,
                    recipient="auditor",
                    section=SECTION_REGISTRATIONS,
                    row=row,
                    column="photo",
                )
            )
        except (KeyError, DecodeError):
            report.fail(f"registration row {row}: photo column is not decodable")
            continue
        if not world.owns_uid(photo, entry.uid):
            report.fail(f"registration row {row}: photo does not own the identifier")
        if not world.live(photo, ENV_REGISTRATION):
            report.fail(f"registration row {row}: photo is not a live desk capture")

    # mix chain and posted openings
    from .shuffle import step_from_bytes, verify_shuffle

    try:
        steps = [
            step_from_bytes(group, raw) for raw in board.entries(SECTION_MIX)
        ]
    except (DecodeError, GroupError, ValueError):
        report.fail("mix record does not parse")
        return report
    initial = [
        [e.c_vid for e in err_entries],
        [e.c_block for e in err_entries],
        [e.c_ed for e in err_entries],
        [e.c_photo for e in err_entries],
    ]
    if not verify_shuffle(
        group,
        election.jpk.pk,
        initial,
        steps,
        context=election.context,
        expected_servers=election.config.kappa,
    ):
        report.fail("mix chain fails verification")
        return report
    final = steps[-1].outputs
    opening_checks = []
    for i, er in enumerate(er_entries):
        if er.columns() != tuple(col[i] for col in final):
            report.fail(f"roll row {i} does not carry the mix output")
            continue
        try:
            vid_shares = deserialize_shares(group, er.vid_shares)
            block_shares = deserialize_shares(group, er.block_shares)
        except (DecodeError, GroupError, ValueError):
            report.fail(f"roll row {i}: opening shares do not parse")
            continue
        opening_checks.append(
            (er.c_vid, payload_element(group, vid_payload(er.vid)), vid_shares)
        )
        opening_checks.append(
            (
                er.c_block,
                payload_element(group, block_payload(er.block)),
                block_shares,
            )
        )
    if report.verdict and not batch_verify_decryption(
        group, election.jpk, opening_checks, context=election.context
    ):
        report.fail("posted roll openings fail verification")
    vids = [e.vid for e in er_entries]
    if len(set(vids)) != len(vids):
        report.fail("roll ids are not pairwise distinct")

    # vote and cast-info shape
    resp1 = [i for i, e in enumerate(er_entries) if e.resp == 1]
    resp1_set = set(resp1)
    row_by_vid = {e.vid: i for i, e in enumerate(er_entries)}
    votes: dict[str, bytes] = {}
    for entry in vote_entries:
        if entry.vid in votes:
            report.fail(f"two posted ballots for roll id {entry.vid}")
        row = row_by_vid.get(entry.vid)
        if row is None:
            report.fail("posted ballot names an unknown roll id")
        elif er_entries[row].resp != 1:
            report.fail("posted ballot for a row screened ineligible")
        votes[entry.vid] = entry.ev
    ci_latest: dict[int, CastInfoEntry] = {}
    for entry in ci_entries:
        if entry.row not in resp1_set:
            report.fail(f"cast-info for row {entry.row}, which is not eligible")
        ci_latest[entry.row] = entry
    if election.phase == "closed":
        missing = resp1_set - set(ci_latest)
        if missing:
            report.fail(f"rows {sorted(missing)} have no cast-info after close")
        bare = [
            i for i in resp1 if er_entries[i].vid not in votes
        ]
        if bare:
            report.fail(f"rows {bare} have no posted ballot after close")
    report.checked_votes = len(votes)

    # roll sample: whoever the row's ballot says voted must be the
    # registered person, live in the booth, and eligible
    if resp1:
        picks = select_h_alpha(board.digest, len(resp1), alpha, label="univ/er")
        rows = [resp1[k] for k in picks]
        report.er_sample = rows
        for row in rows:
            er = er_entries[row]
            photo_reg, ed = _open_roll_row(election, report, row, er)
            if photo_reg is None:
                continue
            if not world.eligible(photo_reg, ed):
                report.fail(f"roll row {row}: registered person is not eligible")
            ci = ci_latest.get(row)
            if ci is None:
                continue
            photo_cast, transcript = _open_cast_info(election, report, row, ci)
            if transcript is None:
                continue
            if not stub_valid(group, transcript, votes.get(er.vid)):
                continue  # filler entry, nothing was cast
            try:
                cast_token = parse_photo(photo_cast)
            except DecodeError:
                report.fail(f"roll row {row}: cast photo does not parse")
                continue
            if not world.match(cast_token, photo_reg):
                report.fail(f"roll row {row}: caster is not the registrant")
            if not world.live(cast_token, ENV_CASTING):
                report.fail(f"roll row {row}: cast capture is not live")
    return report


def _open_roll_row(election: Election, report: UnivReport, row: int, er: ErEntry):
    """Auditor-side opening of a roll row's photo and record columns."""
    group = election.group
    out = []
    for ct, column, tag in (
        (er.c_photo, "photo", "photo"),
        (er.c_ed, "ed", "ed"),
    ):
        element, _ = threshold_decrypt(
            group,
            election.jpk,
            election.trustees,
            ct,
            election.master.child(f"audit/er/{row}/{tag}"),
            context=election.context,
        )
        try:
            out.append(
                election.registry.decode(
                    election.board,
                    element,
                    purpose=PURPOSE_AUDIT_ER,
                    recipient="auditor",
                    section=SECTION_ROLL,
                    row=row,
                    column=column,
                )
            )
        except KeyError:
            report.fail(f"roll row {row}: {column} column is not decodable")
            return None, None
    try:
        return parse_photo(out[0]), parse_ed(out[1])
    except DecodeError:
        report.fail(f"roll row {row}: opened columns do not parse")
        return None, None


def _open_cast_info(
    election: Election, report: UnivReport, row: int, ci: CastInfoEntry
):
    group = election.group
    out = []
    for ct, column in ((ci.c_photo_cast, "photo-cast"), (ci.c_validity, "validity")):
        element, _ = threshold_decrypt(
            group,
            election.jpk,
            election.trustees,
            ct,
            election.master.child(f"audit/ci/{row}/{column}"),
            context=election.context,
        )
        try:
            out.append(
                election.registry.decode(
                    election.board,
                    element,
                    purpose=PURPOSE_AUDIT_ER,
                    recipient="auditor",
                    section=SECTION_CAST_INFO,
                    row=row,
                    column=column,
                )
            )
        except KeyError:
            report.fail(f"roll row {row}: cast {column} column is not decodable")
            return None, None
    try:
        return out[0], parse_validity(out[1])
    except DecodeError:
        report.fail(f"roll row {row}: cast columns do not parse")
        return None, None
