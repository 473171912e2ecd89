"""Adversary scenarios and statistical trials against the audits.

Each scenario builds a fresh world and election, lets a corrupted actor
inject its fraud through the same data structures the honest actors use,
runs the relevant audit, and reports whether the fraud was caught. The
statistical runners repeat a scenario over many independent worlds and
compare the empirical detection rate with the closed-form escape
probability from the risk module.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .audits import (
    Disclosure,
    ind_cast_audit,
    ind_reg_audit,
    univ_audit,
)
from .board import (
    CastInfoEntry,
    ErrEntry,
    SECTION_CAST_INFO,
    SECTION_REGISTRATIONS,
    SECTION_ROLL,
    SECTION_VOTES,
    VoteEntry,
    decoded_rows,
)
from .elgamal import encrypt
from .encoding import encode
from .oracles import ENV_REGISTRATION, make_world
from .protocol import (
    CastAccept,
    CastDupCast,
    CastIneligible,
    CastUnknownVid,
    CastWrongPerson,
    Election,
    ElectionConfig,
    RegAccept,
    RegDupReg,
    RegReject,
    block_payload,
    ed_payload,
    photo_payload,
    stub_dummy,
    vid_payload,
)
from .randomness import SeedStream
from .risk import hyp
from .shuffle import shuffle_step, verify_shuffle


@dataclass
class TrialReport:
    """Outcome of a repeated-scenario run."""

    name: str
    trials: int
    detected: int
    oracle_rate: float
    tolerance: float
    elapsed: float = 0.0
    notes: list = field(default_factory=list)

    @property
    def rate(self) -> float:
        return self.detected / self.trials if self.trials else 0.0

    @property
    def passed(self) -> bool:
        return abs(self.rate - self.oracle_rate) <= self.tolerance

    def line(self) -> str:
        return (
            f"{self.name}: {self.detected}/{self.trials} detected "
            f"(rate {self.rate:.4f}, expected {self.oracle_rate:.4f} "
            f"+/- {self.tolerance}, {self.elapsed:.1f}s) -> "
            f"{'ok' if self.passed else 'MISMATCH'}"
        )


# ---------------------------------------------------------------------------
# corrupted-actor injections


def inject_phantom_rows(election: Election, donor_id: int, count: int, stream) -> list:
    """A corrupted desk appends registration rows for people who never
    showed up: fabricated identifiers behind a cooperating person's photo
    and record, so the rows screen as eligible votable entries."""
    donor = election.world.subjects[donor_id]
    if donor.honest:
        raise ValueError("the photo donor must be a cooperating subject")
    rows = []
    uid_stream = stream.child("uids")
    for k in range(count):
        while True:
            uid = f"fake-{int.from_bytes(uid_stream.take(6), 'big') % 10**9:09d}"
            if uid not in election.uid_rows:
                break
        photo = election.world.capture(donor_id, ENV_REGISTRATION, actor="adversary")
        ed = donor.eligibility[0]
        sub = stream.child(f"row/{k}")
        vid = election._fresh_vid(sub.child("vid"))
        election.used_vids.add(vid)
        c_vid, _, _ = election._encrypt_payload(vid_payload(vid), sub.child("vid-ct"))
        c_block, _, _ = election._encrypt_payload(
            block_payload(k % election.config.n_blocks), sub.child("block-ct")
        )
        c_ed, _, _ = election._encrypt_payload(ed_payload(ed), sub.child("ed-ct"))
        c_photo, _, _ = election._encrypt_payload(
            photo_payload(photo), sub.child("photo-ct")
        )
        row, _ = election.board.append(
            SECTION_REGISTRATIONS,
            ErrEntry(uid, c_vid, c_block, c_ed, c_photo).to_bytes(),
        )
        election.uid_rows[uid] = row
        rows.append(row)
    return rows


def forge_registration_receipt(
    election: Election, subject_id: int, fake_ed: bytes
) -> RegAccept:
    """A corrupted desk registers a person but posts a row whose record
    column encrypts ``fake_ed`` instead of what the person presented.

    The receipt is assembled to survive both plaintext-side checks: the
    posted row appears verbatim (identity side holds) and the roll side
    proves the printed, correct record. What cannot be produced is the
    cross-quadrant equality proof, so its halves are noise. Exactly one
    of the three audit coins exposes the forgery.
    """
    import dataclasses

    subject = election.world.subjects[subject_id]
    honest = election.register(subject_id)
    if not isinstance(honest, RegAccept):
        raise ValueError("forgery target must register cleanly")
    row = honest.err_row
    stream = election.master.child(f"forge/{subject.uid}")
    c_ed_fake, _, _ = election._encrypt_payload(
        ed_payload(fake_ed), stream.child("ed-ct")
    )
    entry = ErrEntry(
        honest.uid, honest.row_cts[0], honest.row_cts[1], c_ed_fake, honest.row_cts[3]
    )
    _rewrite_board_row(election, SECTION_REGISTRATIONS, row, entry.to_bytes())
    noise = stream.child("noise").take(len(honest.rho_eq_first))
    return dataclasses.replace(
        honest,
        row_cts=(honest.row_cts[0], honest.row_cts[1], c_ed_fake, honest.row_cts[3]),
        rho_eq_first=noise,
        rho_eq_second=stream.child("noise2").take(len(noise)),
    )


def _rewrite_board_row(election: Election, section: str, row: int, record: bytes):
    """Swap one record as a corrupted board writer would: republish the
    whole chain consistently. Content audits, not the digest, must catch it."""
    board = election.board
    board.sections[section][row] = record
    board._order = [
        (s, i, record if (s == section and i == row) else rec)
        for s, i, rec in board._order
    ]
    board.digest = board.replay_digest()


def post_second_ballot(election: Election, vid: str, stream) -> None:
    """A corrupted booth posts an extra ballot for an already-voted id."""
    filler = stub_dummy(election.group, election.jpk.pk, stream)
    election.board.append(
        SECTION_VOTES, VoteEntry(vid, filler.ballot.to_bytes()).to_bytes()
    )


# ---------------------------------------------------------------------------
# statistical runners


def run_phantom_trials(
    n_total: int,
    f: int,
    alpha: int,
    trials: int,
    seed: int = 1000,
    group_name: str = "modp64",
    kappa: int = 2,
    tolerance: float = 0.05,
) -> TrialReport:
    """Phantom registrations versus the universal audit.

    Each trial: n_total - f honest registrations, f phantom rows, the
    full roll pipeline, close, universal audit. Detection means the
    audit's verdict is 0. The escape probability is exactly the chance
    that the alpha-sample misses every phantom row; the server count
    never enters it, so the default stays at the smallest real chain."""
    start = time.time()
    detected = 0
    for t in range(trials):
        world = make_world(
            seed + 7919 * t, n_honest=n_total - f, n_dishonest=1, n_ineligible=0
        )
        config = ElectionConfig(
            seed=seed + 7919 * t + 1,
            group_name=group_name,
            kappa=kappa,
            alpha=alpha,
            board_id=f"phantom-{t}",
            check_receipts=False,
            verify_mix_inline=False,
            issue_receipts=False,
        )
        election = Election(config, world)
        for sid in range(1, n_total - f + 1):
            election.register(sid)
        donor = n_total - f + 1  # the one cooperating subject
        stream = SeedStream.from_seed(seed + 7919 * t + 2, "phantom")
        rows = inject_phantom_rows(election, donor, f, stream)
        assert len(rows) == f
        election.prepare_roll()
        election.close_polls()
        report = univ_audit(election)
        if report.verdict == 0:
            detected += 1
    oracle = 1.0 - hyp(n_total, alpha, f, 1)
    return TrialReport(
        "phantom-registrations",
        trials,
        detected,
        oracle,
        tolerance,
        time.time() - start,
    )


def run_receipt_forgery_draws(
    draws: int,
    seed: int = 2000,
    group_name: str = "modp64",
    kappa: int = 3,
    n_honest: int = 12,
    tolerance: float = 0.03,
) -> TrialReport:
    """One forged registration receipt, many independent audit coins.

    The forged record survives two of the three disclosure patterns, so
    the per-audit detection rate must converge to one third."""
    start = time.time()
    world = make_world(seed, n_honest=n_honest, n_dishonest=1, n_ineligible=0)
    config = ElectionConfig(
        seed=seed + 1,
        group_name=group_name,
        kappa=kappa,
        alpha=4,
        board_id="forged-receipt",
        check_receipts=False,
    )
    election = Election(config, world)
    for sid in range(1, n_honest):
        election.register(sid)
    forged = forge_registration_receipt(
        election, n_honest, fake_ed=b"record-of-someone-else"
    )
    coin = SeedStream.from_seed(seed + 2, "audit-coins")
    detected = 0
    for _ in range(draws):
        report = ind_reg_audit(election, forged, stream=coin)
        if report.verdict == 0:
            detected += 1
    return TrialReport(
        "forged-receipt-audit",
        draws,
        detected,
        1.0 / 3.0,
        tolerance,
        time.time() - start,
    )


def run_shuffle_tampers(
    flips: int = 100,
    seed: int = 3000,
    group_name: str = "modp64",
    n: int = 24,
    kappa: int = 3,
) -> TrialReport:
    """Random post-hoc tampering of a valid mix chain; every tampered
    chain must be rejected."""
    from .elgamal import keygen, reencrypt
    from .group import get_group

    start = time.time()
    group = get_group(group_name)
    stream = SeedStream.from_seed(seed, "shuffle-tamper")
    jpk, _ = keygen(group, kappa, stream.child("keys"))
    columns = [
        [
            encrypt(group, jpk.pk, group.hash_to_group(encode(c, i)), stream.child(f"m/{c}/{i}"))[0]
            for i in range(n)
        ]
        for c in range(4)
    ]
    detected = 0
    rng = stream.child("choices")
    for t in range(flips):
        current = columns
        steps = []
        for server in range(1, kappa + 1):
            step = shuffle_step(
                group,
                jpk.pk,
                current,
                stream.child(f"mix/{t}/{server}"),
                server_index=server,
                context=b"tamper-trial",
            )
            steps.append(step)
            current = [list(col) for col in step.outputs]
        assert verify_shuffle(
            group, jpk.pk, columns, steps, context=b"tamper-trial", expected_servers=kappa
        ), "untampered chain must verify"
        step_idx = rng.integer_below(kappa)
        col = rng.integer_below(4)
        row = rng.integer_below(n)
        mode = rng.integer_below(3)
        victim = steps[step_idx]
        outputs = [list(c) for c in victim.outputs]
        if mode == 0:
            # swap in a fresh encryption of a different message
            outputs[col][row] = encrypt(
                group, jpk.pk, group.hash_to_group(rng.take(16)), rng.child(f"x/{t}")
            )[0]
        elif mode == 1:
            # duplicate another row's ciphertext, re-randomised
            src = (row + 1 + rng.integer_below(n - 1)) % n
            outputs[col][row] = reencrypt(
                group, jpk.pk, outputs[col][src], rng.child(f"r/{t}")
            )[0]
        else:
            # re-randomise a single cell: ciphertext no longer matches
            # the commitment-bound permutation proof statement
            outputs[col][row] = reencrypt(
                group, jpk.pk, outputs[col][row], rng.child(f"s/{t}")
            )[0]
        import dataclasses

        tampered = list(steps)
        tampered[step_idx] = dataclasses.replace(
            victim, outputs=tuple(tuple(c) for c in outputs)
        )
        ok = verify_shuffle(
            group,
            jpk.pk,
            columns,
            tampered,
            context=b"tamper-trial",
            expected_servers=kappa,
        )
        if not ok:
            detected += 1
    return TrialReport(
        "shuffle-tamper", flips, detected, 1.0, 0.0, time.time() - start
    )


# ---------------------------------------------------------------------------
# deterministic misuse scenarios (each returns an AuditReport-like verdict)


def scenario_duplicate_registration(seed: int = 4000, group_name: str = "modp64"):
    """Registering twice yields a duplicate receipt, and the receipt
    audit endorses it."""
    world = make_world(seed, n_honest=4)
    election = Election(
        ElectionConfig(seed=seed + 1, group_name=group_name, kappa=2, alpha=2,
                       board_id="dup-reg"),
        world,
    )
    election.register(1)
    second = election.register(1)
    report = ind_reg_audit(election, second)
    return isinstance(second, RegDupReg) and report.verdict == 1


def scenario_duplicate_cast(seed: int = 4100, group_name: str = "modp64"):
    world = make_world(seed, n_honest=4)
    election = Election(
        ElectionConfig(seed=seed + 1, group_name=group_name, kappa=2, alpha=2,
                       board_id="dup-cast"),
        world,
    )
    receipts = {sid: election.register(sid) for sid in (1, 2, 3, 4)}
    election.prepare_roll()
    election.cast(1, receipts[1].vid)
    second = election.cast(1, receipts[1].vid)
    election.close_polls()
    report = ind_cast_audit(election, second)
    return isinstance(second, CastDupCast) and report.verdict == 1


def scenario_ineligible_cast(seed: int = 4200, group_name: str = "modp64"):
    """A registrant with no eligibility record is screened out and turned
    away with a publicly checkable opening."""
    world = make_world(seed, n_honest=4, n_ineligible=1)
    election = Election(
        ElectionConfig(seed=seed + 1, group_name=group_name, kappa=2, alpha=2,
                       board_id="inel-cast"),
        world,
    )
    receipts = {sid: election.register(sid) for sid in (1, 2, 3, 4)}
    election.prepare_roll()
    rejected = election.cast(4, receipts[4].vid)  # subject 4 holds no record
    election.close_polls()
    report = ind_cast_audit(election, rejected)
    return isinstance(rejected, CastIneligible) and report.verdict == 1


def scenario_id_targeting(seed: int = 4300, group_name: str = "modp64"):
    """Claiming someone else's roll id fails the booth photo check, and
    the rejection receipt audits as proper."""
    world = make_world(seed, n_honest=4)
    election = Election(
        ElectionConfig(seed=seed + 1, group_name=group_name, kappa=2, alpha=2,
                       board_id="targeting"),
        world,
    )
    receipts = {sid: election.register(sid) for sid in (1, 2, 3, 4)}
    election.prepare_roll()
    stolen = election.cast(2, receipts[1].vid)
    election.close_polls()
    report = ind_cast_audit(election, stolen)
    return isinstance(stolen, CastWrongPerson) and report.verdict == 1


def scenario_double_ballot(seed: int = 4400, group_name: str = "modp64"):
    """A corrupted booth posts a second ballot for a voted id; the
    universal audit refuses the board."""
    world = make_world(seed, n_honest=4)
    election = Election(
        ElectionConfig(seed=seed + 1, group_name=group_name, kappa=2, alpha=2,
                       board_id="double-ballot"),
        world,
    )
    receipts = {sid: election.register(sid) for sid in (1, 2, 3, 4)}
    election.prepare_roll()
    election.cast(1, receipts[1].vid)
    post_second_ballot(
        election, receipts[1].vid, SeedStream.from_seed(seed + 2, "extra")
    )
    election.close_polls()
    return univ_audit(election).verdict == 0


def scenario_eligibility_flip(seed: int = 4500, group_name: str = "modp64"):
    """The screening officer marks an ineligible row votable; the sampled
    roll audit re-checks eligibility and catches it (when sampled)."""
    world = make_world(seed, n_honest=6, n_ineligible=1)
    election = Election(
        ElectionConfig(seed=seed + 1, group_name=group_name, kappa=2, alpha=6,
                       board_id="resp-flip", check_receipts=False),
        world,
    )
    for sid in range(1, 7):
        election.register(sid)
    election.prepare_roll()
    # find the screened-out row and flip it to votable
    flipped = None
    for row, er in enumerate(election.er_entries()):
        if er.resp == 0:
            import dataclasses

            entry = dataclasses.replace(er, resp=1, booth=0)
            _rewrite_board_row(election, SECTION_ROLL, row, entry.to_bytes())
            election.eo_rows[row]["resp"] = 1
            election.eo_rows[row]["booth"] = 0
            flipped = row
            break
    election._er_cache = None
    election.close_polls()
    report = univ_audit(election)  # alpha covers the whole roll here
    return flipped is not None and report.verdict == 0


# ---------------------------------------------------------------------------
# privacy accounting


def privacy_accounting(
    election: Election,
    disclosures: list,
    contested_rows: int = 0,
) -> dict:
    """Bookkeeping checks after a run with audits:

    - decode ledger: the number of distinct rows opened for auditors in
      each section stays within the sample size (plus disputed rows);
    - quadrant separation: no single audit transcript carries both the
      identity-plain and roll-plain quadrant of one receipt;
    - one audit per receipt;
    - filler indistinguishability: cast-info and ballot records have the
      same byte profile whether real or filler, and every votable row is
      covered after close.
    """
    board = election.board
    alpha = election.config.alpha
    checks: dict[str, bool] = {}

    err_opened = decoded_rows(board, SECTION_REGISTRATIONS, "audit")
    roll_opened = decoded_rows(board, SECTION_ROLL, "audit")
    ci_opened = decoded_rows(board, SECTION_CAST_INFO, "audit")
    checks["err-decodes-within-sample"] = len(err_opened) <= alpha
    checks["roll-decodes-within-sample"] = len(roll_opened) <= alpha + contested_rows
    checks["ci-decodes-within-sample"] = len(ci_opened) <= alpha

    paired = [
        d
        for d in disclosures
        if {"identity-plain", "roll-plain"} <= set(d.quadrants)
    ]
    checks["no-identity-roll-pairing"] = not paired

    seen: dict[bytes, int] = {}
    for d in disclosures:
        seen[d.receipt_id] = seen.get(d.receipt_id, 0) + 1
    checks["one-audit-per-receipt"] = all(v == 1 for v in seen.values())

    group = election.group
    ci_profile = set()
    for raw in board.entries(SECTION_CAST_INFO):
        entry = CastInfoEntry.from_bytes(group, raw)
        ci_profile.add(len(raw) - len(encode(entry.row)))
    checks["filler-ci-profile"] = len(ci_profile) <= 1
    ev_profile = set()
    vids = set()
    for raw in board.entries(SECTION_VOTES):
        entry = VoteEntry.from_bytes(raw)
        ev_profile.add(len(raw) - len(encode(entry.vid)))
        vids.add(entry.vid)
    checks["filler-ballot-profile"] = len(ev_profile) <= 1
    if election.phase == "closed":
        votable = {e.vid for e in election.er_entries() if e.resp == 1}
        checks["every-votable-row-covered"] = votable <= vids
    checks["ok"] = all(checks.values())
    return checks
