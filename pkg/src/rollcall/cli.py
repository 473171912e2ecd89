"""Command-line entry point: phased election runs over a state directory.

Every run is deterministic in (config, seed). The state directory holds the
board (one log file per section plus a header), the payload registry, and a
run header listing the steps applied so far. Each invocation rebuilds the
election by replaying those steps, checks the result against the persisted
board digest bit for bit, applies the requested step, and saves everything
back. Exit code 0 means every verdict the invocation produced was 1.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time

from .audits import ind_cast_audit, ind_reg_audit, univ_audit
from .board import Board, SECTION_ROLL
from .harness import (
    TrialReport,
    _rewrite_board_row,
    inject_phantom_rows,
    post_second_ballot,
    privacy_accounting,
    run_phantom_trials,
    run_receipt_forgery_draws,
    run_shuffle_tampers,
    scenario_double_ballot,
    scenario_duplicate_cast,
    scenario_duplicate_registration,
    scenario_eligibility_flip,
    scenario_id_targeting,
    scenario_ineligible_cast,
)
from .oracles import make_world
from .protocol import CastAccept, Election, ElectionConfig, RegAccept
from .randomness import SeedStream
from .risk import delta, epsilon, plan

RUN_HEADER = "run.json"
CORE_STEPS = ["setup", "register", "roll", "cast", "close"]
VIOLATIONS = ("none", "phantom", "resp-flip", "double-ballot")


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Everything a run needs to be replayed from nothing."""

    seed: int = 7
    kappa: int = 3
    honest: int = 20
    dishonest: int = 0
    ineligible: int = 0
    blocks: int = 4
    booths: int = 2
    alpha: int = 5
    vid_digits: int = 10
    group: str = "modp64"
    mask_abstentions: bool = False
    violation: str = "none"
    phantoms: int = 0

    def validate(self) -> None:
        if self.honest < 1:
            raise ValueError("need at least one honest subject")
        if self.dishonest < 0 or self.ineligible < 0 or self.phantoms < 0:
            raise ValueError("counts must be non-negative")
        if self.ineligible > self.honest:
            raise ValueError("ineligible count exceeds honest subjects")
        if self.alpha < 0 or self.alpha > self.honest + self.phantoms:
            raise ValueError("alpha must fit the expected register size")
        if self.violation not in VIOLATIONS:
            raise ValueError(f"unknown violation mode {self.violation!r}")
        if self.violation == "phantom":
            if self.dishonest < 1:
                raise ValueError("phantom mode needs a cooperating subject")
            if self.phantoms < 1:
                raise ValueError("phantom mode needs --phantoms >= 1")
        if self.violation == "resp-flip" and self.ineligible < 1:
            raise ValueError("resp-flip mode needs an ineligible subject")

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "RunConfig":
        return cls(**data)


class PhaseError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# deterministic rebuild


def _build_election(cfg: RunConfig) -> Election:
    world = make_world(
        cfg.seed,
        n_honest=cfg.honest,
        n_dishonest=cfg.dishonest,
        n_ineligible=cfg.ineligible,
    )
    config = ElectionConfig(
        seed=cfg.seed + 1,
        group_name=cfg.group,
        kappa=cfg.kappa,
        alpha=cfg.alpha,
        n_blocks=cfg.blocks,
        n_booths=cfg.booths,
        vid_digits=cfg.vid_digits,
        board_id="run",
    )
    return Election(config, world)


def _flip_first_screened_row(election: Election) -> int | None:
    """Corrupted screening: mark the first non-votable roll row votable."""
    for row, er in enumerate(election.er_entries()):
        if er.resp == 0:
            entry = dataclasses.replace(er, resp=1, booth=0)
            _rewrite_board_row(election, SECTION_ROLL, row, entry.to_bytes())
            election.eo_rows[row]["resp"] = 1
            election.eo_rows[row]["booth"] = 0
            election._er_cache = None
            return row
    return None


def _apply_step(election: Election, cfg: RunConfig, step: str) -> dict:
    """Run one step; returns the facts for its report."""
    facts: dict = {"step": step}
    if step == "register":
        kinds: dict[str, int] = {}
        for sid in range(1, cfg.honest + 1):
            receipt = election.register(sid)
            kinds[receipt.kind] = kinds.get(receipt.kind, 0) + 1
        facts["receipts"] = kinds
        if cfg.violation == "phantom":
            stream = SeedStream.from_seed(cfg.seed + 9999, "violation")
            rows = inject_phantom_rows(
                election, cfg.honest + 1, cfg.phantoms, stream
            )
            facts["injected_rows"] = len(rows)
    elif step == "roll":
        election.prepare_roll()
        facts["rows"] = len(election.er_entries())
        facts["votable"] = sum(r["resp"] for r in election.eo_rows)
        if cfg.violation == "resp-flip":
            facts["flipped_row"] = _flip_first_screened_row(election)
    elif step == "cast":
        kinds = {}
        first_accept = None
        for sid in range(1, cfg.honest + 1):
            receipt = election.reg_receipts.get(election.world.subjects[sid].uid)
            if not isinstance(receipt, RegAccept):
                continue
            cast = election.cast(sid, receipt.vid)
            kinds[cast.kind] = kinds.get(cast.kind, 0) + 1
            if first_accept is None and isinstance(cast, CastAccept):
                first_accept = cast
        facts["receipts"] = kinds
        if cfg.violation == "double-ballot":
            if first_accept is None:
                raise PhaseError("double-ballot mode needs one accepted cast")
            post_second_ballot(
                election,
                first_accept.vid,
                SeedStream.from_seed(cfg.seed + 9999, "violation"),
            )
            facts["double_ballot_vid"] = first_accept.vid
        if cfg.mask_abstentions:
            facts["masked"] = election.mask_abstentions()
    elif step == "close":
        election.close_polls()
    elif step == "univ-audit":
        report = univ_audit(election)
        facts["verdict"] = report.verdict
        facts["reasons"] = report.reasons
        facts["err_sample"] = report.err_sample
        facts["er_sample"] = report.er_sample
        facts["checked_votes"] = report.checked_votes
    elif step == "receipt-audit":
        verdicts = []
        disclosures = []
        for uid in sorted(election.reg_receipts):
            rep = ind_reg_audit(election, election.reg_receipts[uid])
            verdicts.append({"kind": rep.kind, "verdict": rep.verdict,
                             "beta": rep.beta, "reasons": rep.reasons})
            if rep.disclosure is not None:
                disclosures.append(rep.disclosure)
        for receipt in election.cast_receipts:
            rep = ind_cast_audit(election, receipt)
            verdicts.append({"kind": rep.kind, "verdict": rep.verdict,
                             "reasons": rep.reasons})
        facts["audited"] = len(verdicts)
        facts["verdict"] = int(all(v["verdict"] == 1 for v in verdicts))
        facts["failures"] = [v for v in verdicts if v["verdict"] == 0]
        if election.phase == "closed":
            accounting = privacy_accounting(election, disclosures)
            facts["privacy"] = accounting
            facts["verdict"] &= int(accounting["ok"])
    else:
        raise PhaseError(f"unknown step {step!r}")
    return facts


def _replay(header: dict) -> Election:
    cfg = RunConfig.from_json(header["config"])
    election = _build_election(cfg)
    for step in header["steps"][1:]:  # setup is the construction itself
        _apply_step(election, cfg, step)
    return election


# ---------------------------------------------------------------------------
# state directory plumbing


def _header_path(state_dir: str) -> str:
    return os.path.join(state_dir, RUN_HEADER)


def _load_header(state_dir: str) -> dict:
    path = _header_path(state_dir)
    if not os.path.exists(path):
        raise PhaseError(f"no run header in {state_dir}; run setup first")
    with open(path) as fh:
        return json.load(fh)


def _save_state(state_dir: str, header: dict, election: Election,
                facts: dict) -> None:
    os.makedirs(os.path.join(state_dir, "reports"), exist_ok=True)
    election.board.save(state_dir)
    election.registry.save(os.path.join(state_dir, "registry.json"))
    with open(_header_path(state_dir), "w") as fh:
        json.dump(header, fh, indent=1)
    report = dict(facts)
    report["digest"] = election.board.digest.hex()
    name = facts["step"]
    with open(os.path.join(state_dir, "reports", f"{name}.json"), "w") as fh:
        json.dump(report, fh, indent=1, default=str)


def _check_persisted_board(state_dir: str, election: Election) -> None:
    loaded = Board.load(state_dir)
    if loaded.digest != election.board.digest:
        raise PhaseError(
            "persisted board does not match the deterministic replay; "
            "state files were modified out of band"
        )


def _require_order(header: dict, step: str) -> None:
    done = header["steps"]
    if step in CORE_STEPS:
        expected = CORE_STEPS[: CORE_STEPS.index(step)]
        core_done = [s for s in done if s in CORE_STEPS]
        if core_done != expected:
            raise PhaseError(
                f"step {step!r} expects completed phases {expected}, "
                f"found {core_done}"
            )
    elif step == "univ-audit":
        if "close" not in done:
            raise PhaseError("univ-audit expects a closed run; run close first")
    elif step == "receipt-audit":
        if "register" not in done:
            raise PhaseError("receipt-audit expects registrations; run register-phase first")
    if step in done and step in CORE_STEPS + ["univ-audit", "receipt-audit"]:
        raise PhaseError(f"step {step!r} already ran for this directory")


def _run_step(state_dir: str, step: str) -> dict:
    header = _load_header(state_dir)
    _require_order(header, step)
    cfg = RunConfig.from_json(header["config"])
    election = _replay(header)
    _check_persisted_board(state_dir, election)
    started = time.time()
    facts = _apply_step(election, cfg, step)
    facts["elapsed"] = round(time.time() - started, 3)
    header["steps"].append(step)
    _save_state(state_dir, header, election, facts)
    return facts


# ---------------------------------------------------------------------------
# subcommands


def _cmd_setup(args) -> int:
    cfg = RunConfig(
        seed=args.seed,
        kappa=args.kappa,
        honest=args.honest,
        dishonest=args.dishonest,
        ineligible=args.ineligible,
        blocks=args.blocks,
        booths=args.booths,
        alpha=args.alpha,
        vid_digits=args.vid_digits,
        group=args.group,
        mask_abstentions=args.mask_abstentions,
        violation=args.violate,
        phantoms=args.phantoms,
    )
    cfg.validate()
    if os.path.exists(_header_path(args.dir)):
        raise PhaseError(f"{args.dir} already holds a run; use a fresh directory")
    os.makedirs(args.dir, exist_ok=True)
    election = _build_election(cfg)
    header = {"config": cfg.to_json(), "steps": ["setup"]}
    _save_state(args.dir, header, election, {"step": "setup"})
    print(f"setup: board {election.board.digest.hex()[:16]}… in {args.dir}")
    return 0


def _phase_command(step: str, banner: str):
    def run(args) -> int:
        facts = _run_step(args.dir, step)
        ok = facts.get("verdict", 1) == 1
        print(f"{banner}: {json.dumps({k: v for k, v in facts.items() if k not in ('step',)}, default=str)}")
        return 0 if ok else 1

    return run


def _cmd_run_all(args) -> int:
    rc = _cmd_setup(args)
    if rc != 0:
        return rc
    failed = 0
    for step in ["register", "roll", "cast", "close", "univ-audit", "receipt-audit"]:
        facts = _run_step(args.dir, step)
        verdict = facts.get("verdict", 1)
        line = {k: v for k, v in facts.items() if k not in ("step", "err_sample", "er_sample")}
        print(f"{step}: {json.dumps(line, default=str)}")
        if verdict != 1:
            failed += 1
    return 0 if failed == 0 else 1


def _cmd_bounds(args) -> int:
    # f from a margin follows the planning convention: half the margin's
    # worth of rows per route
    if args.f is not None:
        f = args.f
    elif args.margin is not None:
        f = (int(args.n * args.margin) + 1) // 2
    else:
        print("bounds: provide --margin or --f", file=sys.stderr)
        return 2
    eps = epsilon(args.n, args.alpha, f, exact=args.exact)
    dlt = delta(args.n, args.alpha, exact=args.exact)
    out = {"n": args.n, "alpha": args.alpha, "f": f,
           "epsilon": eps, "delta": dlt}
    if args.margin is not None and args.eps_target is not None:
        out["plan_alpha"] = plan(args.margin, args.n, args.eps_target)
    print(json.dumps(out))
    ok = True
    if args.eps_target is not None:
        ok &= eps < args.eps_target
    if args.delta_target is not None:
        ok &= dlt < args.delta_target
    return 0 if ok else 1


def _deterministic_trials(fn, trials: int, seed: int, name: str) -> TrialReport:
    start = time.time()
    detected = sum(1 for t in range(trials) if fn(seed=seed + 101 * t))
    return TrialReport(name, trials, detected, 1.0, 0.0, time.time() - start)


_SCENARIOS = {
    "phantom-err": lambda a: run_phantom_trials(
        a.n, a.f, a.alpha, a.trials, seed=a.seed
    ),
    "forged-receipt": lambda a: run_receipt_forgery_draws(a.trials, seed=a.seed),
    "shuffle-tamper": lambda a: run_shuffle_tampers(flips=a.trials, seed=a.seed),
    "duplicate-registration": lambda a: _deterministic_trials(
        scenario_duplicate_registration, a.trials, a.seed, "duplicate-registration"
    ),
    "duplicate-cast": lambda a: _deterministic_trials(
        scenario_duplicate_cast, a.trials, a.seed, "duplicate-cast"
    ),
    "ineligible-cast": lambda a: _deterministic_trials(
        scenario_ineligible_cast, a.trials, a.seed, "ineligible-cast"
    ),
    "id-targeting": lambda a: _deterministic_trials(
        scenario_id_targeting, a.trials, a.seed, "id-targeting"
    ),
    "double-ballot": lambda a: _deterministic_trials(
        scenario_double_ballot, a.trials, a.seed, "double-ballot"
    ),
    "eligibility-flip": lambda a: _deterministic_trials(
        scenario_eligibility_flip, a.trials, a.seed, "eligibility-flip"
    ),
}


def _report_json(report: TrialReport) -> dict:
    return {
        "name": report.name,
        "trials": report.trials,
        "detected": report.detected,
        "rate": report.rate,
        "expected": report.oracle_rate,
        "tolerance": report.tolerance,
        "elapsed": round(report.elapsed, 3),
        "passed": report.passed,
    }


def _cmd_harness(args) -> int:
    if args.mode == "run":
        reports = [_SCENARIOS[args.scenario](args)]
    else:  # all: a quick pass over every scenario at reduced sizes
        class Quick:
            pass

        reports = []
        for name, fn in _SCENARIOS.items():
            q = Quick()
            q.seed = args.seed
            q.trials = {"phantom-err": 10, "forged-receipt": 600,
                        "shuffle-tamper": 20}.get(name, 3)
            q.n, q.f, q.alpha = 200, 10, 40
            reports.append(fn(q))
    payload = [_report_json(r) for r in reports]
    for report in reports:
        print(report.line())
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(payload, fh, indent=1)
    return 0 if all(r.passed for r in reports) else 1


# ---------------------------------------------------------------------------
# argument wiring


def _add_setup_flags(sub) -> None:
    sub.add_argument("--dir", required=True, help="state directory")
    sub.add_argument("--seed", type=int, default=7)
    sub.add_argument("--kappa", type=int, default=3)
    sub.add_argument("--honest", type=int, default=20)
    sub.add_argument("--dishonest", type=int, default=0)
    sub.add_argument("--ineligible", type=int, default=0)
    sub.add_argument("--blocks", type=int, default=4)
    sub.add_argument("--booths", type=int, default=2)
    sub.add_argument("--alpha", type=int, default=5)
    sub.add_argument("--vid-digits", type=int, default=10, dest="vid_digits")
    sub.add_argument("--group", default="modp64")
    sub.add_argument("--mask-abstentions", action="store_true",
                     dest="mask_abstentions",
                     help="cover-fill casting info for absentees before close")
    sub.add_argument("--violate", choices=VIOLATIONS, default="none",
                     help="inject a corruption so the audits have work to do")
    sub.add_argument("--phantoms", type=int, default=0,
                     help="planted register rows for --violate phantom")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rollcall",
        description="phased, auditable, replayable electoral-roll runs",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    sp = subs.add_parser("setup", help="create a run directory")
    _add_setup_flags(sp)
    sp.set_defaults(fn=_cmd_setup)

    for name, step, banner in [
        ("register-phase", "register", "register"),
        ("prepare-roll", "roll", "roll"),
        ("cast-phase", "cast", "cast"),
        ("close", "close", "close"),
        ("univ-audit", "univ-audit", "univ-audit"),
        ("receipt-audit", "receipt-audit", "receipt-audit"),
    ]:
        sp = subs.add_parser(name, help=f"run the {banner} step")
        sp.add_argument("--dir", required=True)
        sp.set_defaults(fn=_phase_command(step, banner))

    sp = subs.add_parser("run-all", help="setup plus every phase and audit")
    _add_setup_flags(sp)
    sp.set_defaults(fn=_cmd_run_all)

    sp = subs.add_parser("bounds", help="closed-form audit risk bounds")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--alpha", type=int, required=True)
    sp.add_argument("--margin", type=float, default=None)
    sp.add_argument("--f", type=int, default=None)
    sp.add_argument("--eps-target", type=float, default=None, dest="eps_target")
    sp.add_argument("--delta-target", type=float, default=None, dest="delta_target")
    sp.add_argument("--exact", action="store_true")
    sp.set_defaults(fn=_cmd_bounds)

    sp = subs.add_parser("harness", help="adversary scenarios and trials")
    hsubs = sp.add_subparsers(dest="mode", required=True)
    hrun = hsubs.add_parser("run", help="one scenario")
    hrun.add_argument("scenario", choices=sorted(_SCENARIOS))
    hrun.add_argument("--trials", type=int, default=100)
    hrun.add_argument("--seed", type=int, default=1000)
    hrun.add_argument("--n", type=int, default=1000)
    hrun.add_argument("--f", type=int, default=50)
    hrun.add_argument("--alpha", type=int, default=100)
    hrun.add_argument("--out", default=None)
    hrun.set_defaults(fn=_cmd_harness)
    hall = hsubs.add_parser("all", help="quick pass over every scenario")
    hall.add_argument("--seed", type=int, default=1000)
    hall.add_argument("--out", default=None)
    hall.set_defaults(fn=_cmd_harness)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except PhaseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
