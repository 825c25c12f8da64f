"""Command-line entry point: ``nonresponse-lab <command> ...``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from collections import Counter
from dataclasses import replace
from pathlib import Path

from . import fileio
from .accuracy import (
    InconclusiveTreatment, NonComparisonTreatment, ScoringPolicy, fmt_estimate, fmt_pct, summarize,
)
from .association import run_battery
from .cvaudit import criteria_summary, resolve, resume_histogram
from .fileio import ConfigError, DataError, atomic_write, csv_text, json_text
from .nonresponse import Answered, Scope, high_nonresponse_flags, ledger
from .simulate import SimulationError, generate
from .study import Difficulty, StudyDesign, validate
from .sweep import CSV_HEADER, parse_grid, run_sweep, sweep_rows

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
SEED_ENV = "NONRESPONSE_LAB_SEED"

log = logging.getLogger("nonresponse_lab")


def _emit(out_dir: Path | None, name: str, text: str, stdout: bool = False) -> None:
    if out_dir is not None:
        atomic_write(out_dir / name, text)
    if stdout or out_dir is None:
        sys.stdout.write(text)


def _out_dir(args) -> Path | None:
    return Path(args.out_dir) if getattr(args, "out_dir", None) else None


def _resolve_config(args) -> fileio.RunConfig:
    cfg = fileio.load_config(args.config) if args.config else fileio.RunConfig()
    seed = cfg.seed
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            seed = int(env)
        except ValueError:
            raise ConfigError(SEED_ENV, f"not an integer: {env!r}") from None
    if args.seed is not None:
        seed = args.seed
    if seed < 0:
        raise ConfigError("seed", "must be nonnegative")
    cfg = replace(cfg, seed=seed)
    if getattr(args, "grid", None):
        try:
            cfg = replace(cfg, grid=parse_grid(args.grid))
        except ValueError as exc:
            raise ConfigError("grid", str(exc)) from None
    if getattr(args, "pi", None) is not None:
        try:
            cfg = replace(cfg, missingness=cfg.missingness.with_pi(args.pi))
        except ValueError as exc:
            raise ConfigError("mechanism.pi", str(exc)) from None
    return cfg


# ---- subcommands -------------------------------------------------------------

def cmd_simulate(args) -> None:
    cfg = _resolve_config(args)
    ds = generate(cfg.spec, cfg.missingness, cfg.seed)
    out = Path(args.out_dir)
    atomic_write(out / "records.csv", fileio.records_csv(ds.to_records()))
    atomic_write(out / "design.csv", fileio.design_csv(ds.design()))
    atomic_write(out / "dataset.json", json_text(fileio.dataset_sidecar(ds, cfg)))
    atomic_write(out / "manifest.json", json_text(fileio.manifest("simulate", cfg.resolved(), cfg.seed)))
    print(f"realized_missing={ds.realized_missing:.4f} errors={int(ds.y.sum())} -> {out}")


def cmd_sweep(args) -> None:
    started = fileio.now_utc()
    cfg = _resolve_config(args)
    results = run_sweep(cfg.spec, cfg.missingness, cfg.grid, cfg.seed, workers=args.workers, level=cfg.level)
    out = Path(args.out)
    atomic_write(out / "sweep.csv", csv_text(CSV_HEADER, sweep_rows(results)))
    man = fileio.manifest("sweep", cfg.resolved(), cfg.seed, started)
    man["failed_cells"] = [{"pi": c.pi, "seed": c.seed, "error": c.error} for c in results if c.failed]
    atomic_write(out / "manifest.json", json_text(man))
    failed = len(man["failed_cells"])
    print(f"{len(results)} cells ({failed} failed) -> {out / 'sweep.csv'}")


def _policy(args) -> ScoringPolicy:
    return ScoringPolicy(
        InconclusiveTreatment(args.inconclusive),
        NonComparisonTreatment(args.unsuitable),
        NonComparisonTreatment(args.no_value),
    )


def _check(records, design: StudyDesign) -> None:
    report = validate(records, design)
    if report:
        v = report.violations[0]
        raise DataError(f"{len(report)} violation(s), first: {v.kind} at ({v.examiner_id}, {v.item_id}) {v.detail}".rstrip())


RATE_HEADER = ("measure", "numerator", "denominator", "point", "ci_low", "ci_high")


def cmd_rates(args) -> None:
    records = fileio.read_records(args.records)
    _check(records, StudyDesign.from_records(records))
    if not 0.0 < args.level < 1.0:
        raise ConfigError("level", "must lie in (0, 1)")
    summary = summarize(records, _policy(args), args.level)
    rows = summary.rows()
    machine = csv_text(RATE_HEADER, (
        (m, e.numerator, e.denominator, e.point if not e.undefined else "undefined", e.ci_low, e.ci_high)
        for m, e in rows
    ))
    config = {"records": str(args.records), "inconclusive": args.inconclusive, "unsuitable": args.unsuitable,
              "no_value": args.no_value, "level": args.level}
    out = _out_dir(args)
    if out is not None:
        atomic_write(out / "rates.csv", machine)
        atomic_write(out / "rates.json", json_text({"manifest": fileio.manifest("rates", config), **summary.as_dict()}))
    if args.format == "csv":
        sys.stdout.write(machine)
    elif args.format == "json":
        sys.stdout.write(json_text(summary.as_dict()))
    else:
        width = max(len(m) for m, _ in rows)
        print(f"{'measure':<{width}}  {'n/N':>12}  percent ({args.level:.0%} CI)")
        for m, e in rows:
            print(f"{m:<{width}}  {f'{e.numerator}/{e.denominator}':>12}  {fmt_estimate(e)}")


LEDGER_HEADER = ("scope", "answered_rule", "enrolled", "active_responders", "unit_rate", "assigned_items",
                 "answered_items", "item_rate", "total_assigned", "overall_rate", "status")


def _design_and_records(args):
    design = fileio.read_design(args.design, args.enrolled)
    records = fileio.read_records(args.records)
    _check(records, design)
    return design, records


def cmd_nonresponse(args) -> None:
    design, records = _design_and_records(args)
    answered = Answered(args.answered)
    ledgers = [ledger(design, records, scope, answered) for scope in Scope]
    flags, excluded = high_nonresponse_flags(design, records, args.threshold, Scope(args.flag_scope), answered)
    rows = [tuple(l.as_dict()[k] for k in LEDGER_HEADER) for l in ledgers]
    machine = csv_text(LEDGER_HEADER, rows)
    body = {"ledgers": [l.as_dict() for l in ledgers],
            "high_nonresponse": {"threshold": args.threshold, "flagged": sum(flags.values()),
                                 "examiners": len(flags), "excluded": excluded}}
    out = _out_dir(args)
    if out is not None:
        config = {"design": str(args.design), "records": str(args.records), "enrolled": design.enrolled_count,
                  "answered": args.answered, "threshold": args.threshold, "flag_scope": args.flag_scope}
        atomic_write(out / "nonresponse.csv", machine)
        atomic_write(out / "nonresponse.json", json_text({"manifest": fileio.manifest("nonresponse", config), **body}))
        atomic_write(out / "flags.csv", fileio.flags_csv(flags))
    if args.format == "json":
        sys.stdout.write(json_text(body))
    elif args.format == "csv":
        sys.stdout.write(machine)
    else:
        for l in ledgers:
            print(f"{l.scope.value:<9} unit {_pct(l.unit_rate):>10}  item {_pct(l.item_rate):>10}  "
                  f"({l.active_responders}/{l.enrolled} responders, {l.answered_items}/{l.assigned_items} items)"
                  + ("" if l.status == "ok" else f"  [{l.status}]"))
        print(f"high nonresponse (> {args.threshold:g}): {sum(flags.values())} of {len(flags)} examiners")


def _pct(rate: float | None) -> str:
    return fmt_pct(rate) if rate is None else f"{fmt_pct(rate)}%"


PERM_HEADER = ("characteristic", "N", "K", "n", "k", "exact_p", "mc_p", "mc_low", "mc_high")


def cmd_permtest(args) -> None:
    attributes = fileio.read_attributes(args.attributes)
    if args.flags:
        flags = fileio.read_flags(args.flags)
    elif args.design and args.records:
        design, records = _design_and_records(args)
        flags, _ = high_nonresponse_flags(design, records, args.threshold)
    else:
        raise ConfigError("flags", "give --flags, or --design with --records")
    names = args.characteristics.split(",") if args.characteristics else sorted(
        {k for a in attributes for k in a.flags})
    known = {k for a in attributes for k in a.flags}
    unknown = [n for n in names if n not in known]
    if unknown:
        raise ConfigError("characteristics", f"not in attributes file: {','.join(unknown)}")
    missing = sorted(set(flags) - {a.examiner_id for a in attributes})
    if missing:
        log.info("%d flagged examiners have no attribute row and are excluded", len(missing))
    if args.n_perm < 1:
        raise ConfigError("n_perm", "must be at least 1")
    rows = run_battery(flags, attributes, names, args.n_perm, args.seed)
    text = csv_text(PERM_HEADER, (
        (r.name, r.contingency.n_total, r.contingency.n_characteristic, r.contingency.n_flagged,
         r.contingency.k_overlap, r.exact_p, r.mc.p_hat, r.mc.mc_low, r.mc.mc_high) for r in rows
    ))
    _emit(_out_dir(args), "permtest.csv", text, stdout=True)


def cmd_cv_audit(args) -> None:
    profiles = resolve(fileio.read_cv_records(args.cv))
    if not profiles:
        raise DataError("no CV records", str(args.cv))
    s = criteria_summary(profiles)
    table = csv_text(("criterion", "count", "n_experts", "percent"), [
        ("current_afte_member", s.n_afte, s.n_experts, f"{s.pct_afte:.1f}"),
        ("public_employer", s.n_public, s.n_experts, f"{s.pct_public:.1f}"),
        ("afte_member_and_public_employer", s.n_both, s.n_experts, f"{s.pct_both:.1f}"),
    ])
    hist, experts, resumes = resume_histogram(profiles)
    hist_text = csv_text(("n_resumes", "n_experts"), [*hist.items(), ("total_experts", experts), ("total_resumes", resumes)])
    out = _out_dir(args)
    if out is not None:
        atomic_write(out / "criteria.csv", table)
        atomic_write(out / "resume_histogram.csv", hist_text)
    sys.stdout.write(table + "\n" + hist_text)


def difficulty_table(records) -> tuple[dict[Difficulty, tuple[int, int]], int]:
    """Counts per difficulty level as ``(answered, unanswered)`` plus rated-but-undecided total."""
    tally = Counter((r.difficulty, r.decision is not None) for r in records if r.difficulty is not None)
    table = {d: (tally[(d, True)], tally[(d, False)]) for d in Difficulty}
    return table, sum(u for _, u in table.values())


def cmd_difficulty(args) -> None:
    table, rated_without_decision = difficulty_table(fileio.read_records(args.records))
    rows = [(d.value, a, u) for d, (a, u) in table.items()]
    rows.append(("total", sum(a for _, a, _ in rows), rated_without_decision))
    _emit(_out_dir(args), "difficulty.csv", csv_text(("difficulty", "answered", "unanswered"), rows), stdout=True)


# ---- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nonresponse-lab", description=__doc__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def config_args(sp):
        sp.add_argument("config", nargs="?", help="JSON run config (defaults if omitted)")
        sp.add_argument("--seed", type=int, help=f"overrides config and ${SEED_ENV}")
        sp.add_argument("--pi", type=float, help="error-masking probability override")

    sp = sub.add_parser("simulate", help="generate one dataset and export records")
    config_args(sp)
    sp.add_argument("--out-dir", required=True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("sweep", help="observed vs. full estimates across the pi grid")
    config_args(sp)
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--grid", help="start:stop:count, ends included")
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("rates", help="accuracy measures with Clopper-Pearson intervals")
    sp.add_argument("records")
    sp.add_argument("--inconclusive", choices=[t.value for t in InconclusiveTreatment], default="correct")
    sp.add_argument("--unsuitable", choices=[t.value for t in NonComparisonTreatment], default="observed")
    sp.add_argument("--no-value", choices=[t.value for t in NonComparisonTreatment], default="observed")
    sp.add_argument("--level", type=float, default=0.95)
    sp.add_argument("--format", choices=["table", "csv", "json"], default="table")
    sp.add_argument("--out-dir")
    sp.set_defaults(func=cmd_rates)

    def design_args(sp, required):
        sp.add_argument("--design", required=required)
        sp.add_argument("--records", required=required)
        sp.add_argument("--enrolled", type=int, help="enrolled participants (default: examiners in design)")
        sp.add_argument("--threshold", type=float, default=0.5)

    sp = sub.add_parser("nonresponse", help="unit and item nonresponse ledger")
    design_args(sp, True)
    sp.add_argument("--answered", choices=[a.value for a in Answered], default="any")
    sp.add_argument("--flag-scope", choices=[s.value for s in Scope], default="all")
    sp.add_argument("--format", choices=["table", "csv", "json"], default="table")
    sp.add_argument("--out-dir")
    sp.set_defaults(func=cmd_nonresponse)

    sp = sub.add_parser("permtest", help="characteristic vs. high nonresponse tests")
    sp.add_argument("--attributes", required=True)
    sp.add_argument("--flags")
    design_args(sp, False)
    sp.add_argument("--characteristics", help="comma-separated (default: all columns)")
    sp.add_argument("--n-perm", type=int, default=100_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out-dir")
    sp.set_defaults(func=cmd_permtest)

    sp = sub.add_parser("cv-audit", help="resolve CV duplicates and summarize inclusion criteria")
    sp.add_argument("cv")
    sp.add_argument("--out-dir")
    sp.set_defaults(func=cmd_cv_audit)

    sp = sub.add_parser("difficulty", help="difficulty ratings by answered/unanswered")
    sp.add_argument("records")
    sp.add_argument("--out-dir")
    sp.set_defaults(func=cmd_difficulty)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config_error", str(exc))
    except DataError as exc:
        return _fail(EXIT_DATA, "data_error", str(exc))
    except (SimulationError, ArithmeticError) as exc:
        return _fail(EXIT_NUMERIC, "numeric_error", str(exc))
    except ValueError as exc:
        return _fail(EXIT_DATA, "data_error", str(exc))
    return EXIT_OK


def _fail(code: int, kind: str, message: str) -> int:
    sys.stderr.write(f"nonresponse-lab: error[{kind}] {' '.join(message.split())}\n")
    return code
