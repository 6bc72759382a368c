"""Command-line entry point: ``lpnse {simulate,norms,check-interp,audit,sweep}``.

Every subcommand exits 0 exactly when the invariants it asserts held, 1 when
an invariant failed, and 2 on a usage or input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .config import (
    RunConfig,
    RunManifest,
    parse_config,
    parse_plan,
    write_csv,
    write_run_dir,
)
from .errors import LPNSEError
from .harness import (
    ConstantEstimate,
    CorpusSpec,
    estimate_constant,
    exponent_audit,
    make_initial,
    norm_report,
    run_experiment,
    summary_csv,
    sweep,
)
from .littlewood_paley import PROFILES, build_partition
from .spectral import read_snapshot, transform, write_snapshot

log = logging.getLogger("lpnse")

IDENTITY_TOL = 1e-12
CORPUS_IDENTITY_TOL = 1e-10


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _resolve_estimate(cfg: RunConfig, c_hat: Optional[float]) -> Optional[ConstantEstimate]:
    """Constant from the command line, the config, a constant file, or a fresh corpus sweep."""
    if c_hat is not None or cfg.c_hat is not None:
        return None
    if cfg.constant_file is not None:
        return ConstantEstimate.from_json(cfg.constant_file.read_text())
    corpus = CorpusSpec.seeded(cfg.values["corpus.size"], cfg.solver.grid.n, cfg.profile, cfg.values["corpus.seed"])
    log.info("estimating the interpolation constant over %d corpus fields", corpus.size)
    return estimate_constant(corpus)


def cmd_simulate(args) -> int:
    overrides = {"ic.seed": str(args.seed)} if args.seed is not None else None
    cfg = parse_config(args.config, overrides)
    out = Path(args.out) if args.out else cfg.output_dir
    if out is None:
        raise LPNSEError("no output directory: pass --out or set output.dir")
    started = _now()
    estimate = _resolve_estimate(cfg, args.c_hat)
    c_hat = args.c_hat or cfg.c_hat or estimate.c_hat
    verdict, record = run_experiment(cfg.solver, cfg.ic, c_hat, cfg.profile, estimate)

    extra = {
        "config.txt": lambda p: p.write_text(cfg.canonical()),
        "verdict.json": lambda p: p.write_text(json.dumps(_verdict_dict(verdict, c_hat, record), indent=2)),
    }
    if record.estimate is not None:
        extra["estimate.json"] = lambda p: p.write_text(record.estimate.to_json())
    if cfg.values["output.snapshots"]:
        u0 = make_initial(cfg.ic, cfg.solver.grid)
        extra["u0.snap"] = lambda p: write_snapshot(p, u0)
        if record.final is not None:
            extra["final.snap"] = lambda p: write_snapshot(p, record.final.u)
    manifest = RunManifest(cfg.config_hash, __version__, started, _now(), [cfg.ic.seed])
    write_run_dir(out, manifest, record.columns(), record.rows(), extra, force=args.force)
    print(f"{out}: status={record.status} always_small={verdict.always_small} "
          f"margin_property_held={verdict.margin_property_held} holder_held={verdict.holder_held} "
          f"energy_held={verdict.energy_held}")
    return 0 if verdict.invariants_held else 1


def _verdict_dict(verdict, c_hat, record) -> dict:
    return {
        "c_hat": c_hat,
        "status": verdict.status,
        "message": record.message,
        "always_small": verdict.always_small,
        "enstrophy_monotone": verdict.enstrophy_monotone,
        "first_violation_time": verdict.first_violation_time,
        "margin_property_held": verdict.margin_property_held,
        "holder_held": verdict.holder_held,
        "energy_held": verdict.energy_held,
        "chain_gaps": verdict.chain_gaps,
        "invariants_held": verdict.invariants_held,
    }


def cmd_norms(args) -> int:
    field = read_snapshot(args.snapshot)
    P = build_partition(field.grid, args.profile)
    report = norm_report(transform(field), P, args.time)
    if args.out:
        write_csv(args.out, report.columns(), [report.values()])
    else:
        print(",".join(report.columns()))
        print(",".join(format(v, ".17g") for v in report.values()))
    return 0


def cmd_check_interp(args) -> int:
    corpus = CorpusSpec.seeded(args.size, args.n, args.profile, args.seed or 0)
    est = estimate_constant(corpus)
    text = est.to_json()
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text)
    ok = all(math.isfinite(p.max_ratio) for p in est.pairs)
    if est.identity_defect is not None:
        ok = ok and est.identity_defect <= CORPUS_IDENTITY_TOL
    return 0 if ok else 1


def cmd_audit(args) -> int:
    field = read_snapshot(args.snapshot)
    if not field.is_vector:
        raise LPNSEError("audit needs a vector snapshot")
    audit = exponent_audit(transform(field), build_partition(field.grid, args.profile))
    print(json.dumps(audit.to_dict(), indent=2))
    ratio = audit.identity_ratio
    return 0 if ratio is None or abs(ratio - 1.0) <= IDENTITY_TOL else 1


def cmd_sweep(args) -> int:
    entries = parse_plan(args.plan)
    if args.seed is not None:
        entries = [
            (replace(e, ic=replace(e.ic, seed=args.seed)), c) for e, c in entries
        ]
    first = entries[0][1]
    c_hat = args.c_hat or first.c_hat
    if c_hat is None:
        c_hat = _resolve_estimate(first, None).c_hat
    rows = sweep([e for e, _ in entries], c_hat, first.profile, args.workers)
    text = summary_csv(rows)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    held = all(
        r["status"] == "ok" and r["margin_property_held"] and r["holder_held"] and r["energy_held"]
        for r in rows
    )
    return 0 if held else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lpnse", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one configuration and write a run directory")
    p.add_argument("config", type=Path)
    p.add_argument("--out", type=Path, help="run directory (default: output.dir from the config)")
    p.add_argument("--force", action="store_true", help="overwrite an existing run directory")
    p.add_argument("--seed", type=int, help="override ic.seed")
    p.add_argument("--c-hat", type=float, help="use this interpolation constant instead of estimating one")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("norms", help="NormReport of a snapshot file as CSV")
    p.add_argument("snapshot", type=Path)
    p.add_argument("--profile", choices=sorted(PROFILES), default="smooth")
    p.add_argument("--time", type=float, default=0.0, help="time stamp for the report row")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_norms)

    p = sub.add_parser("check-interp", help="estimate the interpolation constant over a seeded corpus")
    p.add_argument("--size", type=int, default=1000)
    p.add_argument("--n", type=int, default=32)
    p.add_argument("--profile", choices=sorted(PROFILES), default="smooth")
    p.add_argument("--seed", type=int, help="first corpus seed (default 0)")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_check_interp)

    p = sub.add_parser("audit", help="exponent audit of a vector snapshot as JSON")
    p.add_argument("snapshot", type=Path)
    p.add_argument("--profile", choices=sorted(PROFILES), default="smooth")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("sweep", help="run a plan file and write a summary CSV")
    p.add_argument("plan", type=Path)
    p.add_argument("--out", type=Path)
    p.add_argument("--seed", type=int, help="override ic.seed in every entry")
    p.add_argument("--c-hat", type=float)
    p.add_argument("--workers", type=int, help="worker processes (default: LPNSE_THREADS or CPU count)")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (LPNSEError, OSError) as exc:
        print(f"lpnse: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
