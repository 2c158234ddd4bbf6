"""Command-line entry point: ``gridsched run`` and ``gridsched desk``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .experiment import emit_report, load_experiment, run_experiment
from .metascheduler import PERTURB_HOURS, STRATEGIES
from .workload import ConfigError, filter_short_jobs


def _max_q(raw: str):
    return None if raw.lower() in ("inf", "unlimited") else int(raw)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gridsched", description=__doc__)
    sub = p.add_subparsers(dest="cmd", required=True)

    run = sub.add_parser("run", help="run an experiment config and write a report")
    run.add_argument("config", type=Path)
    run.add_argument("--strategy", choices=STRATEGIES, type=str.upper)
    run.add_argument("--wt", type=float, help="weight of response time, 0-100")
    run.add_argument("--maxq", type=_max_q, default=argparse.SUPPRESS, help="jobs per system per cycle, or 'inf'")
    run.add_argument("--seed", type=int, help="seed for routing, power and perturbation draws "
                     "(a generated workload keeps its own [workload] seed)")
    run.add_argument("--out", type=Path, help="output directory")
    run.add_argument("--f-g", type=float, dest="f_g", help="fraction of grid submissions")
    run.add_argument("--filter-short-jobs", action="store_true",
                     help="drop jobs running under 30 minutes")
    run.add_argument("--transfer-model", action="store_true",
                     help="include data transfer time in response predictions")
    run.add_argument("--perturb-hours", type=int, choices=PERTURB_HOURS)
    run.add_argument("--fairness", action="store_true", help="also run the local baseline")
    run.add_argument("--audit", action="store_true", help="write per-cycle decisions")

    desk = sub.add_parser("desk", help="write a small synthetic scenario")
    desk.add_argument("out", type=Path)
    desk.add_argument("--seed", type=int, default=0)
    desk.add_argument("--jobs", type=int, default=500)

    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.cmd == "desk":
        from .desk import write_desk_files
        print(write_desk_files(args.out, seed=args.seed, n_jobs=args.jobs))
        return 0

    try:
        cfg = load_experiment(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    over = {}
    if args.strategy:
        over["strategy"] = args.strategy
    if args.wt is not None:
        over["w_t"] = args.wt
    if hasattr(args, "maxq"):  # None (inf) is a real value
        over["max_q"] = args.maxq
    if args.seed is not None:
        over["seed"] = args.seed
    if args.f_g is not None:
        over["f_g"] = args.f_g
    if args.transfer_model:
        over["transfer"] = True
    if args.perturb_hours is not None:
        over["perturb_hours"] = args.perturb_hours
    if args.fairness:
        over["fairness"] = True
    if args.audit:
        over["audit"] = True
    if args.filter_short_jobs:
        over["workload"] = filter_short_jobs(cfg.workload)
    try:
        cfg = replace(cfg, **over)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = args.out or cfg.output_dir or Path("out")
    report = run_experiment(cfg)
    for path in emit_report(report, out):
        print(path)
    s = report.summary()
    print(f"{cfg.strategy}: {s['jobs']} jobs, avg response {s['avg_response_minutes']:.1f} min, "
          f"electricity cost {s['total_electricity_cost']:.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
