"""Command line: run, suite, plan, plot."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from .harness import ConfigError, emit_plots, load_config, run, suite
from .polling import InfeasiblePlan, overhead_bandwidth_pct, recommend_interval

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="prednm", description="Predictive network management simulator")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one experiment")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--deterministic", action="store_true",
                   help="sequential scheduler, no wall-clock pacing (the default)")
    r.add_argument("--gvt", choices=("exact", "approx"))
    r.add_argument("--out")
    r.add_argument("--pace", type=float, help="wall-clock seconds to sleep per round")

    s = sub.add_parser("suite", help="run the reference triples and write summary.csv")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--duration", type=float, default=1000.0)

    pl = sub.add_parser("plan", help="recommend a polling period")
    pl.add_argument("--config", required=True)
    pl.add_argument("--printed-form", action="store_true",
                    help="use the literal historical bandwidth formula")

    pt = sub.add_parser("plot", help="render figures from a trace")
    pt.add_argument("--trace", required=True)
    pt.add_argument("--out")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasiblePlan as exc:
        print(json.dumps({"feasible": False, "constraint": exc.constraint,
                          "message": str(exc)}))
        return EXIT_INFEASIBLE


def _dispatch(args) -> int:
    if args.command == "run":
        cfg = load_config(args.config)
        changes = {}
        if args.seed is not None:
            changes["seed"] = args.seed
        if args.gvt is not None:
            changes["gvt_mode"] = args.gvt
        if args.pace is not None and not args.deterministic:
            changes["pace"] = args.pace
        if args.deterministic:
            changes["pace"] = 0.0
        cfg = replace(cfg, **changes).validate()
        out = args.out or cfg.out_dir or "out"
        report = run(cfg, out)
        print(json.dumps(report.to_json(), indent=2, sort_keys=True))
        return EXIT_OK
    if args.command == "suite":
        reports = suite(args.out, seed=args.seed, duration=args.duration)
        for r in reports:
            print(f"{r.label:24s} causality={r.rollbacks['causality']:4d} "
                  f"verification={r.rollbacks['verification']:4d} polls={r.polls:5d} "
                  f"max_t_ahead={r.max_t_ahead:g}")
        print(f"summary: {Path(args.out) / 'summary.csv'}")
        return EXIT_OK
    if args.command == "plan":
        cfg = load_config(args.config)
        if cfg.polling is None:
            raise ConfigError({"polling": "section required for plan"})
        plan = recommend_interval(cfg.error_model, cfg.theta, cfg.polling, cfg.budget_pct,
                                  printed_form=args.printed_form)
        out = {"feasible": True, **plan.to_json()}
        if plan.period != float("inf"):
            out["overhead_pct"] = overhead_bandwidth_pct(
                replace(cfg.polling, T=plan.period), printed_form=args.printed_form)
        print(json.dumps(out, indent=2, sort_keys=True))
        return EXIT_OK
    if args.command == "plot":
        try:
            res = emit_plots(args.trace, args.out)
        except FileNotFoundError as exc:
            print(str(exc), file=sys.stderr)
            return EXIT_CONFIG
        print("\n".join(res.files))
        return EXIT_OK
    raise AssertionError(args.command)


if __name__ == "__main__":
    sys.exit(main())
