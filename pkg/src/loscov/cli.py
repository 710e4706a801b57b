"""Command-line entry point: ``loscov <verb> [options]``.

Exit codes: 0 success, 1 usage or configuration error, 2 validation
failure, 3 numerical budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .analytic import los_prob_joint, los_prob_single_multilane
from .config import ConfigError, load_scenario
from .coverage import CoverageQuery, NumericalBudgetError, full_coverage_prob, k_los_prob
from .experiments import (UsageError, ergodic_config, load_experiment, recipe, run_experiment,
                          validate)
from .model import NoDetectableRegion
from .simulate import (SimConfig, coverage_events, sim_ergodic_los, sim_joint_los,
                       sim_volume_fraction, simulate_coverage_trials, write_trial_dump)

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_BUDGET = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positions(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="loscov", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    def common(p, trials=100_000):
        p.add_argument("--scenario", default="standard",
                       help="scenario file or bundled name (default: standard)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--trials", type=int, default=trials)
        p.add_argument("--out")

    p = sub.add_parser("los", help="LOS probability towards one transmitter")
    common(p)
    p.add_argument("--x", type=float, default=0.0, help="transmitter abscissa (m)")
    p.add_argument("--method", choices=("closed-form", "simulate"), default="closed-form")

    p = sub.add_parser("joint", help="joint LOS probability towards several transmitters")
    common(p)
    p.add_argument("--tx", type=_positions, required=True, help="e.g. 0,10,30")
    p.add_argument("--method", choices=("closed-form", "simulate"), default="closed-form")

    p = sub.add_parser("coverage", help="full or k-LOS coverage probability")
    common(p)
    p.add_argument("--method", default="conditional-mc",
                   choices=("conditional-mc", "nested-quadrature", "quadrature", "simulate"))
    p.add_argument("--k", type=int, help="at least k LOS links (omit for full coverage)")
    p.add_argument("--eps-tail", type=float, default=1e-8)
    p.add_argument("--include-empty", action="store_true")

    p = sub.add_parser("simulate", help="direct Monte-Carlo estimate")
    common(p)
    p.add_argument("--quantity", default="los",
                   choices=("los", "joint", "coverage", "volume-fraction", "ergodic"))
    p.add_argument("--tx", type=_positions, default=[0.0])
    p.add_argument("--k", type=int)
    p.add_argument("--include-empty", action="store_true")
    p.add_argument("--horizon", type=float, help="ergodic horizon (s)")

    p = sub.add_parser("validate", help="cross-method checks for one scenario")
    common(p)

    p = sub.add_parser("sweep", help="run a parameter sweep and write CSV + JSON")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--recipe", choices=("fig5", "fig6", "fig8"))
    src.add_argument("--spec", help="experiment file with an [experiment] section")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--method", action="append", help="override methods (repeatable)")
    p.add_argument("--k", type=int)
    p.add_argument("--eps-tail", type=float)
    return parser


def _emit(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True))


def _cmd_los(args) -> int:
    params = load_scenario(args.scenario)
    if args.method == "closed-form":
        _emit({"method": "closed-form", "value": los_prob_single_multilane(params.lanes)})
    else:
        est = sim_joint_los(SimConfig(params, args.trials, args.seed), [args.x])
        _emit({"method": "simulate", "value": est.value, "stderr": est.stderr,
               "n_trials": est.n_trials})
    return EXIT_OK


def _cmd_joint(args) -> int:
    params = load_scenario(args.scenario)
    if args.method == "closed-form":
        _emit({"method": "closed-form", "value": los_prob_joint(params, args.tx)})
    else:
        est = sim_joint_los(SimConfig(params, args.trials, args.seed), args.tx)
        _emit({"method": "simulate", "value": est.value, "stderr": est.stderr,
               "n_trials": est.n_trials})
    return EXIT_OK


def _cmd_coverage(args) -> int:
    params = load_scenario(args.scenario)
    method = "nested-quadrature" if args.method == "quadrature" else args.method
    query = CoverageQuery(params, k=args.k, method=method,
                          budget=None if method == "nested-quadrature" else args.trials,
                          eps_tail=args.eps_tail, include_empty=args.include_empty,
                          seed=args.seed)
    res = full_coverage_prob(query) if args.k is None else k_los_prob(query)
    if args.out:
        res.to_csv(args.out)
    _emit({"method": method, "kind": query.kind, "value": res.value, "stderr": res.stderr,
           "n_max": res.n_max, "wall_clock_s": round(res.wall_clock, 3),
           "diagnostics": res.diagnostics})
    return EXIT_OK


def _cmd_simulate(args) -> int:
    params = load_scenario(args.scenario)
    cfg = SimConfig(params, args.trials, args.seed)
    q = args.quantity
    if q in ("los", "joint"):
        est = sim_joint_los(cfg, args.tx[:1] if q == "los" else args.tx)
    elif q == "volume-fraction":
        est = sim_volume_fraction(cfg)
    elif q == "ergodic":
        ecfg = ergodic_config(params, args.seed)
        if args.horizon:
            ecfg = SimConfig(params, 1, args.seed, mode="ergodic", horizon=args.horizon)
        est = sim_ergodic_los(ecfg, args.tx[0])
    else:
        trials = simulate_coverage_trials(cfg)
        if args.out:
            write_trial_dump(args.out, trials)
        hits = coverage_events(trials, args.k, args.include_empty)
        p = float(hits.mean())
        _emit({"quantity": q, "value": p, "stderr": float(np.sqrt(p * (1 - p) / hits.size)),
               "n_trials": int(hits.size), "seed": args.seed})
        return EXIT_OK
    _emit({"quantity": q, "value": est.value, "stderr": est.stderr, "n_trials": est.n_trials,
           "seed": est.seed, "mode": est.mode, "low_count": est.low_count})
    return EXIT_OK


def _cmd_validate(args) -> int:
    params = load_scenario(args.scenario)
    report = validate(params, args.trials, args.seed)
    payload = report.to_dict()
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    for row in report.rows:
        print(f"{'PASS' if row.passed else 'FAIL'} {row.name}: measured={row.measured:.6g} "
              f"reference={row.reference:.6g} deviation={row.deviation:.3g} "
              f"tolerance={row.tolerance:.3g}")
    return EXIT_OK if report.passed else EXIT_VALIDATION


def _cmd_sweep(args) -> int:
    overrides = dict(out=args.out, seed=args.seed, trials=args.trials, workers=args.workers,
                     k=args.k, eps_tail=args.eps_tail,
                     methods=tuple(args.method) if args.method else None)
    spec = recipe(args.recipe, **overrides) if args.recipe else \
        load_experiment(args.spec, **overrides)
    cols, rows = run_experiment(spec)
    _emit({"out": args.out, "rows": len(rows), "columns": cols})
    return EXIT_OK


COMMANDS = {"los": _cmd_los, "joint": _cmd_joint, "coverage": _cmd_coverage,
            "simulate": _cmd_simulate, "validate": _cmd_validate, "sweep": _cmd_sweep}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as stop:  # --help or a usage error
        return stop.code
    try:
        return COMMANDS[args.verb](args)
    except NumericalBudgetError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_BUDGET
    except (ConfigError, UsageError, NoDetectableRegion, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
