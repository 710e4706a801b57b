"""Parameter sweeps, built-in recipes and the cross-method validation report."""

from __future__ import annotations

import csv
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import __version__
from .analytic import los_prob_joint, los_prob_single_multilane
from .config import (KNOWN_KEYS, ConfigError, load_scenario, read_sections, resolve_path,
                     scenario_from_mapping, scenario_to_mapping)
from .coverage import (CoverageQuery, NumericalBudgetError, analytic_cap, full_coverage_prob,
                       k_los_prob, poisson_truncation)
from .model import NoDetectableRegion, ScenarioParams
from .simulate import (SimConfig, coverage_events, sim_ergodic_los, sim_joint_los,
                       sim_volume_fraction, simulate_coverage_trials)

QUANTITIES = ("los-single", "los-pair", "los-joint", "coverage-full", "coverage-k",
              "volume-fraction", "ergodic")
METHOD_ALIASES = {"quadrature": "nested-quadrature"}
ALLOWED_METHODS = {
    "los-single": ("closed-form", "simulate"),
    "los-pair": ("closed-form", "simulate"),
    "los-joint": ("closed-form", "simulate"),
    "coverage-full": ("conditional-mc", "nested-quadrature", "simulate"),
    "coverage-k": ("conditional-mc", "nested-quadrature", "simulate"),
    "volume-fraction": ("closed-form", "simulate"),
    "ergodic": ("closed-form", "simulate"),
}
STOCHASTIC = {"simulate", "conditional-mc", "nested-quadrature"}
# Sweep variables beyond the scenario-file keys.
EXTRA_SWEEP_VARS = ("separation_m", "mean_length_m", "tx_x_m")

# Formula conventions applied everywhere; recorded in every sidecar.
ERRATA = {
    "joint_los_prefix": "-2*lambda_b*n/mu for n transmitters",
    "projection": "x_hat_k = d1*x_k/(d1+d2) for every k",
    "single_transmitter_exponent": "-2*lambda_b/mu",
    "subset_prefix": "-2*lambda_b*|S|/mu for a subset S of transmitters",
    "subset_gaps": "gaps between consecutive members of S",
}


class UsageError(ValueError):
    """Quantity, method or sweep variable do not fit together."""


@dataclass(frozen=True)
class ExperimentSpec:
    """A declarative sweep.

    ``sweep`` maps variable names to value lists; rows are the cartesian
    product in the given key order.  Variables are scenario-file keys plus
    ``separation_m`` (second transmitter of a pair), ``mean_length_m`` (full
    obstacle length ``2/mu``) and ``tx_x_m``.
    """

    quantity: str
    sweep: dict
    methods: tuple
    scenario: ScenarioParams
    out: Optional[str] = None
    seed: int = 0
    trials: int = 20_000
    k: Optional[int] = None
    tx_positions: tuple = (0.0, 10.0)
    tx_x: float = 0.0
    eps_tail: float = 1e-8
    include_empty: bool = False
    workers: int = 1
    name: str = "experiment"

    def __post_init__(self):
        if self.quantity not in QUANTITIES:
            raise UsageError(f"unknown quantity {self.quantity!r}")
        methods = tuple(METHOD_ALIASES.get(m, m) for m in self.methods)
        object.__setattr__(self, "methods", methods)
        if not methods:
            raise UsageError("at least one method is required")
        bad = [m for m in methods if m not in ALLOWED_METHODS[self.quantity]]
        if bad:
            raise UsageError(f"method {bad[0]!r} does not apply to {self.quantity}; "
                             f"choose from {ALLOWED_METHODS[self.quantity]}")
        if not self.sweep or any(len(v) == 0 for v in self.sweep.values()):
            raise UsageError("sweep grid must be non-empty")
        for var in self.sweep:
            if var not in EXTRA_SWEEP_VARS and var not in KNOWN_KEYS:
                raise UsageError(f"unknown sweep variable {var!r}")
        if self.quantity == "coverage-k" and (self.k is None or self.k < 1):
            raise UsageError("coverage-k needs k >= 1")

    def grid(self) -> list[dict]:
        keys = list(self.sweep)
        return [dict(zip(keys, combo)) for combo in itertools.product(*self.sweep.values())]


def _point_params(base: ScenarioParams, point: dict) -> ScenarioParams:
    mapping = scenario_to_mapping(base)
    for var, value in point.items():
        if var == "mean_length_m":
            mapping["mean_half_length_m"] = value / 2.0
        elif var not in EXTRA_SWEEP_VARS:
            mapping[var] = value
    if "d_star_m" in point:
        for key in ("p", "sigma", "alpha_los", "tau"):
            mapping.pop(key, None)
    return scenario_from_mapping(mapping)


def _point_seed(seed: int, index: int, method_index: int) -> int:
    return int(np.random.SeedSequence([seed, index, method_index]).generate_state(1)[0])


def ergodic_config(params: ScenarioParams, seed: int) -> SimConfig:
    # long enough for the projection to sweep 10^4 mean half-lengths
    mu = min(l[1] for l in params.lanes)
    speed = max(params.v * params.d2 / params.height, params.v_o)
    if speed <= 0:
        raise UsageError("ergodic runs need v_mps > 0 or vo_mps > 0")
    return SimConfig(params, n_trials=1, seed=seed, mode="ergodic", horizon=1e4 / mu / speed)


def _evaluate(spec: ExperimentSpec, params: ScenarioParams, point: dict, method: str,
              seed: int) -> tuple[float, Optional[float]]:
    q = spec.quantity
    if q in ("los-single", "los-pair", "los-joint"):
        if q == "los-single":
            txs = [point.get("tx_x_m", spec.tx_x)]
        elif q == "los-pair":
            txs = [0.0, point.get("separation_m", spec.tx_positions[-1])]
        else:
            txs = list(spec.tx_positions)
        if method == "closed-form":
            if len(txs) == 1:
                return los_prob_single_multilane(params.lanes), None
            return los_prob_joint(params, txs), None
        est = sim_joint_los(SimConfig(params, spec.trials, seed, workers=1), txs)
        return est.value, est.stderr
    if q == "volume-fraction":
        lam, mu, _ = params.lanes[0]
        if method == "closed-form":
            return 1.0 - math.exp(-2 * lam / mu), None
        est = sim_volume_fraction(SimConfig(params, spec.trials, seed))
        return est.value, est.stderr
    if q == "ergodic":
        if method == "closed-form":
            return los_prob_single_multilane(params.lanes), None
        est = sim_ergodic_los(ergodic_config(params, seed), point.get("tx_x_m", spec.tx_x))
        return est.value, est.stderr
    query = CoverageQuery(params, k=spec.k if q == "coverage-k" else None, method=method,
                          budget=spec.trials if method != "nested-quadrature" else None,
                          eps_tail=spec.eps_tail, include_empty=spec.include_empty, seed=seed)
    res = full_coverage_prob(query) if query.k is None else k_los_prob(query)
    return res.value, res.stderr


def _run_point(spec: ExperimentSpec, index: int, point: dict) -> list:
    params = _point_params(spec.scenario, point)
    row: list = [point[v] for v in spec.sweep]
    for j, method in enumerate(spec.methods):
        value, stderr = _evaluate(spec, params, point, method, _point_seed(spec.seed, index, j))
        row.append(value)
        if method in STOCHASTIC:
            row.append(stderr if stderr is not None else 0.0)
    return row


def header(spec: ExperimentSpec) -> list[str]:
    cols = list(spec.sweep)
    for m in spec.methods:
        cols.append(m)
        if m in STOCHASTIC:
            cols.append(f"{m}_stderr")
    return cols


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def sidecar(spec: ExperimentSpec) -> dict[str, Any]:
    return {
        "name": spec.name,
        "quantity": spec.quantity,
        "methods": list(spec.methods),
        "sweep": {k: [float(v) for v in vals] for k, vals in spec.sweep.items()},
        "scenario": scenario_to_mapping(spec.scenario),
        "seed": spec.seed,
        "trials": spec.trials,
        "k": spec.k,
        "tx_positions_m": list(spec.tx_positions),
        "tx_x_m": spec.tx_x,
        "eps_tail": spec.eps_tail,
        "include_empty": spec.include_empty,
        "workers": spec.workers,
        "errata": ERRATA,
        "version": __version__,
    }


def run_experiment(spec: ExperimentSpec) -> tuple[list[str], list[list]]:
    """Evaluate every grid point and, if ``spec.out`` is set, write CSV plus JSON sidecar.

    Rows come back in grid order whatever the worker count.
    """
    points = spec.grid()
    if spec.workers > 1 and len(points) > 1:
        with ProcessPoolExecutor(spec.workers) as pool:
            rows = list(pool.map(_run_point, [spec] * len(points), range(len(points)), points))
    else:
        rows = [_run_point(spec, i, p) for i, p in enumerate(points)]
    cols = header(spec)
    if spec.out:
        out = Path(spec.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(cols)
            for row in rows:
                writer.writerow([_fmt(x) for x in row])
        out.with_suffix(".json").write_text(json.dumps(sidecar(spec), indent=2, sort_keys=True)
                                            + "\n", encoding="utf-8")
    return cols, rows


def _inclusive_range(start: float, stop: float, step: float) -> list[float]:
    count = int(round((stop - start) / step)) + 1
    return [start + i * step for i in range(count)]


def parse_grid(value) -> list[float]:
    """A list, a scalar, or a ``start:stop:step`` string (stop included)."""
    if isinstance(value, list):
        return [float(v) for v in value]
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return [float(value)]
    if isinstance(value, str) and value.count(":") == 2:
        start, stop, step = (float(x) for x in value.split(":"))
        if step <= 0:
            raise ConfigError("step must be positive", "sweep")
        return _inclusive_range(start, stop, step)
    raise ConfigError(f"cannot read grid {value!r}", "sweep")


def load_experiment(path, **overrides) -> ExperimentSpec:
    """Read an experiment file with an ``[experiment]`` section.

    The scenario comes from a ``scenario = <file>`` key, from the keys at the
    top of the file (before any section), or both (top-level keys override).
    """
    sections = read_sections(path)
    exp = dict(sections.get("experiment", {}))
    if not exp:
        raise ConfigError("missing [experiment] section")
    inline = sections.get("scenario", {})
    mapping: dict = {}
    if "scenario" in exp:
        base = read_sections(resolve_path(exp.pop("scenario")))
        mapping.update(base.get("scenario", {}))
    mapping.update(inline)
    params = scenario_from_mapping(mapping)
    sweep = {k[len("sweep."):]: parse_grid(v) for k, v in exp.items() if k.startswith("sweep.")}
    methods = exp.get("methods", [])
    if isinstance(methods, str):
        methods = [m.strip() for m in methods.split(",") if m.strip()]
    kwargs = dict(
        quantity=exp.get("quantity"),
        sweep=sweep,
        methods=tuple(methods),
        scenario=params,
        out=exp.get("out"),
        seed=int(exp.get("seed", 0)),
        trials=int(exp.get("trials", 20_000)),
        k=int(exp["k"]) if "k" in exp else None,
        tx_positions=tuple(float(x) for x in exp.get("tx_positions_m", [0.0, 10.0])),
        tx_x=float(exp.get("tx_x_m", 0.0)),
        eps_tail=float(exp.get("eps_tail", 1e-8)),
        include_empty=bool(exp.get("include_empty", False)),
        name=Path(path).stem,
    )
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentSpec(**kwargs)


def recipe(name: str, **overrides) -> ExperimentSpec:
    """Built-in sweeps: ``fig5`` (pair LOS vs separation), ``fig6`` (pair LOS vs
    obstacle density, d2 = 40 m) and ``fig8`` (full coverage vs obstacle length)."""
    if name == "fig5":
        kwargs = dict(quantity="los-pair", scenario=load_scenario("fig5"),
                      sweep={"separation_m": _inclusive_range(0, 300, 5)},
                      methods=("closed-form", "simulate"))
    elif name == "fig6":
        kwargs = dict(quantity="los-pair", scenario=load_scenario("fig6"),
                      sweep={"separation_m": [20.0, 50.0, 100.0],
                             "lambda_b_per_km": _inclusive_range(0, 30, 2)},
                      methods=("closed-form", "simulate"))
    elif name == "fig8":
        kwargs = dict(quantity="coverage-full", scenario=load_scenario("fig8"),
                      sweep={"lambda_b_per_km": [6.0, 10.0, 14.0],
                             "mean_length_m": _inclusive_range(1, 10, 1)},
                      methods=("conditional-mc", "nested-quadrature", "simulate"),
                      trials=100_000)
    else:
        raise UsageError(f"unknown recipe {name!r}; choose fig5, fig6 or fig8")
    kwargs["name"] = name
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentSpec(**kwargs)


# --------------------------------------------------------------------------
# validation report


@dataclass
class CheckRow:
    name: str
    passed: bool
    measured: float
    reference: float
    deviation: float
    tolerance: float
    detail: str = ""


def _row(name, measured, reference, tolerance, detail="") -> CheckRow:
    dev = abs(measured - reference)
    return CheckRow(name, bool(dev <= tolerance), float(measured), float(reference),
                    float(dev), float(tolerance), detail)


@dataclass
class ValidationReport:
    rows: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "rows": [asdict(r) for r in self.rows]}


def validate(params: ScenarioParams, budget: int = 100_000, seed: int = 0) -> ValidationReport:
    """Run every applicable cross-method check for one scenario.

    Monte-Carlo checks pass when the closed form lies within three standard
    errors; identities are checked to 1e-12.
    """
    rep = ValidationReport()
    rng = np.random.default_rng(seed)
    seeds = iter(np.random.SeedSequence(seed).generate_state(16))
    single = los_prob_single_multilane(params.lanes)

    est = sim_joint_los(SimConfig(params, budget, int(next(seeds))), [0.0])
    rep.rows.append(_row("los-single", est.value, single, 3 * est.stderr,
                         "multi-lane superposition" if params.is_multilane else ""))

    lam, mu, _ = params.lanes[0]
    vf = sim_volume_fraction(SimConfig(params, max(budget // 50, 100), int(next(seeds))))
    rep.rows.append(_row("volume-fraction", vf.value, 1 - math.exp(-2 * lam / mu),
                         3 * vf.stderr))

    if not params.is_multilane:
        for name, txs in (("los-pair", [0.0, 10.0]), ("los-joint-3", [0.0, 10.0, 30.0])):
            est = sim_joint_los(SimConfig(params, budget, int(next(seeds))), txs)
            rep.rows.append(_row(name, est.value, los_prob_joint(params, txs), 3 * est.stderr))
        rep.rows.append(_row("coincident-collapse", los_prob_joint(params, [5.0] * 4), single,
                             1e-12))
        worst_low, worst_high, worst_shift = 0.0, 0.0, 0.0
        for _ in range(50):
            n = int(rng.integers(1, 7))
            xs = np.sort(rng.uniform(-200, 200, n))
            joint = los_prob_joint(params, xs)
            worst_low = max(worst_low, single ** n - joint)
            worst_high = max(worst_high, joint - single)
            worst_shift = max(worst_shift, abs(los_prob_joint(params, xs + rng.normal(0, 100))
                                               - joint))
        rep.rows.append(_row("sandwich-lower", max(worst_low, 0.0), 0.0, 1e-12,
                             "single**n <= joint"))
        rep.rows.append(_row("sandwich-upper", max(worst_high, 0.0), 0.0, 1e-12,
                             "joint <= single"))
        rep.rows.append(_row("translation-invariance", worst_shift, 0.0, 1e-12))

    try:
        params.xi
        detectable = True
    except (NoDetectableRegion, ValueError):
        detectable = False
    if detectable:
        trials = simulate_coverage_trials(SimConfig(params, budget, int(next(seeds))))
        full_events = coverage_events(trials)
        full = full_events.mean()
        # a lone detectable transmitter gives full coverage but not two LOS links
        full_multi = (full_events & (trials[:, 0] >= 2)).mean()
        k2 = coverage_events(trials, 2).mean()
        k1 = coverage_events(trials, 1).mean()
        rep.rows.append(_row("ordering-simulated",
                             max(full_multi - k2, k2 - k1, full - k1, 0.0), 0.0, 0.0,
                             f"full={full:.6f} full(n>=2)={full_multi:.6f} "
                             f"k2={k2:.6f} k1={k1:.6f}"))
        if not params.is_multilane:
            p_full = float(full)
            se_sim = math.sqrt(p_full * (1 - p_full) / len(trials))
            cmc_seed = int(next(seeds))
            cmc = full_coverage_prob(CoverageQuery(params, budget=budget, seed=cmc_seed))
            tol = 3 * math.hypot(cmc.stderr, se_sim)
            rep.rows.append(_row("coverage-full-cmc-vs-sim", cmc.value, p_full, tol))
            n_max = poisson_truncation(params.lambda_t * params.xi, 1e-8)
            if n_max <= analytic_cap(1):
                try:
                    q1 = k_los_prob(CoverageQuery(params, k=1, budget=budget, seed=cmc_seed))
                    q2 = k_los_prob(CoverageQuery(params, k=2, budget=budget, seed=cmc_seed))
                    multi = cmc.value - cmc.terms[:2].sum()
                    rep.rows.append(_row(
                        "ordering-analytic",
                        max(multi - q2.value, q2.value - q1.value, cmc.value - q1.value, 0.0),
                        0.0, 1e-12,
                        f"full={cmc.value:.6f} full(n>=2)={multi:.6f} "
                        f"k2={q2.value:.6f} k1={q1.value:.6f}"))
                    p1 = float(k1)
                    se1 = math.sqrt(p1 * (1 - p1) / len(trials))
                    rep.rows.append(_row("coverage-k1-cmc-vs-sim", q1.value, p1,
                                         3 * math.hypot(q1.stderr, se1)))
                except NumericalBudgetError:
                    pass

    if params.v > 0 or params.v_o > 0:
        est = sim_ergodic_los(ergodic_config(params, int(next(seeds))))
        rep.rows.append(_row("ergodic-time-average", est.value, single, 3 * est.stderr))
    return rep
