"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (add ``-s`` to see the lines
inline; they are also repeated in the terminal summary).
"""

import math
import subprocess
import sys
import time

import numpy as np
import pytest

from loscov.analytic import (los_prob_joint, los_prob_projected, los_prob_single,
                             los_prob_single_multilane)
from loscov.config import load_scenario
from loscov.coverage import (CoverageQuery, analytic_cap, bonferroni_partial_sums,
                             conditional_expectation, coverage_given_positions, full_coverage_prob, k_los_prob,
                             poisson_truncation)
from loscov.experiments import ergodic_config, recipe, run_experiment
from loscov.model import ScenarioParams
from loscov.simulate import (SimConfig, sim_coverage, sim_ergodic_los, sim_joint_los,
                             sim_los_single, sim_volume_fraction)

TRIALS = 100_000
EPS = np.finfo(float).eps


def _draws(seed, count=20):
    rng = np.random.default_rng(seed)
    lam = rng.uniform(1, 30, count) / 1000.0
    half = rng.uniform(1, 10, count)
    return rng, list(zip(lam, 1.0 / half))


def test_criterion_1_single_transmitter(acceptance_log):
    start = time.perf_counter()
    _, draws = _draws(101)
    inside = 0
    for i, (lam, mu) in enumerate(draws):
        params = ScenarioParams(0.0, lam, mu, 10, 10)
        inside += sim_los_single(SimConfig(params, TRIALS, seed=1000 + i)).covers(
            los_prob_single(lam, mu))
    elapsed = time.perf_counter() - start
    ok = inside >= 19 and elapsed <= 60
    acceptance_log(1, ok, f"{inside}/20 within 3 sigma, {elapsed:.1f} s")
    assert ok


def test_criterion_2_joint_los(acceptance_log):
    rng, draws = _draws(202)
    inside = 0
    worst_collapse = 0.0
    for i, (lam, mu) in enumerate(draws):
        params = ScenarioParams(0.0, lam, mu, 10, 10)
        n = int(rng.integers(2, 7))
        xs = np.sort(rng.uniform(-200, 200, n))
        inside += sim_joint_los(SimConfig(params, TRIALS, seed=2000 + i), xs).covers(
            los_prob_joint(params, xs))
        single = los_prob_single(lam, mu)
        same = los_prob_joint(params, np.full(n, xs[0]))
        worst_collapse = max(worst_collapse, abs(same - single) / single)
    ok = inside >= 19 and worst_collapse <= 2 * EPS
    acceptance_log(2, ok, f"{inside}/20 within 3 sigma, coincident collapse rel. error "
                          f"{worst_collapse:.1e}")
    assert ok


def test_criterion_3_pair_curve(acceptance_log):
    spec = recipe("fig5", methods=("closed-form",))
    params = spec.scenario
    lam, mu = params.single_lane()
    _, rows = run_experiment(spec)
    d = np.array([r[0] for r in rows])
    p = np.array([r[1] for r in rows])
    at_zero = abs(p[0] - los_prob_single(lam, mu))
    far = abs(p[d == 300.0][0] - math.exp(-4 * lam / mu))
    monotone = bool(np.all(np.diff(p) <= 0))
    ok = at_zero <= EPS and monotone and far <= 1e-4
    acceptance_log(3, ok, f"|P(0)-single|={at_zero:.1e}, monotone={monotone}, "
                          f"|P(300)-limit|={far:.1e}")
    assert ok


@pytest.mark.slow
def test_criterion_4_full_coverage_triple(acceptance_log):
    start = time.perf_counter()
    base = load_scenario("fig8")
    lengths = np.arange(1.0, 11.0)
    rng = np.random.default_rng(404)
    failures = []
    curves = {}
    for lam_km in (6.0, 10.0, 14.0):
        for j, length in enumerate(lengths):
            params = base.replace(lambda_b=lam_km / 1000.0, mu=2.0 / length)
            seed = int(lam_km) * 100 + j
            cmc = full_coverage_prob(CoverageQuery(params, budget=TRIALS, seed=seed))
            quad = full_coverage_prob(CoverageQuery(params, method="nested-quadrature",
                                                    simplex_samples=TRIALS, seed=seed + 1))
            sim = sim_coverage(SimConfig(params, TRIALS, seed=seed + 2))
            est = {"cmc": (cmc.value, cmc.stderr), "quad": (quad.value, quad.stderr),
                   "sim": (sim.value, sim.stderr)}
            for a, b in (("cmc", "quad"), ("cmc", "sim"), ("quad", "sim")):
                gap = abs(est[a][0] - est[b][0])
                if gap > 3 * math.hypot(est[a][1], est[b][1]):
                    failures.append(f"{a}/{b} at lambda_b={lam_km}, length={length}")
            # the deterministic n <= 3 expectations against sorted-uniform sampling
            query = CoverageQuery(params, method="nested-quadrature")
            half = params.xi_hat / 2
            for n in (1, 2, 3):
                rule, _ = conditional_expectation(n, query)
                x = np.sort(rng.uniform(-half, half, (TRIALS, n)), axis=1)
                vals = los_prob_projected(x, params.lambda_b, params.mu)
                if abs(rule - vals.mean()) > 3 * vals.std(ddof=1) / math.sqrt(TRIALS) + 1e-12:
                    failures.append(f"n={n} expectation at lambda_b={lam_km}, length={length}")
            for name, (value, _) in est.items():
                curves.setdefault((lam_km, name), []).append(value)
    not_monotone = [key for key, c in curves.items() if np.any(np.diff(c) > 0)]
    elapsed = time.perf_counter() - start
    ok = not failures and not not_monotone and elapsed <= 600
    acceptance_log(4, ok, f"{len(failures)} of 180 checks failed, "
                          f"non-monotone curves={not_monotone}, {elapsed:.0f} s"
                          + (f", failures={failures}" if failures else ""))
    assert ok


KCOV_DENSITIES = (2.0, 6.0, 10.0, 20.0, 30.0)


def _kcov_grid():
    base = load_scenario("kcov")
    return [base.replace(lambda_b=lam / 1000.0) for lam in KCOV_DENSITIES]


def test_criterion_5_k_los(acceptance_log):
    base = load_scenario("kcov")
    mean = base.lambda_t * base.xi
    n_max = poisson_truncation(mean, 1e-8)
    failures = []
    for i, params in enumerate(_kcov_grid()):
        full_res = full_coverage_prob(CoverageQuery(params, method="nested-quadrature"))
        values = {None: full_res.value}
        for k in (1, 2):
            values[k] = k_los_prob(CoverageQuery(params, k=k, method="nested-quadrature",
                                                 seed=600 + i)).value
        for k, value in values.items():
            sim = sim_coverage(SimConfig(params, TRIALS, seed=700 + 10 * i + (k or 0)), k=k)
            if not sim.covers(value):
                failures.append(f"k={k} at lambda_b={params.lambda_b * 1000:g}")
        # containment that holds event by event
        multi = full_res.value - full_res.terms[:2].sum()
        if not (multi <= values[2] + 1e-12 and values[2] <= values[1] + 1e-12
                and values[None] <= values[1] + 1e-12):
            failures.append(f"containment at lambda_b={params.lambda_b * 1000:g}")

    rng = np.random.default_rng(55)
    bracket_failures = 0
    for _ in range(300):
        lam, mu = base.single_lane()
        lam = lam * rng.uniform(0.2, 3.0)
        n = max(1, rng.poisson(mean))
        x = np.sort(rng.uniform(-base.xi_hat / 2, base.xi_hat / 2, n))
        # crowd some layouts so the correction terms are not negligible
        if rng.random() < 0.5:
            x = np.sort(rng.uniform(-20, 20, n))
        for k in range(1, n + 1):
            exact = float(coverage_given_positions(x, lam, mu, k, backend="enumerate"))
            partial = bonferroni_partial_sums(x, lam, mu, k)
            # rounding in the alternating sum grows with the size of its terms
            tol = 64 * EPS * max(1.0, np.abs(partial).max())
            upper = partial[0::2] >= exact - tol
            lower = partial[1::2] <= exact + tol
            bracket_failures += int(not (upper.all() and lower.all()))
    ok = mean <= 4 and n_max <= analytic_cap(2) and not failures and bracket_failures == 0
    acceptance_log(5, ok, f"mean={mean:.3f}, analytic vs simulation and containment "
                          f"failures={failures}, Bonferroni failures={bracket_failures}; "
                          "literal full<=k2 ordering tested separately")
    assert ok


@pytest.mark.xfail(strict=True, reason="full coverage with a single detectable transmitter "
                   "is not contained in the at-least-2 event")
def test_criterion_5_literal_ordering(acceptance_log):
    violations = []
    for params in _kcov_grid():
        full = full_coverage_prob(CoverageQuery(params, method="nested-quadrature")).value
        k2 = k_los_prob(CoverageQuery(params, k=2, method="nested-quadrature")).value
        k1 = k_los_prob(CoverageQuery(params, k=1, method="nested-quadrature")).value
        if not (full <= k2 <= k1):
            violations.append(f"lambda_b={params.lambda_b * 1000:g}: full={full:.4f} "
                              f"k2={k2:.4f}")
    acceptance_log("5-ordering", not violations,
                   f"full<=k2<=k1 on every grid point; violations={violations}")
    assert not violations


def test_criterion_6_volume_fraction(acceptance_log):
    inside = []
    for i, (lam_km, half) in enumerate(((20.0, 2.5), (5.0, 1.0), (30.0, 10.0))):
        params = ScenarioParams(0.0, lam_km / 1000.0, 1.0 / half, 10, 10)
        est = sim_volume_fraction(SimConfig(params, 4000, seed=60 + i))
        inside.append(est.covers(1 - los_prob_single(params.lambda_b, params.mu)))
    ok = all(inside)
    acceptance_log(6, ok, f"within 3 sigma at three parameter sets: {inside}")
    assert ok


def test_criterion_7_two_lanes(acceptance_log):
    configs = (
        dict(lambda_b=(0.01, 0.01), mu=(0.4, 0.4), lane_heights=(5.0, 10.0), d1=10, d2=10),
        dict(lambda_b=(0.005, 0.015), mu=(1.0, 0.25), lane_heights=(3.0, 15.0), d1=15, d2=10),
    )
    inside = []
    for i, cfg in enumerate(configs):
        params = ScenarioParams(0.0, **cfg)
        est = sim_los_single(SimConfig(params, TRIALS, seed=70 + i), tx_x=13.0)
        inside.append(est.covers(los_prob_single_multilane(params.lanes)))
    ok = all(inside)
    acceptance_log(7, ok, f"within 3 sigma at two lane-height configurations: {inside}")
    assert ok


def test_criterion_8_ergodic(acceptance_log):
    params = load_scenario("standard").replace(v=10.0, v_o=0.0)
    cfg = ergodic_config(params, seed=80)
    est = sim_ergodic_los(cfg)
    reference = los_prob_single(*params.single_lane())
    long_enough = params.v * cfg.horizon >= 1e4 / params.mu
    ok = long_enough and est.covers(reference)
    acceptance_log(8, ok, f"time average {est.value:.5f} +- {est.stderr:.5f} "
                          f"vs {reference:.5f}, vT={params.v * cfg.horizon:g} m")
    assert ok


def test_criterion_9_cli_determinism(acceptance_log, tmp_path):
    spec_file = tmp_path / "coverage.cfg"
    spec_file.write_text(
        "[experiment]\n"
        "scenario = kcov\n"
        "quantity = coverage-full\n"
        "methods = conditional-mc, simulate\n"
        "sweep.lambda_b_per_km = [5, 15]\n"
        "trials = 4000\n", encoding="utf-8")
    jobs = {
        "recipe": ["--recipe", "fig5", "--trials", "2000"],
        "spec": ["--spec", str(spec_file)],
    }
    identical = {}
    for name, args in jobs.items():
        outputs = []
        for rep in range(2):
            out = tmp_path / f"{name}{rep}.csv"
            subprocess.run([sys.executable, "-m", "loscov.cli", "sweep", *args, "--seed", "17",
                            "--workers", "2", "--out", str(out)], check=True,
                           capture_output=True)
            outputs.append(out.read_bytes())
        identical[name] = outputs[0] == outputs[1] and len(outputs[0]) > 0
    ok = all(identical.values())
    acceptance_log(9, ok, f"byte-identical reruns: {identical}")
    assert ok
