"""Full-LOS and k-LOS coverage of the typical receiver.

The number of detectable transmitters is Poisson with mean ``lambda_t * xi``
and, given their number, their projections onto the obstacle line are
i.i.d. uniform on ``[-xi_hat/2, xi_hat/2]``.  Blockage is integrated out in
closed form, so both evaluators here only average over transmitter
positions:

``conditional-mc``
    Sample the transmitter process, evaluate the exact conditional coverage
    probability, average.  Unbiased for the untruncated series.
``nested-quadrature``
    Truncated Poisson sum; the ordered-simplex expectation is computed with
    nested Gauss-Legendre rules for up to three transmitters and with sorted
    uniform samples beyond that.
"""

from __future__ import annotations

import itertools
import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .analytic import gap_gain, los_prob_projected
from .model import NoDetectableRegion, ProbEstimate, ScenarioParams, as_rng

METHODS = ("conditional-mc", "nested-quadrature", "simulate")
DEFAULT_SAMPLES = 100_000
DEFAULT_NODES = 64
DEFAULT_SIMPLEX_SAMPLES = 20_000
DEFAULT_EPS_TAIL = 1e-8
# Largest transmitter count handled by exact inclusion-exclusion.  The
# enumeration limits bound the 2**n subset loop; the chain recursion is
# polynomial and is limited by cancellation in the alternating sum instead.
ENUMERATE_CAP = {1: 10, 2: 8}
CHAIN_CAP = 24
QUADRATURE_MAX_N = 3
_CHUNK = 4096


class NumericalBudgetError(RuntimeError):
    """The requested evaluation needs more transmitters than the analytic cap allows."""


# --------------------------------------------------------------------------
# Poisson truncation


def poisson_pmf(n: int, mean: float) -> float:
    if mean == 0:
        return 1.0 if n == 0 else 0.0
    return math.exp(n * math.log(mean) - mean - math.lgamma(n + 1))


def poisson_tail(n: int, mean: float) -> float:
    """``P(Poisson(mean) > n)`` by summing the pmf upward from ``n + 1``."""
    if mean == 0:
        return 0.0
    total = 0.0
    i = n + 1
    term = poisson_pmf(i, mean)
    while True:
        total += term
        i += 1
        term *= mean / i
        if i > mean and term < 1e-18 * total:
            return total


def poisson_truncation(mean: float, eps_tail: float = DEFAULT_EPS_TAIL) -> int:
    """Smallest ``N`` with ``P(Poisson(mean) > N) < eps_tail``."""
    if mean < 0:
        raise ValueError("mean must be non-negative")
    if mean == 0 or eps_tail >= 1:
        return 0
    n = int(mean)
    # tail is decreasing in n; walk down then up to find the first crossing
    while n > 0 and poisson_tail(n - 1, mean) < eps_tail:
        n -= 1
    while poisson_tail(n, mean) >= eps_tail:
        n += 1
    return n


# --------------------------------------------------------------------------
# conditional (given sorted projections) coverage probabilities


def subset_sums(x_hat, lambda_b: float, mu: float) -> np.ndarray:
    """``e_j = sum over j-subsets S of P(LOS to all of S)`` for ``j = 1..n``.

    ``x_hat`` is sorted along its last axis; leading axes are batch axes.
    The joint probability of a subset only depends on gaps between
    consecutive members, so the sums follow from a recursion on the last
    member of the subset.
    """
    x_hat = np.asarray(x_hat, dtype=float)
    n = x_hat.shape[-1]
    p = math.exp(-2.0 * lambda_b / mu)
    gaps = x_hat[..., None, :] - x_hat[..., :, None]  # [a, b] = x_b - x_a
    link = np.triu(np.exp(gap_gain(np.maximum(gaps, 0.0), lambda_b, mu)), k=1)
    ends = np.full(x_hat.shape, p)
    sums = np.empty(x_hat.shape[:-1] + (n,))
    sums[..., 0] = ends.sum(axis=-1)
    for j in range(1, n):
        ends = p * np.einsum("...a,...ab->...b", ends, link)
        sums[..., j] = ends.sum(axis=-1)
    return sums


def subset_sums_enumerated(x_hat, lambda_b: float, mu: float) -> np.ndarray:
    """Same as :func:`subset_sums` by walking every subset; one configuration only."""
    x_hat = np.asarray(x_hat, dtype=float)
    n = len(x_hat)
    sums = np.zeros(n)
    for j in range(1, n + 1):
        for idx in itertools.combinations(range(n), j):
            sums[j - 1] += los_prob_projected(x_hat[list(idx)], lambda_b, mu)
    return sums


def at_least_k_weights(n: int, k: int) -> np.ndarray:
    """Coefficients ``c_j`` with ``P(at least k events) = sum_j c_j e_j``."""
    j = np.arange(1, n + 1)
    w = np.zeros(n)
    m = j >= k
    w[m] = (-1.0) ** (j[m] - k) * np.array([math.comb(int(jj) - 1, k - 1) for jj in j[m]])
    return w


def bonferroni_partial_sums(x_hat, lambda_b: float, mu: float, k: int = 1) -> np.ndarray:
    """Partial sums of the at-least-``k`` series truncated after ``j = k, k+1, ..., n``.

    Alternate entries are upper and lower bounds of the full sum.
    """
    e = subset_sums(x_hat, lambda_b, mu)
    n = e.shape[-1]
    terms = e * at_least_k_weights(n, k)
    return np.cumsum(terms, axis=-1)[..., k - 1:]


def coverage_given_positions(x_hat, lambda_b: float, mu: float, k: Optional[int] = None,
                             backend: str = "chain") -> np.ndarray:
    """Conditional coverage probability for sorted projections.

    ``k=None`` means full coverage, otherwise at least ``k`` LOS links.
    """
    x_hat = np.asarray(x_hat, dtype=float)
    n = x_hat.shape[-1]
    if k is None:
        return los_prob_projected(x_hat, lambda_b, mu)
    if n < k:
        return np.zeros(x_hat.shape[:-1])
    if backend == "chain":
        e = subset_sums(x_hat, lambda_b, mu)
    elif backend == "enumerate":
        flat = x_hat.reshape(-1, n)
        e = np.array([subset_sums_enumerated(row, lambda_b, mu) for row in flat])
        e = e.reshape(x_hat.shape[:-1] + (n,))
    else:
        raise ValueError(f"unknown inclusion-exclusion backend {backend!r}")
    out = e @ at_least_k_weights(n, k)
    return np.clip(out, 0.0, 1.0)


def analytic_cap(k: Optional[int], backend: str = "chain") -> Optional[int]:
    if k is None:
        return None
    if backend == "enumerate":
        return ENUMERATE_CAP.get(k, ENUMERATE_CAP[2])
    return CHAIN_CAP


# --------------------------------------------------------------------------
# ordered-simplex quadrature


def _graded_panels(lo, hi, scale: float, nodes: int):
    """Gauss-Legendre nodes on ``[lo, hi]`` (arrays), refined near both ends.

    Breakpoints sit at ``scale, 4*scale, 16*scale`` from each end and at the
    midpoint, since the integrand varies on the scale of one mean obstacle
    half-length near coincident transmitters.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if nodes >= 8:
        offsets = np.array([1.0, 4.0, 16.0]) * scale
        inner = np.concatenate([
            lo[:, None] + offsets,
            ((lo + hi) / 2)[:, None],
            hi[:, None] - offsets[::-1],
        ], axis=1)
        inner = np.sort(np.clip(inner, lo[:, None], hi[:, None]), axis=1)
        edges = np.concatenate([lo[:, None], inner, hi[:, None]], axis=1)
        per_panel = nodes // 8
    else:
        edges = np.stack([lo, hi], axis=1)
        per_panel = nodes
    t, w = np.polynomial.legendre.leggauss(per_panel)
    a = edges[:, :-1, None]
    b = edges[:, 1:, None]
    pts = (a + b) / 2 + (b - a) / 2 * t
    wts = (b - a) / 2 * w
    return pts.reshape(len(lo), -1), wts.reshape(len(lo), -1)


def ordered_simplex_rule(n: int, lo: float, hi: float, nodes: int = DEFAULT_NODES,
                         scale: Optional[float] = None):
    """Nested Gauss-Legendre rule for ``lo <= x_1 <= ... <= x_n <= hi``.

    Returns ``(points, weights)`` with ``points`` of shape ``(P, n)``.  The
    weights are normalised to the law of the order statistics of ``n``
    i.i.d. uniforms, so they sum to one.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if scale is None:
        scale = (hi - lo) / 64
    pts = np.empty((1, 0))
    wts = np.ones(1)
    for _ in range(n):
        start = np.full(len(pts), lo) if pts.shape[1] == 0 else pts[:, -1]
        x, w = _graded_panels(start, np.full(len(pts), hi), scale, nodes)
        m = x.shape[1]
        pts = np.concatenate([np.repeat(pts, m, axis=0), x.reshape(-1, 1)], axis=1)
        wts = (wts[:, None] * w).reshape(-1)
    wts = wts * math.factorial(n) / (hi - lo) ** n
    return pts, wts


# --------------------------------------------------------------------------
# queries and results


@dataclass(frozen=True)
class CoverageQuery:
    """What to compute and how.

    ``k=None`` asks for full coverage; an integer asks for LOS to at least
    ``k`` detectable transmitters.  ``budget`` is the sample count for the
    Monte-Carlo methods and the Gauss-Legendre nodes per dimension for
    ``nested-quadrature`` (whose n > 3 terms use ``simplex_samples``).
    """

    params: ScenarioParams
    k: Optional[int] = None
    method: str = "conditional-mc"
    budget: Optional[int] = None
    eps_tail: float = DEFAULT_EPS_TAIL
    include_empty: bool = False
    seed: int = 0
    simplex_samples: int = DEFAULT_SIMPLEX_SAMPLES
    backend: str = "chain"
    cap: Optional[int] = None

    def __post_init__(self):
        if self.k is not None and self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0 < self.eps_tail < 1:
            raise ValueError("eps_tail must lie in (0, 1)")
        if self.budget is not None and self.budget <= 0:
            raise ValueError("budget must be positive")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")

    @property
    def kind(self) -> str:
        return "full" if self.k is None else f"at-least-{self.k}"

    @property
    def effective_cap(self) -> Optional[int]:
        return self.cap if self.cap is not None else analytic_cap(self.k, self.backend)


@dataclass
class CoverageResult:
    estimate: ProbEstimate
    n_max: int
    terms: np.ndarray  # contribution of n = 0..n_max
    term_stderr: np.ndarray
    wall_clock: float
    diagnostics: list = field(default_factory=list)

    @property
    def value(self) -> float:
        return self.estimate.value

    @property
    def stderr(self) -> float:
        return self.estimate.stderr or 0.0

    def to_csv(self, path) -> None:
        """Dump the per-n contributions."""
        import csv

        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["n", "contribution", "stderr"])
            for n, (c, s) in enumerate(zip(self.terms, self.term_stderr)):
                writer.writerow([n, repr(float(c)), repr(float(s))])


def _empty_value(query: CoverageQuery) -> float:
    return 1.0 if (query.k is None and query.include_empty) else 0.0


def _degenerate(query: CoverageQuery, start: float, err: Exception) -> CoverageResult:
    warnings.warn(f"{err}; returning the empty-window value", RuntimeWarning, stacklevel=3)
    value = _empty_value(query)
    est = ProbEstimate(value, "closed-form", n_max=0, tail_bound=0.0)
    return CoverageResult(est, 0, np.array([value]), np.zeros(1), time.perf_counter() - start,
                          [str(err)])


def _conditional_values(x_hat, params: ScenarioParams, query: CoverageQuery) -> np.ndarray:
    lambda_b, mu = params.single_lane()
    out = np.empty(x_hat.shape[0])
    for s in range(0, len(out), _CHUNK):
        out[s:s + _CHUNK] = coverage_given_positions(
            x_hat[s:s + _CHUNK], lambda_b, mu, query.k, query.backend)
    return out


def _check_cap(n: int, query: CoverageQuery) -> None:
    cap = query.effective_cap
    if cap is not None and n > cap:
        raise NumericalBudgetError(
            f"{query.kind} coverage needs up to n={n} transmitters but the analytic cap is "
            f"{cap}; use method='simulate' or a looser eps_tail"
        )


def _conditional_mc(query: CoverageQuery) -> CoverageResult:
    start = time.perf_counter()
    params = query.params
    params.single_lane()
    try:
        xi = params.xi
    except NoDetectableRegion as err:
        return _degenerate(query, start, err)
    half = params.xi_hat / 2
    mean = params.lambda_t * xi
    samples = query.budget or DEFAULT_SAMPLES
    rng = as_rng(query.seed)
    counts = rng.poisson(mean, samples)
    values = np.zeros(samples)
    values[counts == 0] = _empty_value(query)
    n_top = int(counts.max(initial=0))
    if query.k is not None:
        _check_cap(n_top, query)
    for n in range(1, n_top + 1):
        idx = np.flatnonzero(counts == n)
        if idx.size == 0:
            continue
        x_hat = np.sort(rng.uniform(-half, half, (idx.size, n)), axis=1)
        values[idx] = _conditional_values(x_hat, params, query)
    terms = np.bincount(counts, weights=values, minlength=n_top + 1) / samples
    sq = np.bincount(counts, weights=values ** 2, minlength=n_top + 1) / samples
    term_se = np.sqrt(np.maximum(sq - terms ** 2, 0.0) / samples)
    value = float(values.mean())
    stderr = float(values.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    n_max = poisson_truncation(mean, query.eps_tail)
    est = ProbEstimate(value, "mc", stderr=stderr, n_samples=samples, n_max=n_max,
                       extra={"evaluator": "conditional-mc", "largest_n_sampled": n_top})
    return CoverageResult(est, n_max, terms, term_se, time.perf_counter() - start)


def conditional_expectation(n: int, query: CoverageQuery, rng=None):
    """Expected conditional coverage given ``n`` detectable transmitters.

    Returns ``(value, stderr)``; the stderr is zero when a deterministic rule
    was used (``n <= 3``).
    """
    params = query.params
    lambda_b, mu = params.single_lane()
    if query.k is not None and n < query.k:
        return 0.0, 0.0
    half = params.xi_hat / 2
    if n <= QUADRATURE_MAX_N:
        nodes = query.budget or DEFAULT_NODES
        pts, wts = ordered_simplex_rule(n, -half, half, nodes, scale=1.0 / mu)
        vals = _conditional_values(pts, params, query)
        return float(np.clip(wts @ vals, 0.0, 1.0)), 0.0
    rng = as_rng(rng)
    m = query.simplex_samples
    x_hat = np.sort(rng.uniform(-half, half, (m, n)), axis=1)
    vals = _conditional_values(x_hat, params, query)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(m))


def _nested_quadrature(query: CoverageQuery) -> CoverageResult:
    start = time.perf_counter()
    params = query.params
    params.single_lane()
    try:
        xi = params.xi
    except NoDetectableRegion as err:
        return _degenerate(query, start, err)
    mean = params.lambda_t * xi
    n_max = poisson_truncation(mean, query.eps_tail)
    if query.k is not None:
        _check_cap(n_max, query)
    seeds = np.random.SeedSequence(query.seed).spawn(n_max + 1)
    terms = np.zeros(n_max + 1)
    term_se = np.zeros(n_max + 1)
    terms[0] = poisson_pmf(0, mean) * _empty_value(query)
    for n in range(1, n_max + 1):
        w = poisson_pmf(n, mean)
        e, se = conditional_expectation(n, query, np.random.default_rng(seeds[n]))
        terms[n] = w * e
        term_se[n] = w * se
    value = float(np.clip(terms.sum(), 0.0, 1.0))
    stderr = float(np.sqrt(np.sum(term_se ** 2)))
    est = ProbEstimate(value, "quadrature", stderr=stderr,
                       n_samples=query.simplex_samples if n_max > QUADRATURE_MAX_N else None,
                       n_max=n_max, tail_bound=poisson_tail(n_max, mean),
                       extra={"evaluator": "nested-quadrature"})
    return CoverageResult(est, n_max, terms, term_se, time.perf_counter() - start)


def _simulated(query: CoverageQuery) -> CoverageResult:
    from .simulate import SimConfig, sim_coverage

    start = time.perf_counter()
    cfg = SimConfig(query.params, n_trials=query.budget or DEFAULT_SAMPLES, seed=query.seed)
    try:
        sim = sim_coverage(cfg, k=query.k, include_empty=query.include_empty)
    except NoDetectableRegion as err:
        return _degenerate(query, start, err)
    est = ProbEstimate(sim.value, "mc", stderr=sim.stderr, n_samples=sim.n_trials,
                       extra={"evaluator": "simulate"})
    return CoverageResult(est, 0, np.array([]), np.array([]), time.perf_counter() - start)


def _evaluate(query: CoverageQuery) -> CoverageResult:
    if query.method == "conditional-mc":
        return _conditional_mc(query)
    if query.method == "nested-quadrature":
        return _nested_quadrature(query)
    return _simulated(query)


def full_coverage_prob(query: CoverageQuery) -> CoverageResult:
    """Probability that the typical receiver sees every detectable transmitter."""
    if query.k is not None:
        raise ValueError("full_coverage_prob expects k=None; use k_los_prob")
    return _evaluate(query)


def k_los_prob(query: CoverageQuery) -> CoverageResult:
    """Probability that the typical receiver sees at least ``query.k`` detectable transmitters."""
    if query.k is None:
        raise ValueError("k_los_prob needs an integer k")
    return _evaluate(query)
