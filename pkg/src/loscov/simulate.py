"""Monte-Carlo oracle: sample every process and apply the exact geometry.

Trials are processed in fixed-size blocks.  Each block draws from its own
stream spawned from the master seed, so an estimate depends only on
``(seed, n_trials)`` and not on how blocks are scheduled over workers.

Within a block all trials are laid side by side on one long line (trial
``t`` is shifted by ``t * stride``), which turns the per-trial "is this
point covered" question into a single sorted-union lookup.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .model import ScenarioParams, covered, edge_margin

BLOCK = 2000
ERGODIC_BATCHES = 30


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    ``half_window`` is the half-length of the region of the obstacle line
    that has to be populated; ``None`` picks the smallest region the
    requested quantity needs.  Ergodic runs use ``horizon`` (s) and ``dt`` (s).
    """

    params: ScenarioParams
    n_trials: int = 100_000
    seed: int = 0
    half_window: Optional[float] = None
    margin: Optional[float] = None
    mode: str = "snapshot"
    horizon: Optional[float] = None
    dt: Optional[float] = None
    workers: int = 1

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if self.mode not in ("snapshot", "ergodic"):
            raise ValueError(f"unknown mode {self.mode!r}")

    def lane_margin(self, mu: float) -> float:
        return edge_margin(mu) if self.margin is None else self.margin


@dataclass(frozen=True)
class SimEstimate:
    value: float
    stderr: float
    n_trials: int
    seed: int
    mode: str = "snapshot"
    # fewer than 30 successes or failures: the normal interval is unreliable
    low_count: bool = False

    def covers(self, reference: float, n_sigma: float = 3.0, slack: float = 0.0) -> bool:
        return abs(self.value - reference) <= n_sigma * self.stderr + slack


def bernoulli_estimate(hits: np.ndarray, seed: int, mode: str = "snapshot") -> SimEstimate:
    n = hits.size
    successes = int(np.count_nonzero(hits))
    p = successes / n
    return SimEstimate(p, math.sqrt(p * (1 - p) / n), n, seed, mode,
                       low_count=min(successes, n - successes) < 30)


def _block_sizes(n_trials: int) -> list[int]:
    full, rest = divmod(n_trials, BLOCK)
    return [BLOCK] * full + ([rest] if rest else [])


def _run_blocks(fn, config: SimConfig, *args) -> list:
    sizes = _block_sizes(config.n_trials)
    seeds = np.random.SeedSequence(config.seed).spawn(len(sizes))
    jobs = [(config, size, seq) + args for size, seq in zip(sizes, seeds)]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            return list(pool.map(fn, *zip(*jobs)))
    return [fn(*job) for job in jobs]


def _max_lane_fraction(params: ScenarioParams) -> float:
    return max(params.lane_heights) / params.height


def _lane_obstacles(rng, n_trials: int, lam: float, mu: float, lo: float, hi: float):
    """Obstacles of one lane for ``n_trials`` scenes: (trial index, left, right)."""
    counts = rng.poisson(lam * (hi - lo), n_trials) if lam > 0 else np.zeros(n_trials, int)
    trial = np.repeat(np.arange(n_trials), counts)
    centers = rng.uniform(lo, hi, trial.size)
    left = centers - rng.exponential(1.0 / mu, trial.size)
    right = centers + rng.exponential(1.0 / mu, trial.size)
    return trial, left, right


def _blocked_in_trials(params: ScenarioParams, rng, n_trials: int, lo: float, hi: float,
                       trial_of_point: np.ndarray, tx_x: np.ndarray, config: SimConfig):
    """Blockage indicator of each (trial, transmitter) path from a receiver at the origin.

    Obstacle centers for every lane are drawn on ``[lo, hi]`` widened by the
    edge margin.
    """
    blocked = np.zeros(tx_x.shape, dtype=bool)
    for lam, mu, h in params.lanes:
        m = config.lane_margin(mu)
        trial, left, right = _lane_obstacles(rng, n_trials, lam, mu, lo - m, hi + m)
        if trial.size == 0 or tx_x.size == 0:
            continue
        q = tx_x * (h / params.height)
        reach = max(np.max(right) - (hi + m), (lo - m) - np.min(left), 0.0)
        stride = (hi - lo) + 2 * m + 2 * reach + 1.0
        off = trial * stride
        blocked |= covered(q + trial_of_point * stride, left + off, right + off)
    return blocked


def _fixed_tx_block(config: SimConfig, size: int, seq, tx_x: np.ndarray):
    rng = np.random.default_rng(seq)
    params = config.params
    half = config.half_window
    if half is None:
        half = float(np.max(np.abs(tx_x))) * _max_lane_fraction(params)
    n = len(tx_x)
    trial_of_point = np.repeat(np.arange(size), n)
    pts = np.tile(tx_x, size)
    blocked = _blocked_in_trials(params, rng, size, -half, half, trial_of_point, pts, config)
    return ~blocked.reshape(size, n).any(axis=1)


def sim_joint_los(config: SimConfig, txs: Sequence[float]) -> SimEstimate:
    """Fraction of scenes in which the origin sees every transmitter in ``txs``."""
    tx_x = np.asarray(getattr(txs, "x", txs), dtype=float).reshape(-1)
    hits = np.concatenate(_run_blocks(_fixed_tx_block, config, tx_x))
    return bernoulli_estimate(hits, config.seed)


def sim_los_single(config: SimConfig, tx_x: float = 0.0) -> SimEstimate:
    """Fraction of scenes in which the origin sees a transmitter at ``tx_x``."""
    return sim_joint_los(config, [tx_x])


def _coverage_block(config: SimConfig, size: int, seq):
    rng = np.random.default_rng(seq)
    params = config.params
    half_tx = params.xi / 2
    n_tx = rng.poisson(params.lambda_t * params.xi, size) if params.lambda_t > 0 \
        else np.zeros(size, int)
    trial_of_point = np.repeat(np.arange(size), n_tx)
    tx_x = rng.uniform(-half_tx, half_tx, trial_of_point.size)
    # projections of the detectable segment onto any lane stay within this
    half = config.half_window if config.half_window is not None else \
        half_tx * _max_lane_fraction(params)
    blocked = _blocked_in_trials(params, rng, size, -half, half, trial_of_point, tx_x, config)
    n_los = np.bincount(trial_of_point, weights=~blocked, minlength=size).astype(int)
    return np.stack([n_tx, n_los], axis=1)


def simulate_coverage_trials(config: SimConfig) -> np.ndarray:
    """Per-trial ``(detectable transmitters, LOS transmitters)`` counts, shape ``(n_trials, 2)``."""
    params = config.params
    if config.half_window is not None and \
            config.half_window < params.xi / 2 * _max_lane_fraction(params):
        raise ValueError("half_window must cover the projected detectable segment")
    return np.concatenate(_run_blocks(_coverage_block, config))


def coverage_events(trials: np.ndarray, k: Optional[int] = None,
                    include_empty: bool = False) -> np.ndarray:
    n_tx, n_los = trials[:, 0], trials[:, 1]
    if k is None:
        hit = n_los == n_tx
        return hit if include_empty else hit & (n_tx > 0)
    return n_los >= k


def sim_coverage(config: SimConfig, k: Optional[int] = None,
                 include_empty: bool = False) -> SimEstimate:
    """Full (``k=None``) or at-least-``k`` LOS coverage from whole-scene simulation."""
    trials = simulate_coverage_trials(config)
    return bernoulli_estimate(coverage_events(trials, k, include_empty), config.seed)


def write_trial_dump(path, trials: np.ndarray, ks: Sequence[int] = (1, 2)) -> None:
    """One CSV row per trial with the transmitter counts and coverage indicators."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["trial", "n_tx", "n_los", "full"] + [f"at_least_{k}" for k in ks])
        cols = [coverage_events(trials)] + [coverage_events(trials, k) for k in ks]
        for i, (n_tx, n_los) in enumerate(trials):
            writer.writerow([i, int(n_tx), int(n_los)] + [int(c[i]) for c in cols])


def _volume_block(config: SimConfig, size: int, seq, probe: float, step: float):
    rng = np.random.default_rng(seq)
    lam, mu, _ = config.params.lanes[0]
    m = config.lane_margin(mu)
    grid = np.arange(0.0, probe, step)
    trial, left, right = _lane_obstacles(rng, size, lam, mu, -m, probe + m)
    if trial.size == 0:
        return np.zeros(size)
    reach = max(np.max(right) - (probe + m), -m - np.min(left), 0.0)
    stride = probe + 2 * m + 2 * reach + 1.0
    pts = (np.arange(size)[:, None] * stride + grid).reshape(-1)
    hit = covered(pts, left + trial * stride, right + trial * stride)
    return hit.reshape(size, -1).mean(axis=1)


def sim_volume_fraction(config: SimConfig, probe_length: Optional[float] = None,
                        step: Optional[float] = None) -> SimEstimate:
    """Fraction of a probe interval covered by the (first-lane) Boolean model.

    The probe is sampled every ``0.01/mu`` by default and is ``100/mu`` long.
    The stderr is that of the per-trial fractions.
    """
    mu = config.params.lanes[0][1]
    probe = probe_length if probe_length is not None else 100.0 / mu
    step = step if step is not None else 0.01 / mu
    fractions = np.concatenate(_run_blocks(_volume_block, config, probe, step))
    n = fractions.size
    se = float(fractions.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return SimEstimate(float(fractions.mean()), se, n, config.seed)


def ergodic_los_trace(config: SimConfig, tx_x: float = 0.0) -> np.ndarray:
    """LOS indicator along one realization while the receiver and obstacles move.

    The receiver starts at the origin and moves with speed ``v`` in the +x
    direction; each obstacle drifts at ``v_o`` in a direction chosen
    uniformly at time zero.  The transmitter at ``(tx_x, d1 + d2)`` is static.
    """
    params = config.params
    if config.mode != "ergodic":
        raise ValueError("ergodic_los_trace needs mode='ergodic'")
    if not (params.v > 0 or params.v_o > 0):
        raise ValueError("ergodic mode needs v > 0 or v_o > 0")
    if config.horizon is None or config.horizon <= 0:
        raise ValueError("ergodic mode needs a positive horizon")
    rng = np.random.default_rng(config.seed)
    mu_min = min(mu for _, mu, _ in params.lanes)
    dt = config.dt
    if dt is None:
        dt = 0.1 / mu_min / max(params.v, params.v_o)
    t = np.arange(0.0, config.horizon, dt)
    receiver = params.v * t
    los = np.ones(t.size, dtype=bool)
    for lam, mu, h in params.lanes:
        q = receiver + (tx_x - receiver) * (h / params.height)
        m = config.lane_margin(mu)
        drift = params.v_o * config.horizon
        lo, hi = min(q.min(), tx_x) - drift - m, max(q.max(), tx_x) + drift + m
        n = rng.poisson(lam * (hi - lo)) if lam > 0 else 0
        centers = rng.uniform(lo, hi, n)
        left = centers - rng.exponential(1.0 / mu, n)
        right = centers + rng.exponential(1.0 / mu, n)
        direction = rng.choice([-1.0, 1.0], n)
        # each direction group moves rigidly, so look up q in its moving frame
        for d in (-1.0, 1.0):
            sel = direction == d
            los &= ~covered(q - d * params.v_o * t, left[sel], right[sel])
    return los


def batch_means(trace: np.ndarray, batches: int = ERGODIC_BATCHES) -> tuple[float, float]:
    """Mean of an autocorrelated series and its batch-means standard error."""
    usable = (trace.size // batches) * batches
    if usable == 0:
        raise ValueError("trace shorter than the number of batches")
    means = trace[:usable].reshape(batches, -1).mean(axis=1)
    return float(trace.mean()), float(means.std(ddof=1) / math.sqrt(batches))


def sim_ergodic_los(config: SimConfig, tx_x: float = 0.0) -> SimEstimate:
    """Time-averaged LOS indicator of one moving receiver, batch-means stderr."""
    trace = ergodic_los_trace(config, tx_x).astype(float)
    value, se = batch_means(trace)
    return SimEstimate(value, se, trace.size, config.seed, mode="ergodic")
