"""Scenario parameters, geometry and samplers for the three-line road model.

Receivers live on the x-axis (y = 0), obstacles are zero-width segments on
one or more lanes between the receivers and the transmitters, and
transmitters sit on the line y = d1 + d2.  Every obstacle is described by a
center and two independent exponential half-lengths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence, Union

import numpy as np

Number = Union[float, int]

#: Obstacle centers are sampled this many mean half-lengths beyond the window.
EDGE_MARGIN_HALF_LENGTHS = 20.0


class NoDetectableRegion(ValueError):
    """Raised when the detectability disc does not reach the transmitter line."""


@dataclass(frozen=True)
class RadioParams:
    """Averaged-SNR link budget: transmit power, noise, LOS exponent, threshold."""

    p: float
    sigma: float
    alpha_los: float
    tau: float

    def __post_init__(self):
        for name in ("p", "sigma", "alpha_los", "tau"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")


def detect_radius(radio: RadioParams) -> float:
    """Largest distance at which a LOS transmitter clears the SNR threshold."""
    return (radio.p / (radio.sigma * radio.tau)) ** (1.0 / radio.alpha_los)


def window_length(d_star: float, d1: float, d2: float) -> float:
    """Length of the transmitter-line chord inside the detectability disc.

    Raises
    ------
    NoDetectableRegion
        If ``d_star <= d1 + d2``.
    """
    height = d1 + d2
    if d_star <= height:
        raise NoDetectableRegion(
            f"d_star={d_star} does not exceed d1 + d2 = {height}: no detectable region"
        )
    return 2.0 * math.sqrt(d_star * d_star - height * height)


def project_lane(x, lane_height: float, d1: float, d2: float, receiver_x=0.0):
    """x-coordinate of the receiver-to-transmitter path at height ``lane_height``.

    ``x`` is the transmitter abscissa on y = d1 + d2.  Works elementwise on
    arrays.
    """
    if not 0.0 < lane_height < d1 + d2:
        raise ValueError(f"lane height {lane_height} must lie strictly in (0, {d1 + d2})")
    if isinstance(x, (list, tuple)):
        x = np.asarray(x, dtype=float)
    return receiver_x + (x - receiver_x) * (lane_height / (d1 + d2))


def project_tx(x, d1: float, d2: float, receiver_x=0.0):
    """Intersection of the receiver-to-transmitter path with the line y = d1."""
    return project_lane(x, d1, d1, d2, receiver_x)


def project_receivers(receiver_x, tx_x: float, d1: float, d2: float):
    """Project receivers on y = 0 onto y = d1 along their paths to a tagged transmitter.

    The image of a PPP of intensity ``lam`` is a PPP of intensity
    ``lam * (d1 + d2) / d2``.
    """
    r = np.asarray(receiver_x, dtype=float)
    return r + (tx_x - r) * (d1 / (d1 + d2))


@dataclass(frozen=True)
class ScenarioParams:
    """All model constants, in meters and per-meter intensities.

    ``lambda_b`` and ``mu`` are scalars for a single obstacle lane or equal
    length sequences for several lanes; ``lane_heights`` defaults to ``(d1,)``.
    The detectability radius comes from ``radio`` unless ``d_star`` is given.
    """

    lambda_t: float
    lambda_b: Union[float, Sequence[float]]
    mu: Union[float, Sequence[float]]
    d1: float
    d2: float
    lambda_v: float = 0.0
    radio: Optional[RadioParams] = None
    d_star: Optional[float] = None
    lane_heights: Optional[Sequence[float]] = None
    v: float = 0.0
    v_o: float = 0.0
    allow_small_offsets: bool = False

    def __post_init__(self):
        lb = _as_tuple(self.lambda_b)
        mu = _as_tuple(self.mu)
        if isinstance(self.lambda_b, (list, tuple)) or isinstance(self.mu, (list, tuple)):
            # normalise list-valued lanes to tuples so the dataclass stays hashable
            object.__setattr__(self, "lambda_b", lb if len(lb) > 1 else lb[0])
            object.__setattr__(self, "mu", mu if len(mu) > 1 else mu[0])
        heights = _as_tuple(self.lane_heights) if self.lane_heights is not None else (self.d1,)
        object.__setattr__(self, "lane_heights", heights)

        if self.lambda_t < 0 or self.lambda_v < 0 or any(x < 0 for x in lb):
            raise ValueError("intensities must be non-negative")
        if any(not m > 0 for m in mu):
            raise ValueError("mu must be positive")
        if len(lb) != len(mu) or len(lb) != len(heights):
            raise ValueError(
                f"lane lists differ in length: lambda_b={len(lb)}, mu={len(mu)}, "
                f"lane_heights={len(heights)}"
            )
        if not self.allow_small_offsets and (self.d1 < 1 or self.d2 < 1):
            raise ValueError(f"d1 and d2 must be >= 1 m, got d1={self.d1}, d2={self.d2}")
        if self.d1 <= 0 or self.d2 <= 0:
            raise ValueError("d1 and d2 must be positive")
        for h in heights:
            if not 0 < h < self.d1 + self.d2:
                raise ValueError(f"lane height {h} must lie strictly in (0, {self.d1 + self.d2})")
        if self.d_star is not None and not self.d_star > 0:
            raise ValueError("d_star must be positive")
        if self.v < 0 or self.v_o < 0:
            raise ValueError("speeds must be non-negative")

    @property
    def lanes(self) -> list[tuple[float, float, float]]:
        """``(lambda_b, mu, height)`` per obstacle lane."""
        return list(zip(_as_tuple(self.lambda_b), _as_tuple(self.mu), self.lane_heights))

    @property
    def is_multilane(self) -> bool:
        return len(self.lane_heights) > 1

    @property
    def height(self) -> float:
        return self.d1 + self.d2

    @property
    def detect_radius(self) -> Optional[float]:
        if self.d_star is not None:
            return self.d_star
        if self.radio is not None:
            return detect_radius(self.radio)
        return None

    @property
    def xi(self) -> float:
        """Length of the detectable transmitter segment."""
        d_star = self.detect_radius
        if d_star is None:
            raise ValueError("scenario has neither radio parameters nor d_star")
        return window_length(d_star, self.d1, self.d2)

    @property
    def xi_hat(self) -> float:
        """Length of the detectable segment projected onto y = d1."""
        return self.xi * self.d1 / self.height

    def single_lane(self) -> tuple[float, float]:
        """``(lambda_b, mu)`` of a single-lane scenario; raises for several lanes."""
        if self.is_multilane:
            raise ValueError("closed-form joint LOS is only available for a single obstacle lane")
        return float(self.lambda_b), float(self.mu)

    def replace(self, **changes) -> "ScenarioParams":
        import dataclasses

        return dataclasses.replace(self, **changes)


def _as_tuple(value) -> tuple:
    if isinstance(value, (list, tuple, np.ndarray)):
        return tuple(float(v) for v in value)
    return (float(value),)


@dataclass(frozen=True)
class Obstacle:
    center: float
    v_tilde: float
    w_tilde: float
    lane_height: float

    @property
    def left(self) -> float:
        return self.center - self.v_tilde

    @property
    def right(self) -> float:
        return self.center + self.w_tilde


@dataclass(frozen=True, eq=False)
class ObstacleSet:
    """A frozen Boolean-model realization, stored column-wise and sorted by center."""

    centers: np.ndarray
    v_tilde: np.ndarray
    w_tilde: np.ndarray
    heights: np.ndarray
    half_window: float
    margin: float

    def __post_init__(self):
        order = np.lexsort((self.heights, self.centers))
        for name in ("centers", "v_tilde", "w_tilde", "heights"):
            arr = np.asarray(getattr(self, name), dtype=float)[order]
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.centers)

    def __iter__(self) -> Iterator[Obstacle]:
        for c, v, w, h in zip(self.centers, self.v_tilde, self.w_tilde, self.heights):
            yield Obstacle(float(c), float(v), float(w), float(h))

    @property
    def left(self) -> np.ndarray:
        return self.centers - self.v_tilde

    @property
    def right(self) -> np.ndarray:
        return self.centers + self.w_tilde

    def shifted(self, c: float) -> "ObstacleSet":
        return ObstacleSet(self.centers + c, self.v_tilde, self.w_tilde, self.heights,
                           self.half_window, self.margin)

    def same_as(self, other: "ObstacleSet") -> bool:
        return all(
            np.array_equal(getattr(self, n), getattr(other, n))
            for n in ("centers", "v_tilde", "w_tilde", "heights")
        )

    @classmethod
    def empty(cls, half_window: float = 0.0) -> "ObstacleSet":
        z = np.empty(0)
        return cls(z, z, z, z, half_window, 0.0)


@dataclass(frozen=True)
class TransmitterSet:
    """Strictly increasing transmitter abscissas on the line y = d1 + d2."""

    x: tuple

    def __post_init__(self):
        xs = tuple(float(v) for v in self.x)
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("transmitter positions must be strictly increasing")
        object.__setattr__(self, "x", xs)

    def __len__(self) -> int:
        return len(self.x)

    def projections(self, d1: float, d2: float, receiver_x: float = 0.0) -> np.ndarray:
        return project_tx(np.asarray(self.x), d1, d2, receiver_x)


@dataclass(frozen=True)
class ProbEstimate:
    """A probability together with how it was obtained."""

    value: float
    method: str
    stderr: Optional[float] = None
    n_samples: Optional[int] = None
    n_max: Optional[int] = None
    tail_bound: Optional[float] = None
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.method not in ("closed-form", "quadrature", "mc"):
            raise ValueError(f"unknown method tag {self.method!r}")
        if not -1e-12 <= self.value <= 1 + 1e-12:
            raise ValueError(f"probability out of range: {self.value}")
        if self.stderr is not None and self.stderr < 0:
            raise ValueError("stderr must be non-negative")


def edge_margin(mu: float) -> float:
    return EDGE_MARGIN_HALF_LENGTHS / mu


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_ppp(intensity: float, lo: float, hi: float, rng) -> np.ndarray:
    """Sorted points of a homogeneous PPP on ``[lo, hi]``."""
    rng = as_rng(rng)
    n = rng.poisson(intensity * (hi - lo)) if intensity > 0 and hi > lo else 0
    return np.sort(rng.uniform(lo, hi, n))


def sample_obstacles(params: ScenarioParams, half_window: float, rng_seed=None,
                     margin: Optional[float] = None) -> ObstacleSet:
    """Boolean-model realization over ``[-half_window, half_window]``.

    Centers are drawn on the window widened by ``margin`` on each side
    (default ``20/mu`` per lane), half-lengths are i.i.d. exponential with
    mean ``1/mu``.  The result is a pure function of ``rng_seed``.
    """
    if not half_window > 0:
        raise ValueError("window length must be positive")
    rng = as_rng(rng_seed)
    parts = []
    margins = []
    for lam, mu, h in params.lanes:
        m = edge_margin(mu) if margin is None else margin
        margins.append(m)
        centers = sample_ppp(lam, -half_window - m, half_window + m, rng)
        v = rng.exponential(1.0 / mu, len(centers))
        w = rng.exponential(1.0 / mu, len(centers))
        parts.append((centers, v, w, np.full(len(centers), h)))
    cols = [np.concatenate([p[i] for p in parts]) for i in range(4)]
    return ObstacleSet(*cols, half_window=half_window, margin=max(margins))


def covered(points, left, right) -> np.ndarray:
    """For each point, whether it lies in the union of closed intervals ``[left, right]``."""
    points = np.asarray(points, dtype=float)
    left = np.asarray(left, dtype=float)
    if left.size == 0:
        return np.zeros(points.shape, dtype=bool)
    order = np.argsort(left, kind="stable")
    lefts = left[order]
    reach = np.maximum.accumulate(np.asarray(right, dtype=float)[order])
    idx = np.searchsorted(lefts, points, side="right") - 1
    hit = np.zeros(points.shape, dtype=bool)
    ok = idx >= 0
    hit[ok] = reach[idx[ok]] >= points[ok]
    return hit


def is_blocked(obstacles: ObstacleSet, tx_x, receiver_x: float, d1: float, d2: float):
    """Whether the segment from ``(receiver_x, 0)`` to ``(tx_x, d1 + d2)`` hits an obstacle.

    Accepts a scalar or an array of transmitter positions.
    """
    tx = np.asarray(tx_x, dtype=float)
    blocked = np.zeros(tx.shape, dtype=bool)
    for h in np.unique(obstacles.heights):
        on_lane = obstacles.heights == h
        q = receiver_x + (tx - receiver_x) * (h / (d1 + d2))
        blocked |= covered(q, obstacles.left[on_lane], obstacles.right[on_lane])
    return bool(blocked) if blocked.ndim == 0 else blocked
