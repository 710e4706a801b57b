"""Closed-form LOS probabilities for transmitters at fixed positions.

All joint probabilities reduce to one expression in the sorted projections
``x_hat`` of the transmitters onto the obstacle line::

    log P = -2 * lambda_b * n / mu + sum_k (2/mu + gap_k) * lambda_b * exp(-mu * gap_k)

where ``gap_k = x_hat[k] - x_hat[k-1]``.  Each gap term is the probability
mass saved because a single obstacle between two neighbouring projections
cannot be counted twice.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .model import ScenarioParams, TransmitterSet, project_tx


def los_prob_single(lambda_b: float, mu: float) -> float:
    """LOS probability towards one transmitter; does not depend on its position."""
    if lambda_b < 0 or not mu > 0:
        raise ValueError("need lambda_b >= 0 and mu > 0")
    return float(np.exp(-2.0 * lambda_b / mu))


def los_prob_single_multilane(lanes: Iterable[Sequence[float]]) -> float:
    """LOS probability through several independent obstacle lanes.

    ``lanes`` holds ``(lambda_b, mu)`` pairs; a third element (lane height)
    is accepted and ignored since the single-point hit probability does not
    depend on it.
    """
    exponent = 0.0
    for lane in lanes:
        lam, mu = lane[0], lane[1]
        if lam < 0 or not mu > 0:
            raise ValueError("need lambda_b >= 0 and mu > 0 on every lane")
        exponent -= 2.0 * lam / mu
    return float(np.exp(exponent))


def gap_gain(gap, lambda_b: float, mu: float):
    """Log-probability correction contributed by two neighbouring projections."""
    gap = np.asarray(gap, dtype=float)
    return (2.0 / mu + gap) * lambda_b * np.exp(-mu * gap)


def log_los_prob_projected(x_hat, lambda_b: float, mu: float):
    """Log joint-LOS probability for sorted projections along the last axis.

    Padding with ``nan`` is not supported; pass one array per transmitter count.
    """
    x_hat = np.asarray(x_hat, dtype=float)
    n = x_hat.shape[-1]
    out = np.full(x_hat.shape[:-1], -2.0 * lambda_b * n / mu)
    if n > 1:
        out = out + gap_gain(np.diff(x_hat, axis=-1), lambda_b, mu).sum(axis=-1)
    return out


def los_prob_projected(x_hat, lambda_b: float, mu: float):
    """Joint-LOS probability for sorted projections (vectorised over leading axes)."""
    return np.exp(log_los_prob_projected(x_hat, lambda_b, mu))


def los_prob_pair(params: ScenarioParams, x1: float, x2: float) -> float:
    """LOS probability towards two transmitters at ``x1`` and ``x2``."""
    lambda_b, mu = params.single_lane()
    if x2 < x1:
        x1, x2 = x2, x1
    gap = float(project_tx(x2, params.d1, params.d2) - project_tx(x1, params.d1, params.d2))
    e = np.exp(-mu * gap)
    return float(np.exp(-4.0 * lambda_b / mu + 2.0 * lambda_b * e / mu + lambda_b * gap * e))


def los_prob_joint(params: ScenarioParams, txs) -> float:
    """LOS probability towards every transmitter in ``txs``.

    ``txs`` is a :class:`TransmitterSet` or any sequence of abscissas; the
    positions are sorted here, and coincident positions are allowed.
    """
    lambda_b, mu = params.single_lane()
    xs = np.sort(np.asarray(txs.x if isinstance(txs, TransmitterSet) else txs, dtype=float))
    if xs.size == 0:
        raise ValueError("need at least one transmitter")
    x_hat = project_tx(xs, params.d1, params.d2)
    return float(los_prob_projected(x_hat, lambda_b, mu))
