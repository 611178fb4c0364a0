"""Pairwise scoring and ranking with both presentation orders.

A pairwise run in order ``(1, 2)`` presents text 1 first; order ``(2, 1)``
presents text 2 first.  Each run is reduced to a difference distribution
``X_delta`` expressed in the frame of text 1 (positive favors text 1).  The two
runs are combined either before the measure of central tendency is taken
(mixture of the two deltas) or after (normalized sum of the per-order values).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distribution import (
    CDF_TOL,
    JudgmentDistribution,
    JudgmentSpace,
    mixture,
    quantile,
)
from .pointwise import Preference, _ratio, normalized_mean, sign

ORDERS = ((1, 2), (2, 1))

LIKERT_SYMBOLS = {
    5: (">>", ">", "=", "<", "<<"),
    3: (">", "=", "<"),
    2: (">", "<"),
}
LIKERT_VALUES = {
    5: (2.0, 1.0, 0.0, -1.0, -2.0),
    3: (1.0, 0.0, -1.0),
    2: (1.0, -1.0),
}


def likert_space(k: int) -> JudgmentSpace:
    """Likert-``k`` space with values from "first much better" down to "second much better"."""
    if k not in LIKERT_VALUES:
        raise ValueError(f"Likert granularity must be 2, 3 or 5, got {k}")
    return JudgmentSpace(LIKERT_VALUES[k])


def likert_distribution(k: int, probs) -> JudgmentDistribution:
    return JudgmentDistribution(likert_space(k), np.asarray(probs, dtype=float))


@dataclass(frozen=True)
class OrderedJudgment:
    order: tuple[int, int]
    delta: JudgmentDistribution

    def __post_init__(self):
        order = tuple(self.order)
        if order not in ORDERS:
            raise ValueError(f"order must be one of {ORDERS}, got {order}")
        object.__setattr__(self, "order", order)
        v = np.sort(self.delta.values)
        if not np.allclose(v, -v[::-1], rtol=0, atol=1e-12):
            raise ValueError("delta support must be symmetric about 0")


def _canonical(values: np.ndarray, probs: np.ndarray) -> JudgmentDistribution:
    order = np.argsort(values, kind="stable")
    return JudgmentDistribution.from_values(values[order], probs[order])


def score_delta(first_score: float, cond_second: JudgmentDistribution, order) -> OrderedJudgment:
    """Difference distribution for one pairwise scoring run.

    ``first_score`` is the greedily decoded score of the text shown first and
    ``cond_second`` the score distribution of the text shown second, given that
    decoded first score.
    """
    order = tuple(order)
    k = cond_second.k
    grid = JudgmentSpace.deltas(k, _step(cond_second.space)).array
    if order == (1, 2):
        diffs = first_score - cond_second.values
    elif order == (2, 1):
        diffs = cond_second.values - first_score
    else:
        raise ValueError(f"order must be one of {ORDERS}")
    probs = np.zeros(grid.shape[0])
    for d, p in zip(diffs, cond_second.probs):
        idx = np.flatnonzero(np.isclose(grid, d, rtol=0, atol=1e-9))
        if idx.size == 0:
            raise ValueError(f"first score {first_score} is not on the score grid")
        probs[idx[0]] += p
    return OrderedJudgment(order, JudgmentDistribution.from_values(grid, probs))


def _step(space: JudgmentSpace) -> float:
    v = np.sort(space.array)
    return float(v[1] - v[0]) if len(v) > 1 else 1.0


def rank_delta(lik: JudgmentDistribution, order) -> OrderedJudgment:
    """Map a Likert verdict (first-shown vs second-shown) into text 1's frame."""
    order = tuple(order)
    if order not in ORDERS:
        raise ValueError(f"order must be one of {ORDERS}")
    values = lik.values if order == (1, 2) else -lik.values
    return OrderedJudgment(order, _canonical(values, lik.probs))


def pre_aggregate(oj1: OrderedJudgment, oj2: OrderedJudgment) -> JudgmentDistribution:
    """Equal-weight mixture of the two orders' difference distributions."""
    if oj1.order == oj2.order:
        raise ValueError("pre-aggregation needs one judgment per presentation order")
    return mixture([oj1.delta, oj2.delta])


def central_mode(delta: JudgmentDistribution) -> float:
    """Mode of a difference distribution.

    Exact probability ties go to the tied value nearest zero; a tie between
    ``+d`` and ``-d`` yields 0 so that reflecting the input negates the output.
    """
    p, v = delta.probs, delta.values
    tied = v[p >= p.max() - CDF_TOL]
    nearest = np.abs(tied).min()
    closest = tied[np.abs(tied) <= nearest + 1e-12]
    if closest.size > 1:
        return 0.0
    return float(closest[0])


def central_median(delta: JudgmentDistribution) -> float:
    """Midpoint of the lower and upper medians, so reflection negates it exactly."""
    lower = quantile(delta, 0.5)
    upper = -quantile(delta.reflect(), 0.5)
    return 0.5 * (lower + upper)


def agg_mode(delta: JudgmentDistribution) -> Preference:
    return Preference(float(sign(central_mode(delta))), "agg-mode", discrete=True)


def agg_medi(delta: JudgmentDistribution) -> Preference:
    return Preference(float(sign(central_median(delta))), "agg-medi", discrete=True)


def agg_mean(delta: JudgmentDistribution) -> Preference:
    return Preference(normalized_mean(delta), "agg-mean")


def _check_orders(oj1: OrderedJudgment, oj2: OrderedJudgment) -> None:
    if oj1.order == oj2.order:
        raise ValueError("post-aggregation needs one judgment per presentation order")


def post_aggregate_mode(oj1: OrderedJudgment, oj2: OrderedJudgment) -> Preference:
    _check_orders(oj1, oj2)
    m = [central_mode(oj.delta) for oj in (oj1, oj2)]
    return Preference(_ratio(sum(m), sum(abs(x) for x in m)), "mode-agg", discrete=True)


def post_aggregate_medi(oj1: OrderedJudgment, oj2: OrderedJudgment) -> Preference:
    _check_orders(oj1, oj2)
    m = [central_median(oj.delta) for oj in (oj1, oj2)]
    return Preference(_ratio(sum(m), sum(abs(x) for x in m)), "medi-agg", discrete=True)


def post_aggregate_mean(oj1: OrderedJudgment, oj2: OrderedJudgment) -> Preference:
    _check_orders(oj1, oj2)
    return Preference(0.5 * (normalized_mean(oj1.delta) + normalized_mean(oj2.delta)), "mean-agg")


PRE_METHODS = {"mode": agg_mode, "medi": agg_medi, "mean": agg_mean}
POST_METHODS = {"mode": post_aggregate_mode, "medi": post_aggregate_medi, "mean": post_aggregate_mean}


def aggregate(oj1: OrderedJudgment, oj2: OrderedJudgment, center: str = "mean", timing: str = "pre") -> Preference:
    """Combine both orders with the given measure of central tendency and timing."""
    if timing == "pre":
        return PRE_METHODS[center](pre_aggregate(oj1, oj2))
    if timing == "post":
        return POST_METHODS[center](oj1, oj2)
    raise ValueError(f"timing must be 'pre' or 'post', got {timing!r}")


def single_order_value(oj: OrderedJudgment) -> float:
    """Normalized mean of one order's delta, used for position-bias analysis."""
    return normalized_mean(oj.delta)
