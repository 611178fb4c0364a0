"""Methods for comparing two score distributions.

Every method maps ``(X1, X2)`` to a value in ``[-1, 1]``; positive values favor
the first text.  ``mean``, ``ram`` and ``ps`` treat ``X1`` and ``X2`` as
independent.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .distribution import (
    JudgmentDistribution,
    _check_same_space,
    lower_semi_deviation,
    mean,
    mode,
    quantile,
)


@dataclass(frozen=True)
class Preference:
    """Signed preference for the first text, tagged with the producing method."""

    value: float
    method: str
    discrete: bool = False

    def __post_init__(self):
        v = float(self.value)
        if not -1.0 - 1e-12 <= v <= 1.0 + 1e-12:
            raise ValueError(f"preference {v} outside [-1, 1]")
        object.__setattr__(self, "value", min(1.0, max(-1.0, v)))

    def __float__(self):
        return self.value

    @property
    def sign(self) -> int:
        return sign(self.value)


def sign(x: float, tol: float = 0.0) -> int:
    """Sign with a dead zone of half-width ``tol`` around zero."""
    if x > tol:
        return 1
    if x < -tol:
        return -1
    return 0


def _ratio(num: float, den: float) -> float:
    # 0/0 := 0
    if den == 0.0:
        return 0.0
    return num / den


def mean_of_difference(
    v1: np.ndarray, p1: np.ndarray, v2: np.ndarray, p2: np.ndarray
) -> float:
    """``E(X1-X2) / (E|X1-X2| + sd(X1-X2))`` for independent discrete variables."""
    m1 = float(np.dot(p1, v1))
    m2 = float(np.dot(p2, v2))
    num = m1 - m2
    gaps = np.abs(v1[:, None] - v2[None, :])
    abs_mean = float(p1 @ gaps @ p2)
    var = float(np.dot(p1, (v1 - m1) ** 2) + np.dot(p2, (v2 - m2) ** 2))
    return _ratio(num, abs_mean + np.sqrt(var))


def normalized_mean(delta: JudgmentDistribution) -> float:
    """Single-argument form ``E D / (E|D| + sd(D))`` for a difference variable ``D``."""
    v, p = delta.values, delta.probs
    m = float(np.dot(p, v))
    abs_mean = float(np.dot(p, np.abs(v)))
    sd = float(np.sqrt(np.dot(p, (v - m) ** 2)))
    return _ratio(m, abs_mean + sd)


def rounded_mean(d: JudgmentDistribution) -> float:
    """Option closest to the mean (lowest value on ties)."""
    v = d.values
    gaps = np.abs(mean(d) - v)
    scale = max(1.0, float(np.max(np.abs(v))))
    tied = v[gaps <= gaps.min() + 1e-12 * scale]
    return float(tied.min())


def _discrete(stat1: float, stat2: float, name: str) -> Preference:
    return Preference(float(sign(stat1 - stat2)), name, discrete=True)


def cmp_mode(d1: JudgmentDistribution, d2: JudgmentDistribution) -> Preference:
    _check_same_space(d1, d2)
    return _discrete(mode(d1), mode(d2), "mode")


def cmp_mean(d1: JudgmentDistribution, d2: JudgmentDistribution) -> Preference:
    _check_same_space(d1, d2)
    return Preference(mean_of_difference(d1.values, d1.probs, d2.values, d2.probs), "mean")


def cmp_rounded_mean(d1: JudgmentDistribution, d2: JudgmentDistribution) -> Preference:
    _check_same_space(d1, d2)
    return _discrete(rounded_mean(d1), rounded_mean(d2), "[mean]")


def cmp_median(d1: JudgmentDistribution, d2: JudgmentDistribution) -> Preference:
    _check_same_space(d1, d2)
    return _discrete(quantile(d1, 0.5), quantile(d2, 0.5), "medi")


def cmp_1p(d1: JudgmentDistribution, d2: JudgmentDistribution) -> Preference:
    _check_same_space(d1, d2)
    return _discrete(quantile(d1, 0.01), quantile(d2, 0.01), "1p")


def cmp_ram(d1: JudgmentDistribution, d2: JudgmentDistribution) -> Preference:
    """Mean comparison after shifting each distribution down by its lower semi-deviation."""
    _check_same_space(d1, d2)
    v1 = d1.values - lower_semi_deviation(d1)
    v2 = d2.values - lower_semi_deviation(d2)
    return Preference(mean_of_difference(v1, d1.probs, v2, d2.probs), "ram")


def _quantile_pieces(d1: JudgmentDistribution, d2: JudgmentDistribution):
    """Yield ``(length, q1, q2)`` over the pieces on which both quantile functions are constant."""
    v1, w1 = d1.sorted()
    v2, w2 = d2.sorted()
    c1 = np.cumsum(w1)
    c2 = np.cumsum(w2)
    cuts = np.unique(np.concatenate(([0.0, 1.0], c1[:-1], c2[:-1])))
    cuts = cuts[(cuts >= 0.0) & (cuts <= 1.0)]
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi - lo <= 0:
            continue
        mid = 0.5 * (lo + hi)
        q1 = v1[min(int(np.searchsorted(c1, mid, side="left")), len(v1) - 1)]
        q2 = v2[min(int(np.searchsorted(c2, mid, side="left")), len(v2) - 1)]
        yield hi - lo, q1, q2


def cmp_qt(d1: JudgmentDistribution, d2: JudgmentDistribution) -> Preference:
    """Integral over ``p`` of ``sgn(Q1(p) - Q2(p))``, evaluated piece by piece."""
    _check_same_space(d1, d2)
    total = 0.0
    for length, q1, q2 in _quantile_pieces(d1, d2):
        total += length * sign(q1 - q2)
    return Preference(total, "qt")


def cmp_ps(d1: JudgmentDistribution, d2: JudgmentDistribution) -> Preference:
    """``P(X1 > X2) - P(X1 < X2)`` under independence."""
    _check_same_space(d1, d2)
    signs = np.sign(d1.values[:, None] - d2.values[None, :])
    return Preference(float(d1.probs @ signs @ d2.probs), "ps")


METHODS: dict[str, Callable[[JudgmentDistribution, JudgmentDistribution], Preference]] = {
    "mode": cmp_mode,
    "mean": cmp_mean,
    "[mean]": cmp_rounded_mean,
    "medi": cmp_median,
    "1p": cmp_1p,
    "ram": cmp_ram,
    "qt": cmp_qt,
    "ps": cmp_ps,
}

DISCRETE_METHODS = ("mode", "[mean]", "medi", "1p")
CONTINUOUS_METHODS = ("mean", "ram", "qt", "ps")
# methods that rank each distribution by one real statistic
SINGLE_STATISTIC_METHODS = ("mode", "mean", "[mean]", "medi", "1p", "ram")
MONOTONE_INVARIANT_METHODS = ("mode", "medi", "1p", "qt", "ps")


def compare(d1: JudgmentDistribution, d2: JudgmentDistribution, method: str = "mean") -> Preference:
    try:
        func = METHODS[method]
    except KeyError:
        raise ValueError(f"unknown method {method!r}; choose from {sorted(METHODS)}") from None
    return func(d1, d2)
