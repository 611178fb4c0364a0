"""Distributional diagnostics for judge outputs.

Covers multimodality, Wasserstein alignment with human judgments,
sensitivity to score granularity, position bias, intransitivity and the
correlation between human disagreement and judge uncertainty.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .distribution import (
    JudgmentDistribution,
    coarsify,
    mean,
    median,
    mode,
    rescale_to_unit,
)


def multimodality(d: JudgmentDistribution) -> float:
    """Least mass to add for a unimodal profile, over the resulting total mass.

    Unimodal means nondecreasing up to a peak and nonincreasing after it.  For
    a fixed peak the cheapest fill raises each option to the running maximum
    seen from its side; every peak is tried.
    """
    _, p = d.sorted()
    left = np.maximum.accumulate(p)
    right = np.maximum.accumulate(p[::-1])[::-1]
    top = p.max()
    best = np.inf
    for m in range(p.shape[0]):
        filled = np.concatenate((left[:m], [top], right[m + 1 :]))
        best = min(best, float((filled - p).sum()))
    best = max(best, 0.0)
    return best / (1.0 + best)


def _quantile_match(mu: JudgmentDistribution, nu: JudgmentDistribution):
    """Monotone coupling as ``(mass, x, y)`` pieces."""
    xv, xp = mu.sorted()
    yv, yp = nu.sorted()
    cx, cy = np.cumsum(xp), np.cumsum(yp)
    cuts = np.unique(np.clip(np.concatenate(([0.0, 1.0], cx[:-1], cy[:-1])), 0.0, 1.0))
    lo, hi = cuts[:-1], cuts[1:]
    mid = 0.5 * (lo + hi)
    ix = np.minimum(np.searchsorted(cx, mid, side="left"), len(xv) - 1)
    iy = np.minimum(np.searchsorted(cy, mid, side="left"), len(yv) - 1)
    return hi - lo, xv[ix], yv[iy]


def wasserstein(mu: JudgmentDistribution, nu: JudgmentDistribution, p: int = 1) -> float:
    """``W_p`` between two distributions on the real line via quantile matching."""
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    mass, x, y = _quantile_match(mu, nu)
    cost = float(np.dot(mass, np.abs(x - y) ** p))
    return cost ** (1.0 / p)


@dataclass(frozen=True)
class AlignmentReport:
    w1: float
    w2: float
    n: int

    def to_dict(self) -> dict:
        return {"w1": self.w1, "w2": self.w2, "n": self.n}


def _unit(d: JudgmentDistribution) -> JudgmentDistribution:
    return rescale_to_unit(d) if d.k > 1 else d


BASELINES = {"mode": mode, "mean": mean, "median": median}


def pluralistic_error(
    predicted: JudgmentDistribution,
    human: JudgmentDistribution,
    p: int = 1,
    baseline: str | None = None,
) -> float:
    """Wasserstein distance between predicted and human judgment distributions.

    Both spaces are rescaled to [0, 1].  With ``baseline`` the prediction is
    replaced by a point mass at its mode, mean or median.
    """
    pred = _unit(predicted)
    hum = _unit(human)
    if baseline is not None:
        try:
            center = BASELINES[baseline](pred)
        except KeyError:
            raise ValueError(f"baseline must be one of {sorted(BASELINES)}") from None
        pred = JudgmentDistribution.from_values([center], [1.0])
    return wasserstein(pred, hum, p)


def alignment(
    pairs: Sequence[tuple[JudgmentDistribution, JudgmentDistribution]],
    baseline: str | None = None,
) -> AlignmentReport:
    """Average ``W_1`` and ``W_2`` over (predicted, human) pairs."""
    if not pairs:
        raise ValueError("no instances")
    w1 = np.mean([pluralistic_error(a, b, 1, baseline) for a, b in pairs])
    w2 = np.mean([pluralistic_error(a, b, 2, baseline) for a, b in pairs])
    return AlignmentReport(float(w1), float(w2), len(pairs))


def flip_rate(a9: Sequence[float], a99: Sequence[float]) -> float:
    """Normalized L1 disagreement of the sign vectors of two prediction vectors."""
    s9 = np.sign(np.asarray(a9, dtype=float))
    s99 = np.sign(np.asarray(a99, dtype=float))
    if s9.shape != s99.shape:
        raise ValueError("prediction vectors must have equal length")
    den = np.abs(s9).sum() + np.abs(s99).sum()
    if den == 0:
        return 0.0
    return float(np.abs(s9 - s99).sum() / den)


def granularity_sensitivity(d9: JudgmentDistribution, d99: JudgmentDistribution) -> float:
    """``W_1`` between a 9-point distribution and the 9-block coarsening of a 99-point one."""
    if d9.k != 9:
        raise ValueError(f"expected a K=9 distribution, got K={d9.k}")
    return wasserstein(rescale_to_unit(d9), rescale_to_unit(coarsify(d99)), 1)


def position_bias_pair(judgments: Sequence[tuple[float, float]]) -> dict:
    """MAE and MSE between the two orders' values, both in text 1's frame."""
    arr = np.asarray(judgments, dtype=float).reshape(-1, 2)
    if arr.shape[0] == 0:
        raise ValueError("no instances")
    err = arr[:, 0] - arr[:, 1]
    return {"mae": float(np.abs(err).mean()), "mse": float((err**2).mean()), "n": int(arr.shape[0])}


@dataclass(frozen=True)
class RankCorrelation:
    rho: float | None
    pvalue: float | None
    alpha: float
    n: int

    @property
    def significant(self) -> bool:
        return self.pvalue is not None and self.pvalue < self.alpha

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "pvalue": self.pvalue,
            "alpha": self.alpha,
            "significant": self.significant,
            "n": self.n,
        }


def spearman(x: Sequence[float], y: Sequence[float], alpha: float = 0.01) -> RankCorrelation:
    """Spearman's rho (average ranks for ties); ``rho`` is None for a constant input."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("paired vectors must have equal length")
    if x.size < 2 or np.all(x == x[0]) or np.all(y == y[0]):
        return RankCorrelation(None, None, alpha, int(x.size))
    res = stats.spearmanr(x, y)
    return RankCorrelation(float(res.statistic), float(res.pvalue), alpha, int(x.size))


def position_bias_list(pairs: Sequence[tuple[float, float]]) -> dict:
    """``|rho|`` between presented-position difference and judgment value.

    The signed correlation is kept under ``rho``; ``abs_rho`` is None when
    either column is constant.
    """
    arr = np.asarray(pairs, dtype=float).reshape(-1, 2)
    if arr.shape[0] < 2:
        raise ValueError("need at least two pairs")
    rc = spearman(arr[:, 0], arr[:, 1])
    return {"abs_rho": None if rc.rho is None else abs(rc.rho), "rho": rc.rho, "n": rc.n}


def disagreement_correlation(
    stds_human: Sequence[float], stds_model: Sequence[float], alpha: float = 0.01
) -> RankCorrelation:
    """Spearman correlation between human and judge standard deviations."""
    if len(stds_human) != len(stds_model):
        raise ValueError("paired vectors must have equal length")
    return spearman(stds_human, stds_model, alpha)


def is_intransitive(a01: float, a12: float, a02: float) -> bool:
    """Whether the three pairwise values break transitivity under some relabeling.

    ``aXY`` is the preference of item X over item Y; reversed pairs are the
    negations.  Transitivity requires ``a(x, y) > 0`` and ``a(y, z) >= 0`` to
    imply ``a(x, z) > 0``.
    """
    vals = {(0, 1): a01, (1, 2): a12, (0, 2): a02}

    def a(x: int, y: int) -> float:
        return vals[(x, y)] if (x, y) in vals else -vals[(y, x)]

    for x, y, z in itertools.permutations(range(3)):
        if a(x, y) > 0 and a(y, z) >= 0 and not a(x, z) > 0:
            return True
    return False


def intransitivity_rate(
    triplets: Sequence,
    method: Callable[[JudgmentDistribution, JudgmentDistribution], object] | None = None,
) -> float:
    """Fraction of triplets exhibiting intransitivity.

    Each triplet is either three distributions compared with ``method`` or a
    precomputed ``(a01, a12, a02)`` tuple of pairwise values.
    """
    if len(triplets) == 0:
        raise ValueError("no triplets")
    bad = 0
    for t in triplets:
        if method is not None:
            d0, d1, d2 = t
            vals = [float(method(d0, d1)), float(method(d1, d2)), float(method(d0, d2))]
        else:
            vals = [float(v) for v in t]
        bad += is_intransitive(*vals)
    return bad / len(triplets)
