"""Discrete judgment distributions over an ordered set of judgment options.

A :class:`JudgmentDistribution` is a probability vector attached to a
:class:`JudgmentSpace` (the numeric value of each option).  Everything here
is immutable and side-effect free.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

PROB_TOL = 1e-9
RENORM_TOL = 1e-6
# Slack used when comparing accumulated CDF values against a quantile level.
CDF_TOL = 1e-12


@dataclass(frozen=True)
class JudgmentSpace:
    """Ordered numeric values of K judgment options."""

    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if len(vals) < 1:
            raise ValueError("a judgment space needs at least one option")
        if len(vals) > 1:
            d = np.diff(vals)
            if not (np.all(d > 0) or np.all(d < 0)):
                raise ValueError("judgment values must be strictly monotone")
        object.__setattr__(self, "values", vals)

    @property
    def k(self) -> int:
        return len(self.values)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    @classmethod
    def scores(cls, k: int) -> "JudgmentSpace":
        """Integer score space ``1..k``."""
        if k < 1:
            raise ValueError("k must be positive")
        return cls(tuple(range(1, k + 1)))

    @classmethod
    def deltas(cls, k: int, step: float = 1.0) -> "JudgmentSpace":
        """Signed difference grid ``-(k-1)..(k-1)`` of two ``k``-point scores."""
        return cls(tuple(step * d for d in range(-(k - 1), k)))

    def relabel(self, func) -> "JudgmentSpace":
        return JudgmentSpace(tuple(func(v) for v in self.values))

    def index(self, value: float) -> int:
        for i, v in enumerate(self.values):
            if v == value:
                return i
        raise KeyError(f"{value!r} is not an option of this space")


@dataclass(frozen=True, eq=False)
class JudgmentDistribution:
    """Probability vector over the options of a :class:`JudgmentSpace`.

    Probabilities within ``1e-6`` of summing to one are renormalized; anything
    further off is rejected.
    """

    space: JudgmentSpace
    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float).reshape(-1)
        if p.shape[0] != self.space.k:
            raise ValueError(f"expected {self.space.k} probabilities, got {p.shape[0]}")
        if not np.all(np.isfinite(p)):
            raise ValueError("probabilities must be finite")
        if np.any(p < -PROB_TOL):
            raise ValueError("probabilities must be nonnegative")
        p = np.clip(p, 0.0, None)
        total = p.sum()
        if abs(total - 1.0) > RENORM_TOL:
            raise ValueError(f"probabilities sum to {total}, not 1")
        p = p / total
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    # constructors -------------------------------------------------------

    @classmethod
    def from_values(cls, values: Sequence[float], probs: Sequence[float]) -> "JudgmentDistribution":
        return cls(JudgmentSpace(tuple(values)), np.asarray(probs, dtype=float))

    @classmethod
    def point_mass(cls, space: JudgmentSpace, value: float) -> "JudgmentDistribution":
        p = np.zeros(space.k)
        p[space.index(value)] = 1.0
        return cls(space, p)

    @classmethod
    def uniform(cls, space: JudgmentSpace) -> "JudgmentDistribution":
        return cls(space, np.full(space.k, 1.0 / space.k))

    @classmethod
    def empirical(cls, space: JudgmentSpace, observations: Sequence[float]) -> "JudgmentDistribution":
        """Empirical distribution of ``observations`` (each must be an option)."""
        if len(observations) == 0:
            raise ValueError("no observations")
        counts = np.zeros(space.k)
        for obs in observations:
            counts[space.index(float(obs))] += 1
        return cls(space, counts / counts.sum())

    # helpers ------------------------------------------------------------

    @property
    def values(self) -> np.ndarray:
        return self.space.array

    @property
    def k(self) -> int:
        return self.space.k

    def sorted(self) -> tuple[np.ndarray, np.ndarray]:
        """Values in increasing order with matching probabilities."""
        v = self.values
        order = np.argsort(v, kind="stable")
        return v[order], self.probs[order]

    def with_values(self, values: Sequence[float]) -> "JudgmentDistribution":
        return JudgmentDistribution(JudgmentSpace(tuple(values)), self.probs)

    def relabel(self, func) -> "JudgmentDistribution":
        return JudgmentDistribution(self.space.relabel(func), self.probs)

    def reflect(self) -> "JudgmentDistribution":
        """Distribution of ``-X`` on the negated (re-sorted) grid."""
        return JudgmentDistribution.from_values(-self.values[::-1], self.probs[::-1])

    def cdf(self, x: float) -> float:
        return float(self.probs[self.values <= x].sum())

    def is_point_mass(self) -> bool:
        return bool(np.count_nonzero(self.probs) == 1)

    def __eq__(self, other):
        if not isinstance(other, JudgmentDistribution):
            return NotImplemented
        return self.space == other.space and np.array_equal(self.probs, other.probs)

    def allclose(self, other: "JudgmentDistribution", atol: float = 1e-12) -> bool:
        return self.space == other.space and bool(np.allclose(self.probs, other.probs, atol=atol, rtol=0))

    def __repr__(self):
        pairs = ", ".join(f"{v:g}: {p:.4g}" for v, p in zip(self.values, self.probs) if p > 0)
        return f"JudgmentDistribution({{{pairs}}})"

    # statistics as methods, for convenience
    def mean(self) -> float:
        return mean(self)

    def std(self) -> float:
        return std(self)


def _check_same_space(d1: JudgmentDistribution, d2: JudgmentDistribution) -> None:
    if d1.space != d2.space:
        raise ValueError("distributions are defined on different judgment spaces")


def mean(d: JudgmentDistribution) -> float:
    return float(np.dot(d.probs, d.values))


def mode(d: JudgmentDistribution) -> float:
    """Value of the most probable option; ties go to the lowest value."""
    top = d.probs.max()
    tied = d.values[d.probs >= top - CDF_TOL]
    return float(tied.min())


def quantile(d: JudgmentDistribution, p: float) -> float:
    """Smallest value ``v`` with ``P(X <= v) >= p``."""
    if not 0.0 < p < 1.0:
        raise ValueError("quantile level must lie in (0, 1)")
    v, w = d.sorted()
    cdf = np.cumsum(w)
    idx = int(np.argmax(cdf >= p - CDF_TOL))
    return float(v[idx])


def median(d: JudgmentDistribution) -> float:
    return quantile(d, 0.5)


def variance(d: JudgmentDistribution) -> float:
    mu = mean(d)
    return float(np.dot(d.probs, (d.values - mu) ** 2))


def std(d: JudgmentDistribution) -> float:
    return float(np.sqrt(variance(d)))


def lower_semi_deviation(d: JudgmentDistribution) -> float:
    """Downside deviation ``sqrt(E[max(EX - X, 0)^2])``."""
    if d.is_point_mass():
        return 0.0
    shortfall = np.maximum(mean(d) - d.values, 0.0)
    return float(np.sqrt(np.dot(d.probs, shortfall**2)))


def mixture(ds: Sequence[JudgmentDistribution], weights: Sequence[float] | None = None) -> JudgmentDistribution:
    """Pointwise weighted average of distributions on a common space."""
    if len(ds) == 0:
        raise ValueError("need at least one distribution")
    if weights is None:
        weights = np.full(len(ds), 1.0 / len(ds))
    w = np.asarray(weights, dtype=float)
    if w.shape[0] != len(ds):
        raise ValueError("one weight per distribution")
    if np.any(w < 0) or abs(w.sum() - 1.0) > PROB_TOL:
        raise ValueError("weights must be nonnegative and sum to 1")
    for d in ds[1:]:
        _check_same_space(ds[0], d)
    probs = np.sum([wi * d.probs for wi, d in zip(w, ds)], axis=0)
    return JudgmentDistribution(ds[0].space, probs)


def _grid_step(space: JudgmentSpace) -> float:
    v = np.sort(space.array)
    if space.k == 1:
        return 1.0
    steps = np.diff(v)
    if not np.allclose(steps, steps[0], rtol=0, atol=1e-12):
        raise ValueError("difference distributions need an evenly spaced grid")
    return float(steps[0])


def diff_distribution(d1: JudgmentDistribution, d2: JudgmentDistribution) -> JudgmentDistribution:
    """Exact law of ``X1 - X2`` for independent ``X1 ~ d1`` and ``X2 ~ d2``.

    The result lives on the symmetric grid ``step * (-(K-1)..K-1)``.
    """
    _check_same_space(d1, d2)
    step = _grid_step(d1.space)
    _, p1 = d1.sorted()
    _, p2 = d2.sorted()
    # convolution of p1 with reversed p2 indexes differences -(K-1)..K-1
    probs = np.convolve(p1, p2[::-1])
    return JudgmentDistribution(JudgmentSpace.deltas(d1.k, step), probs)


def rescale_to_unit(d: JudgmentDistribution) -> JudgmentDistribution:
    """Affinely map the values so the smallest is 0 and the largest is 1."""
    if d.k < 2:
        raise ValueError("cannot rescale a single-option space")
    v = d.values
    lo, hi = v.min(), v.max()
    return d.with_values((v - lo) / (hi - lo))


def coarsify(d: JudgmentDistribution, block: int = 11) -> JudgmentDistribution:
    """Bin a 99-point score distribution into 9 blocks of 11 consecutive scores."""
    if d.k != 99:
        raise ValueError(f"coarsify expects K=99, got K={d.k}")
    _, p = d.sorted()
    probs = p.reshape(99 // block, block).sum(axis=1)
    return JudgmentDistribution(JudgmentSpace.scores(99 // block), probs)
