"""scikit-learn style wrappers over the comparison methods.

Inputs are probability arrays rather than distribution objects so the
wrappers compose with pipelines and grid search.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .diagnostics import multimodality
from .distribution import (
    JudgmentDistribution,
    JudgmentSpace,
    lower_semi_deviation,
    mean,
    median,
    mode,
    std,
)
from .metrics import points
from .pairwise import aggregate, likert_space, rank_delta
from .pointwise import METHODS


def check_prob_matrix(X, n_options: int | None = None, atol: float = 1e-6) -> np.ndarray:
    """2-D float array whose rows are probability vectors."""
    X = check_array(X, dtype=float, ensure_2d=True)
    if n_options is not None and X.shape[1] != n_options:
        raise ValueError(f"expected {n_options} options per row, got {X.shape[1]}")
    if np.any(X < -atol):
        raise ValueError("probabilities must be nonnegative")
    if np.any(np.abs(X.sum(axis=1) - 1.0) > atol):
        raise ValueError("each row must sum to 1")
    return np.clip(X, 0.0, None)


def check_pair_array(X, n_options: int | None = None) -> np.ndarray:
    """Reshape ``(n, 2K)`` or ``(n, 2, K)`` input to ``(n, 2, K)`` and validate rows."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        if X.shape[1] % 2:
            raise ValueError("flattened pair input needs an even number of columns")
        X = X.reshape(X.shape[0], 2, X.shape[1] // 2)
    if X.ndim != 3 or X.shape[1] != 2:
        raise ValueError("expected shape (n, 2, K) or (n, 2K)")
    n, _, k = X.shape
    flat = check_prob_matrix(X.reshape(n * 2, k), n_options)
    return flat.reshape(n, 2, k)


def _space(values, k: int) -> JudgmentSpace:
    return JudgmentSpace.scores(k) if values is None else JudgmentSpace(tuple(float(v) for v in values))


class PointwisePreferenceEstimator(ClassifierMixin, BaseEstimator):
    """Compares two score distributions per row with one comparison method.

    ``predict`` returns preference values in ``[-1, 1]``; ``score`` is the
    tie-credit accuracy against binary labels (1 when text 1 wins).
    """

    def __init__(self, method: str = "mean", values=None):
        self.method = method
        self.values = values

    def fit(self, X, y=None):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        X = check_pair_array(X)
        self.n_options_ = X.shape[2]
        self.space_ = _space(self.values, self.n_options_)
        if self.space_.k != self.n_options_:
            raise ValueError("values must match the number of options")
        self.classes_ = np.array([0, 1])
        return self

    def _dists(self, X):
        check_is_fitted(self, "space_")
        X = check_pair_array(X, self.n_options_)
        return [
            (JudgmentDistribution(self.space_, row[0]), JudgmentDistribution(self.space_, row[1])) for row in X
        ]

    def predict(self, X) -> np.ndarray:
        fn = METHODS[self.method]
        return np.array([fn(a, b).value for a, b in self._dists(X)])

    def predict_proba(self, X) -> np.ndarray:
        p1 = (self.predict(X) + 1.0) / 2.0
        return np.column_stack([1.0 - p1, p1])

    def score(self, X, y, sample_weight=None) -> float:
        return float(np.average(points(self.predict(X), y), weights=sample_weight))


class PairwiseAggregator(ClassifierMixin, BaseEstimator):
    """Two-order Likert verdicts per row, combined by ``center`` and ``timing``.

    Row ``i`` holds the verdict distribution for order (1, 2) then (2, 1),
    each over the Likert values from strongest preference for the text shown
    first to strongest preference for the text shown second.
    """

    def __init__(self, center: str = "mean", timing: str = "pre", likert: int = 5):
        self.center = center
        self.timing = timing
        self.likert = likert

    def fit(self, X, y=None):
        if self.center not in ("mode", "medi", "mean") or self.timing not in ("pre", "post"):
            raise ValueError("center must be mode/medi/mean and timing pre/post")
        self.space_ = likert_space(self.likert)
        check_pair_array(X, self.space_.k)
        self.classes_ = np.array([0, 1])
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "space_")
        X = check_pair_array(X, self.space_.k)
        out = []
        for row in X:
            oj1 = rank_delta(JudgmentDistribution(self.space_, row[0]), (1, 2))
            oj2 = rank_delta(JudgmentDistribution(self.space_, row[1]), (2, 1))
            out.append(aggregate(oj1, oj2, self.center, self.timing).value)
        return np.array(out)

    def score(self, X, y, sample_weight=None) -> float:
        return float(np.average(points(self.predict(X), y), weights=sample_weight))


STATISTICS = {
    "mean": mean,
    "mode": mode,
    "median": median,
    "std": std,
    "lower_semi_deviation": lower_semi_deviation,
    "multimodality": multimodality,
}


class JudgmentFeatures(TransformerMixin, BaseEstimator):
    """Summary statistics of each row's judgment distribution."""

    def __init__(self, statistics=("mean", "mode", "median", "std"), values=None):
        self.statistics = statistics
        self.values = values

    def fit(self, X, y=None):
        unknown = set(self.statistics) - set(STATISTICS)
        if unknown:
            raise ValueError(f"unknown statistics {sorted(unknown)}")
        X = check_prob_matrix(X)
        self.n_options_ = X.shape[1]
        self.space_ = _space(self.values, self.n_options_)
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "space_")
        X = check_prob_matrix(X, self.n_options_)
        fns = [STATISTICS[s] for s in self.statistics]
        return np.array([[f(JudgmentDistribution(self.space_, row)) for f in fns] for row in X])

    def get_feature_names_out(self, input_features=None):
        return np.array(list(self.statistics), dtype=object)
