"""Accuracy with tie credit, MSE (Brier score) and tie analysis."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .pointwise import Preference

# |value| below this counts as a predicted tie
TIE_TOL = 1e-12


@dataclass(frozen=True)
class EvalInstance:
    id: str
    prediction: float
    label: float
    group: str | None = None

    def __post_init__(self):
        pred = self.prediction
        if isinstance(pred, Preference):
            pred = pred.value
        object.__setattr__(self, "prediction", float(pred))
        if not 0.0 <= float(self.label) <= 1.0:
            raise ValueError(f"label {self.label} outside [0, 1]")
        object.__setattr__(self, "label", float(self.label))


def predicted_sign(values, tol: float = TIE_TOL) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    return np.where(v > tol, 1, np.where(v < -tol, -1, 0))


def _arrays(instances: Iterable[EvalInstance]) -> tuple[np.ndarray, np.ndarray]:
    instances = list(instances)
    preds = np.array([x.prediction for x in instances], dtype=float)
    labels = np.array([x.label for x in instances], dtype=float)
    return preds, labels


def points(predictions, labels) -> np.ndarray:
    """1 for the right winner, 0.5 for a tie, 0 for the wrong winner."""
    labels = np.asarray(labels, dtype=float)
    if np.any((labels != 0.0) & (labels != 1.0)):
        raise ValueError("accuracy needs binary labels (0 or 1)")
    s = predicted_sign(predictions)
    target = np.where(labels == 1.0, 1, -1)
    return np.where(s == 0, 0.5, np.where(s == target, 1.0, 0.0))


def accuracy(instances: Iterable[EvalInstance]) -> float:
    preds, labels = _arrays(instances)
    if preds.size == 0:
        raise ValueError("no instances")
    return float(points(preds, labels).mean())


def squared_errors(predictions, labels) -> np.ndarray:
    p = (np.asarray(predictions, dtype=float) + 1.0) / 2.0
    return (p - np.asarray(labels, dtype=float)) ** 2


def mse(instances: Iterable[EvalInstance]) -> float:
    """Brier score of the predictions rescaled from [-1, 1] to [0, 1]."""
    preds, labels = _arrays(instances)
    if preds.size == 0:
        raise ValueError("no instances")
    return float(squared_errors(preds, labels).mean())


@dataclass(frozen=True)
class TieAnalysis:
    tie_rate: float
    reference_accuracy_on_ties: float | None
    non_tie_accuracy_delta: float | None
    n: int

    def to_dict(self) -> dict:
        return {
            "tie_rate": self.tie_rate,
            "reference_accuracy_on_ties": self.reference_accuracy_on_ties,
            "non_tie_accuracy_delta": self.non_tie_accuracy_delta,
            "n": self.n,
        }


def tie_analysis(
    method_predictions: Sequence[float],
    reference_predictions: Sequence[float],
    labels: Sequence[float],
) -> TieAnalysis:
    """Tie rate of a discrete method and how a reference method fares on those ties.

    ``non_tie_accuracy_delta`` is the method's accuracy minus the reference's
    over the instances the method does not tie on.
    """
    m = np.asarray(method_predictions, dtype=float)
    r = np.asarray(reference_predictions, dtype=float)
    y = np.asarray(labels, dtype=float)
    if not (m.shape == r.shape == y.shape):
        raise ValueError("predictions and labels must be aligned")
    if m.size == 0:
        raise ValueError("no instances")
    ties = predicted_sign(m) == 0
    ref_on_ties = float(points(r[ties], y[ties]).mean()) if ties.any() else None
    if (~ties).any():
        delta = float(points(m[~ties], y[~ties]).mean() - points(r[~ties], y[~ties]).mean())
    else:
        delta = None
    return TieAnalysis(float(ties.mean()), ref_on_ties, delta, int(m.size))
