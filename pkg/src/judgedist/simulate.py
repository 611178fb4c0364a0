"""Synthetic judge with controllable sharpness, position bias and granularity.

Latent text quality lives on the unit interval.  A judge scoring with ``K``
options puts probability ``exp(-(s - c)^2 / (2 w^2))`` on score ``s``, where
``c = 1 + quality * (K - 1)`` and the width ``w`` is ``tau`` score points at
the reference granularity (9 options) and scales with ``K - 1`` otherwise.
Small ``tau`` mimics the sharpened distributions seen after chain-of-thought.

The module also holds a harness for how well statistics of a continuous score
distribution survive rounding to the nearest integer score.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .distribution import (
    JudgmentDistribution,
    JudgmentSpace,
    mean,
    quantile,
    rescale_to_unit,
    std,
)
from .listwise import default_identifiers
from .pairwise import LIKERT_SYMBOLS, LIKERT_VALUES, likert_space
from .pointwise import METHODS, sign
from .records import LogprobRecord, Position

REFERENCE_K = 9
# one unit of latent quality spans this many Likert steps of the difference scale
LIKERT_GAIN = 4.0
MIN_LOGPROB = -80.0


@dataclass(frozen=True)
class LatentJudge:
    """Generative judge model.

    ``qualities`` maps response ids to latent quality; ``noise`` perturbs the
    quality the judge perceives; ``beta`` is added to whichever text is
    presented first; ``spike`` multiplies the weight of scores that are
    multiples of 5 by ``1 + spike``.
    """

    qualities: Mapping[str, float] = field(default_factory=dict)
    noise: float = 0.0
    tau: float = 1.0
    beta: float = 0.0
    spike: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.noise < 0 or self.spike < 0:
            raise ValueError("noise and spike must be nonnegative")

    def perceived(self, response: str) -> float:
        q = float(self.qualities[response])
        if self.noise == 0:
            return q
        rng = np.random.default_rng([self.seed, _stable_hash(response)])
        return q + self.noise * float(rng.standard_normal())


def _stable_hash(text: str) -> int:
    h = 2166136261
    for ch in text.encode("utf-8"):
        h = ((h ^ ch) * 16777619) & 0xFFFFFFFF
    return h


def _gaussian_probs(values: np.ndarray, center: float, width: float) -> np.ndarray:
    logw = -((values - center) ** 2) / (2.0 * width**2)
    w = np.exp(logw - logw.max())
    return w / w.sum()


def score_distribution(quality: float, k: int, tau: float, spike: float = 0.0) -> JudgmentDistribution:
    """Score distribution over ``1..k`` for a perceived latent quality."""
    scores = np.arange(1, k + 1, dtype=float)
    center = 1.0 + quality * (k - 1)
    width = tau * (k - 1) / (REFERENCE_K - 1)
    p = _gaussian_probs(scores, center, width)
    if spike:
        p = p * np.where(scores % 5 == 0, 1.0 + spike, 1.0)
        p = p / p.sum()
    return JudgmentDistribution(JudgmentSpace.scores(k), p)


def sample_pointwise(judge: LatentJudge, response: str, k: int, shift: float = 0.0) -> JudgmentDistribution:
    return score_distribution(judge.perceived(response) + shift, k, judge.tau, judge.spike)


def likert_from_gap(gap: float, k: int, tau: float) -> JudgmentDistribution:
    """Likert verdict distribution for a perceived quality gap (first minus second)."""
    values = np.asarray(LIKERT_VALUES[k], dtype=float)
    scale = 1.0 if k == 5 else 0.5
    p = _gaussian_probs(values, LIKERT_GAIN * scale * gap, tau * scale / 2.0)
    return JudgmentDistribution(likert_space(k), p)


# ---------------------------------------------------------------------------
# continuous densities and rounding
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ContinuousSpec:
    """Piecewise-linear density through ``(knots[i], density[i])``."""

    knots: np.ndarray
    density: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.knots, dtype=float)
        y = np.asarray(self.density, dtype=float)
        if x.shape != y.shape or x.size < 2:
            raise ValueError("need matching knot and density arrays of length >= 2")
        if np.any(np.diff(x) <= 0):
            raise ValueError("knots must be strictly increasing")
        if np.any(y < 0):
            raise ValueError("density must be nonnegative")
        total = float(np.sum(np.diff(x) * (y[:-1] + y[1:]) / 2.0))
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"density integrates to {total}, not 1")
        object.__setattr__(self, "knots", x)
        object.__setattr__(self, "density", y)

    @classmethod
    def normalized(cls, knots, density) -> "ContinuousSpec":
        x = np.asarray(knots, dtype=float)
        y = np.asarray(density, dtype=float)
        total = float(np.sum(np.diff(x) * (y[:-1] + y[1:]) / 2.0))
        return cls(x, y / total)

    @classmethod
    def uniform(cls, k: int) -> "ContinuousSpec":
        return cls.normalized([0.5, k + 0.5], [1.0, 1.0])

    @classmethod
    def random(cls, k: int, rng: np.random.Generator, max_knots: int = 12) -> "ContinuousSpec":
        """Random density on ``[1/2, k + 1/2]`` with some zero stretches."""
        n_inner = int(rng.integers(0, max_knots - 1))
        inner = np.sort(rng.uniform(0.5, k + 0.5, size=n_inner))
        x = np.unique(np.concatenate(([0.5], inner, [k + 0.5])))
        y = rng.exponential(size=x.size)
        y[rng.random(x.size) < 0.3] = 0.0
        if not np.any(y[:-1] + y[1:] > 0):
            y[:] = 1.0
        return cls.normalized(x, y)

    @property
    def lipschitz(self) -> float:
        return float(np.max(np.abs(np.diff(self.density) / np.diff(self.knots))))

    def _knot_cdf(self) -> np.ndarray:
        x, y = self.knots, self.density
        return np.concatenate(([0.0], np.cumsum(np.diff(x) * (y[:-1] + y[1:]) / 2.0)))

    def cdf(self, t) -> np.ndarray:
        x, y = self.knots, self.density
        t = np.atleast_1d(np.asarray(t, dtype=float))
        base = self._knot_cdf()
        i = np.clip(np.searchsorted(x, t, side="right") - 1, 0, x.size - 2)
        h = x[i + 1] - x[i]
        s = np.clip(t - x[i], 0.0, h)
        slope = (y[i + 1] - y[i]) / h
        out = base[i] + y[i] * s + 0.5 * slope * s**2
        out = np.where(t <= x[0], 0.0, np.where(t >= x[-1], 1.0, out))
        return out

    def mean(self) -> float:
        x, y = self.knots, self.density
        a, b, fa, fb = x[:-1], x[1:], y[:-1], y[1:]
        return float(np.sum((b - a) / 6.0 * (fa * (2 * a + b) + fb * (a + 2 * b))))

    def quantile(self, p: float) -> float:
        """``inf {x : F(x) >= p}``."""
        if not 0.0 < p < 1.0:
            raise ValueError("quantile level must lie in (0, 1)")
        x, y = self.knots, self.density
        base = self._knot_cdf()
        base = base / base[-1]
        i = int(np.searchsorted(base, p, side="left"))
        if i == 0:
            return float(x[0])
        i -= 1
        need = p - base[i]
        h = x[i + 1] - x[i]
        slope = (y[i + 1] - y[i]) / h
        if abs(slope) < 1e-15:
            s = need / y[i] if y[i] > 0 else 0.0
        else:
            # solve y_i s + slope s^2 / 2 = need for the smallest root in [0, h]
            disc = max(y[i] ** 2 + 2.0 * slope * need, 0.0)
            s = 2.0 * need / (y[i] + math.sqrt(disc)) if y[i] + math.sqrt(disc) > 0 else 0.0
        return float(x[i] + min(max(s, 0.0), h))


def discretize(c: ContinuousSpec, k: int) -> JudgmentDistribution:
    """Mass of each rounding cell ``[j - 1/2, j + 1/2)`` for ``j = 1..k``."""
    edges = np.arange(k + 1, dtype=float) + 0.5
    cdf = c.cdf(edges)
    probs = np.diff(cdf)
    return JudgmentDistribution(JudgmentSpace.scores(k), np.clip(probs, 0.0, None))


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class RoundingGaps:
    mean_gap: float
    quantile_gap: float
    p: float

    @property
    def ok(self) -> bool:
        return self.mean_gap <= 1 and self.quantile_gap <= 0.5 + 1e-9


def prop1_check(c: ContinuousSpec, k: int, p: float) -> RoundingGaps:
    """Gaps between statistics of a continuous score and its rounded version.

    The rounded mean may differ by at most one score and the ``p``-quantile by
    at most half a score.
    """
    d = discretize(c, k)
    mean_gap = abs(round_half_up(c.mean()) - round_half_up(mean(d)))
    quantile_gap = abs(c.quantile(p) - quantile(d, p))
    return RoundingGaps(float(mean_gap), float(quantile_gap), p)


def assert_rounding_bounds(c: ContinuousSpec, k: int, p: float) -> RoundingGaps:
    gaps = prop1_check(c, k, p)
    if not gaps.ok:
        raise AssertionError(
            f"rounding bound violated ({gaps}) for density knots={c.knots.tolist()} "
            f"density={c.density.tolist()}"
        )
    return gaps


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------


def _candidates(tokens: list[str], probs: np.ndarray, top: int) -> tuple[tuple[str, float], ...]:
    order = np.argsort(-probs, kind="stable")[:top]
    out = []
    for i in order:
        lp = math.log(probs[i]) if probs[i] > 0 else -math.inf
        if lp < MIN_LOGPROB:
            continue
        out.append((tokens[i], round(lp, 12)))
    return tuple(out)


def _fixed(tok: str) -> Position:
    return Position(((tok, 0.0),), tok)


def _judgment_position(tokens: list[str], probs: np.ndarray, top: int, prefix: str = "") -> Position:
    cands = _candidates([prefix + t for t in tokens], probs, top)
    return Position(cands, cands[0][0])


def _score_tokens(k: int) -> list[str]:
    return [str(s) for s in range(1, k + 1)]


def _instance_rng(seed: int, i: int) -> np.random.Generator:
    return np.random.default_rng([seed, i])


@dataclass
class SimulatedData:
    records: list[LogprobRecord]
    dataset: list[dict]
    latents: dict[str, list[float]] = field(default_factory=dict)


def _labels(rng, u1: float, u2: float, n_annotators: int, annotator_noise: float) -> dict:
    if n_annotators <= 0:
        return {"label": 1.0 if u1 > u2 else 0.0}
    z = rng.standard_normal((n_annotators, 2)) * annotator_noise
    votes = [1.0 if u1 + a > u2 + b else 0.0 for a, b in z]
    return {"label": float(np.mean(votes)), "human_judgments": votes}


def generate_dataset(
    judge: LatentJudge,
    n_instances: int,
    setting: str = "pointwise-score",
    k: int = 9,
    n_annotators: int = 0,
    annotator_noise: float = 0.1,
    top_logprobs: int = 20,
    list_size: int = 4,
) -> SimulatedData:
    """Simulated judge records plus gold labels.

    Latent qualities are drawn per instance from a seed derived from
    ``judge.seed`` and the instance index, so any slice of instances can be
    generated independently.  ``k`` is the score granularity for scoring
    settings and the Likert granularity for ``pairwise-rank``.
    """
    gens = {
        "pointwise-score": _gen_pointwise,
        "pairwise-score": _gen_pairwise_score,
        "pairwise-rank": _gen_pairwise_rank,
        "listwise": _gen_listwise,
    }
    if setting not in gens:
        raise ValueError(f"unknown setting {setting!r}")
    out = SimulatedData([], [])
    width = max(4, len(str(n_instances - 1)))
    for i in range(n_instances):
        iid = f"inst-{i:0{width}d}"
        rng = _instance_rng(judge.seed, i)
        gens[setting](
            out, judge, iid, rng, k=k, n_annotators=n_annotators,
            annotator_noise=annotator_noise, top=top_logprobs, list_size=list_size,
        )
    return out


def _perceive(judge: LatentJudge, rng, u: np.ndarray) -> np.ndarray:
    return u + judge.noise * rng.standard_normal(u.shape)


def _gen_pointwise(out, judge, iid, rng, *, k, n_annotators, annotator_noise, top, **_):
    u = rng.uniform(0.0, 1.0, size=2)
    q = _perceive(judge, rng, u)
    tokens = _score_tokens(k)
    for r in (1, 2):
        d = score_distribution(q[r - 1], k, judge.tau, judge.spike)
        pos = _judgment_position(tokens, d.probs, top)
        out.records.append(
            LogprobRecord(f"{iid}:{r}", "pointwise-score", (pos,), pos.chosen, instance_id=iid, response=r)
        )
    row = {"id": iid, **_labels(rng, u[0], u[1], n_annotators, annotator_noise)}
    if n_annotators > 0:
        z = rng.standard_normal((2, n_annotators)) * annotator_noise
        scores = np.clip(np.floor(1.0 + (u[:, None] + z) * (k - 1) + 0.5), 1, k)
        row["human_scores"] = scores.tolist()
    out.dataset.append(row)
    out.latents[iid] = u.tolist()


def _gen_pairwise_score(out, judge, iid, rng, *, k, n_annotators, annotator_noise, top, **_):
    u = rng.uniform(0.0, 1.0, size=2)
    q = _perceive(judge, rng, u)
    tokens = _score_tokens(k)
    for order in ((1, 2), (2, 1)):
        f, s = order[0] - 1, order[1] - 1
        d_first = score_distribution(q[f] + judge.beta, k, judge.tau, judge.spike)
        d_second = score_distribution(q[s], k, judge.tau, judge.spike)
        pos_a = _judgment_position(tokens, d_first.probs, top)
        pos_b = _judgment_position(tokens, d_second.probs, top)
        positions = [
            _fixed("Rating"), _fixed(" A"), _fixed(":"), _fixed(" "), pos_a, _fixed("."),
            _fixed(" Rating"), _fixed(" B"), _fixed(":"), _fixed(" "), pos_b, _fixed("."),
        ]
        text = "".join(p.chosen for p in positions)
        tag = f"{order[0]}{order[1]}"
        out.records.append(
            LogprobRecord(f"{iid}:{tag}", "pairwise-score", tuple(positions), text, instance_id=iid, order=order)
        )
    out.dataset.append({"id": iid, **_labels(rng, u[0], u[1], n_annotators, annotator_noise)})
    out.latents[iid] = u.tolist()


def _gen_pairwise_rank(out, judge, iid, rng, *, k, n_annotators, annotator_noise, top, **_):
    u = rng.uniform(0.0, 1.0, size=2)
    q = _perceive(judge, rng, u)
    symbols = list(LIKERT_SYMBOLS[k])
    for order in ((1, 2), (2, 1)):
        f, s = order[0] - 1, order[1] - 1
        lik = likert_from_gap(q[f] + judge.beta - q[s], k, judge.tau)
        pos = _judgment_position(symbols, lik.probs, top)
        positions = [_fixed("[["), pos, _fixed("]]")]
        text = "".join(p.chosen for p in positions)
        tag = f"{order[0]}{order[1]}"
        out.records.append(
            LogprobRecord(f"{iid}:{tag}", "pairwise-rank", tuple(positions), text, instance_id=iid, order=order)
        )
    out.dataset.append({"id": iid, **_labels(rng, u[0], u[1], n_annotators, annotator_noise)})
    out.latents[iid] = u.tolist()


def _gen_listwise(out, judge, iid, rng, *, list_size, top, **_):
    n = list_size
    ids = list(default_identifiers(n))
    u = rng.uniform(0.0, 1.0, size=n)
    # earlier presentation slots get up to +beta
    bias = judge.beta * (n - 1 - np.arange(n)) / max(n - 1, 1)
    q = _perceive(judge, rng, u) + bias
    pairs = list(itertools.combinations(range(n), 2))
    rng.shuffle(pairs)
    pairs = [(a, b) if rng.random() < 0.5 else (b, a) for a, b in pairs]

    positions: list[Position] = [_fixed("[[")]
    for idx, (a, b) in enumerate(pairs):
        lik = likert_from_gap(q[a] - q[b], 3, judge.tau)
        prefix = "" if idx == 0 else " "
        positions.append(_judgment_position([ids[a], "=", ids[b]], lik.probs, top, prefix))
        if idx < len(pairs) - 1:
            positions.append(_fixed(","))
    positions += [_fixed("]]"), _fixed("\n"), _fixed("[[")]

    remaining = list(range(n))
    scale = (REFERENCE_K - 1) / judge.tau
    for r in range(n):
        logits = np.full(n, -np.inf)
        logits[remaining] = q[remaining] * scale
        w = np.exp(logits - logits[remaining].max())
        p = w / w.sum()
        prefix = "" if r == 0 else " "
        pos = _judgment_position(ids, p, top, prefix)
        positions.append(pos)
        remaining.remove(ids.index(pos.chosen.strip()))
        if r < n - 1:
            positions.append(_fixed(","))
    positions.append(_fixed("]]"))
    text = "".join(p.chosen for p in positions)
    meta = {"n": n, "pairs": [[ids[a], ids[b]] for a, b in pairs]}
    out.records.append(LogprobRecord(iid, "listwise", tuple(positions), text, instance_id=iid, meta=meta))
    for a, b in itertools.combinations(range(n), 2):
        out.dataset.append(
            {
                "id": f"{iid}:{ids[a]}{ids[b]}",
                "list_id": iid,
                "a": ids[a],
                "b": ids[b],
                "label": 1.0 if u[a] > u[b] else 0.0,
                "positions": [a + 1, b + 1],
            }
        )
    out.latents[iid] = u.tolist()


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


def _latent_pairs(n: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).uniform(0.0, 1.0, size=(n, 2))


def sharpening_sweep(taus, n: int = 1000, k: int = 9, seed: int = 0, noise: float = 0.05) -> list[dict]:
    """Average rescaled std and mode/mean sign agreement per ``tau``."""
    u = _latent_pairs(n, seed)
    q = u + noise * np.random.default_rng(seed + 1).standard_normal(u.shape)
    rows = []
    for tau in taus:
        stds, agree = [], 0
        for q1, q2 in q:
            d1 = score_distribution(q1, k, tau)
            d2 = score_distribution(q2, k, tau)
            stds += [std(rescale_to_unit(d1)), std(rescale_to_unit(d2))]
            agree += sign(METHODS["mode"](d1, d2).value) == sign(METHODS["mean"](d1, d2).value, 1e-12)
        rows.append({"tau": tau, "mean_rescaled_std": float(np.mean(stds)), "mode_mean_agreement": agree / n})
    return rows


def tie_rate_sweep(
    ks=(9, 99), methods=("[mean]", "medi", "1p"), n: int = 1000, tau: float = 1.0, seed: int = 0
) -> dict[int, dict[str, float]]:
    """Tie rate of each discrete method at each granularity on shared latents."""
    u = _latent_pairs(n, seed)
    out: dict[int, dict[str, float]] = {}
    for k in ks:
        ties = dict.fromkeys(methods, 0)
        for q1, q2 in u:
            d1 = score_distribution(q1, k, tau)
            d2 = score_distribution(q2, k, tau)
            for m in methods:
                ties[m] += METHODS[m](d1, d2).value == 0.0
        out[k] = {m: c / n for m, c in ties.items()}
    return out


def mode_mean_agreement(pairs) -> float:
    """Fraction of distribution pairs on which mode and mean pick the same sign."""
    pairs = list(pairs)
    hits = sum(
        sign(METHODS["mode"](a, b).value) == sign(METHODS["mean"](a, b).value, 1e-12) for a, b in pairs
    )
    return hits / len(pairs)


__all__ = [
    "ContinuousSpec",
    "LatentJudge",
    "RoundingGaps",
    "SimulatedData",
    "assert_rounding_bounds",
    "discretize",
    "generate_dataset",
    "likert_from_gap",
    "mode_mean_agreement",
    "prop1_check",
    "sample_pointwise",
    "score_distribution",
    "sharpening_sweep",
    "tie_rate_sweep",
]
