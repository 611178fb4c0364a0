"""Judgment distributions from judge logprob records.

The judgment position is the one right after the format anchor when the
record follows the requested format, otherwise the latest position putting
more than half of its candidate mass on judgment tokens.  Probabilities are
``exp(logprob)`` renormalized over the matched judgment tokens.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .distribution import JudgmentDistribution, JudgmentSpace
from .pairwise import LIKERT_SYMBOLS, LIKERT_VALUES, likert_space
from .records import SETTINGS, LogprobRecord

SCORING_SETTINGS = ("pointwise-score", "pairwise-score")
RANKING_SETTINGS = ("pairwise-rank",)

SYMBOL_ALIASES = {"≫": ">>", "≪": "<<", "»": ">>", "«": "<<"}

POSITION_MASS_THRESHOLD = 0.5


@dataclass(frozen=True)
class ExtractionSpec:
    setting: str
    k: int
    format_anchor: str | None = None
    likert_symbols: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.setting not in SETTINGS:
            raise ValueError(f"unknown setting {self.setting!r}")
        if self.setting == "listwise":
            raise ValueError("listwise records are parsed by judgedist.listwise")
        if self.setting in RANKING_SETTINGS:
            if self.k not in LIKERT_VALUES:
                raise ValueError(f"Likert granularity must be 2, 3 or 5, got {self.k}")
            if self.likert_symbols is not None and len(self.likert_symbols) != self.k:
                raise ValueError("one symbol per Likert option")
        elif self.k < 2:
            raise ValueError("score granularity must be at least 2")

    @property
    def is_scoring(self) -> bool:
        return self.setting in SCORING_SETTINGS

    @property
    def space(self) -> JudgmentSpace:
        if self.is_scoring:
            return JudgmentSpace.scores(self.k)
        return likert_space(self.k)

    def token_table(self) -> dict[str, float]:
        """Normalized token text -> judgment value."""
        if self.is_scoring:
            return {str(v): float(v) for v in range(1, self.k + 1)}
        symbols = self.likert_symbols or LIKERT_SYMBOLS[self.k]
        return dict(zip(symbols, LIKERT_VALUES[self.k]))

    def fallback(self) -> JudgmentDistribution:
        """Minimum score when scoring; a tie when ranking."""
        space = self.space
        if self.is_scoring:
            return JudgmentDistribution.point_mass(space, float(space.array.min()))
        if 0.0 in space.values:
            return JudgmentDistribution.point_mass(space, 0.0)
        # Likert-2 has no tie option; split evenly instead
        return JudgmentDistribution.uniform(space)


@dataclass(frozen=True)
class Extraction:
    distribution: JudgmentDistribution
    position: int | None
    matched_mass: float
    fallback: bool = False


def normalize_token(tok: str) -> str:
    s = tok.strip()
    s = s.strip("[]").strip()
    return SYMBOL_ALIASES.get(s, s)


def token_offsets(rec: LogprobRecord) -> list[tuple[int, int]]:
    spans = []
    start = 0
    for tok in rec.decoded_tokens():
        spans.append((start, start + len(tok)))
        start += len(tok)
    return spans


def _matched_mass(position, table: dict[str, float]) -> float:
    return sum(p for tok, p in position.probabilities().items() if normalize_token(tok) in table)


def anchored_position(rec: LogprobRecord, anchor: str) -> int | None:
    """Index of the first non-blank token after the last occurrence of ``anchor``."""
    decoded = "".join(rec.decoded_tokens())
    at = decoded.rfind(anchor)
    if at < 0:
        return None
    end = at + len(anchor)
    for i, (lo, hi) in enumerate(token_offsets(rec)):
        if hi <= end:
            continue
        tail = rec.positions[i].chosen[max(0, end - lo):]
        if tail.strip():
            return i
    return None


def find_judgment_position(rec: LogprobRecord, spec: ExtractionSpec) -> int | None:
    if spec.format_anchor:
        pos = anchored_position(rec, spec.format_anchor)
        if pos is not None:
            return pos
    table = spec.token_table()
    for i in range(len(rec.positions) - 1, -1, -1):
        if _matched_mass(rec.positions[i], table) > POSITION_MASS_THRESHOLD:
            # second digit of a number split over two positions
            if spec.is_scoring and i > 0 and _digit_completions(rec, i - 1, table) is not None:
                return i - 1
            return i
    return None


def _digit_completions(rec: LogprobRecord, i: int, table: dict[str, float]) -> tuple[str, dict[str, float]] | None:
    """Second-digit distribution when the greedy number spans positions ``i`` and ``i+1``."""
    if i + 1 >= len(rec.positions):
        return None
    first = normalize_token(rec.positions[i].chosen)
    second = normalize_token(rec.positions[i + 1].chosen)
    if not (first.isdigit() and second.isdigit() and first + second in table):
        return None
    nxt = rec.positions[i + 1].probabilities()
    total = sum(nxt.values())
    cont = {}
    for tok, p in nxt.items():
        s = normalize_token(tok)
        if s.isdigit() and first + s in table:
            cont[first + s] = cont.get(first + s, 0.0) + p / total
    return first, cont


def extract(rec: LogprobRecord, spec: ExtractionSpec) -> Extraction:
    """Judgment distribution of ``rec`` plus where and how it was found."""
    pos = find_judgment_position(rec, spec)
    if pos is None:
        return Extraction(spec.fallback(), None, 0.0, fallback=True)
    table = spec.token_table()
    space = spec.space
    probs = np.zeros(space.k)
    index = {v: i for i, v in enumerate(space.values)}
    matched = 0.0
    split = _digit_completions(rec, pos, table) if spec.is_scoring else None
    for tok, p in rec.positions[pos].probabilities().items():
        s = normalize_token(tok)
        if split is not None and s == split[0]:
            cont = split[1]
            for num, q in cont.items():
                probs[index[table[num]]] += p * q
            rest = 1.0 - sum(cont.values())
            if s in table and rest > 0:
                probs[index[table[s]]] += p * rest
            matched += p
        elif s in table:
            probs[index[table[s]]] += p
            matched += p
    if probs.sum() <= 0:
        return Extraction(spec.fallback(), pos, 0.0, fallback=True)
    return Extraction(JudgmentDistribution(space, probs / probs.sum()), pos, matched)


def to_distribution(rec: LogprobRecord, spec: ExtractionSpec) -> JudgmentDistribution:
    return extract(rec, spec).distribution


_LIKERT_RE = re.compile(r"\[\[\s*(>>|<<|≫|≪|>|=|<)\s*\]\]")
_INT_RE = re.compile(r"(?<!\d)(\d+)(?!\d)")


def decoded_judgment(rec: LogprobRecord, spec: ExtractionSpec) -> float:
    """Judgment value parsed from the decoded text alone."""
    table = spec.token_table()
    text = rec.text
    if spec.is_scoring:
        if spec.format_anchor:
            hits = re.findall(re.escape(spec.format_anchor) + r"\s*(\d+)", text)
            hits = [h for h in hits if h in table]
            if hits:
                return table[hits[-1]]
        hits = [h for h in _INT_RE.findall(text) if h in table]
        if hits:
            return table[hits[-1]]
    else:
        hits = [normalize_token(h) for h in _LIKERT_RE.findall(text)]
        hits = [h for h in hits if h in table]
        if hits:
            return table[hits[-1]]
        bare = normalize_token(text)
        if bare in table:
            return table[bare]
    return _fallback_value(spec)


def _fallback_value(spec: ExtractionSpec) -> float:
    if spec.is_scoring:
        return 1.0
    return 0.0


PAIRWISE_ANCHORS = ("Rating A:", "Rating B:")


def extract_pairwise_scores(rec: LogprobRecord, k: int, anchors: tuple[str, str] = PAIRWISE_ANCHORS):
    """Greedy first score and conditional second-score extraction for a pairwise scoring run."""
    first_spec = ExtractionSpec("pairwise-score", k, format_anchor=anchors[0])
    second_spec = ExtractionSpec("pairwise-score", k, format_anchor=anchors[1])
    first = decoded_judgment(rec, first_spec)
    second = extract(rec, second_spec)
    return first, second
