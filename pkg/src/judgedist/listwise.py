"""Pairwise preferences read off listwise judge runs.

Three judgment spaces are supported: the intermediate pairwise verdicts a
judge writes before its list, the final list itself, and a list produced
without the intermediate step.  The last two share the same parser.
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass, field

import numpy as np

from .distribution import JudgmentDistribution, mode
from .extract import normalize_token, token_offsets
from .pairwise import likert_space, rank_delta
from .pointwise import Preference, normalized_mean, sign
from .records import LogprobRecord


class ListParseError(ValueError):
    """The decoded list could not be parsed; ``raw_text`` holds the judge output."""

    def __init__(self, message: str, raw_text: str = ""):
        super().__init__(message)
        self.raw_text = raw_text


def default_identifiers(n: int) -> tuple[str, ...]:
    if n > 26:
        raise ValueError("at most 26 letter identifiers")
    return tuple(string.ascii_uppercase[:n])


@dataclass(frozen=True)
class RankDistributions:
    """Per-rank identifier distributions of one decoded list.

    ``probs[r, t]`` is the probability of identifier ``identifiers[t]`` at
    rank ``r + 1``; ``decoded[r]`` is the identifier actually decoded there.
    """

    identifiers: tuple[str, ...]
    probs: np.ndarray
    decoded: tuple[str, ...]

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        n = len(self.identifiers)
        if probs.ndim != 2 or probs.shape[1] != n:
            raise ValueError("probs must have one column per identifier")
        if len(self.decoded) != probs.shape[0]:
            raise ValueError("one decoded identifier per rank")
        if len(set(self.decoded)) != len(self.decoded):
            raise ValueError("decoded identifiers must be distinct")
        unknown = set(self.decoded) - set(self.identifiers)
        if unknown:
            raise ValueError(f"decoded identifiers not in the identifier set: {sorted(unknown)}")
        sums = probs.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-6) and not np.all(sums[np.abs(sums - 1.0) > 1e-6] == 0):
            raise ValueError("each rank distribution must sum to 1")
        probs.setflags(write=False)
        object.__setattr__(self, "identifiers", tuple(self.identifiers))
        object.__setattr__(self, "decoded", tuple(self.decoded))
        object.__setattr__(self, "probs", probs)

    @property
    def n(self) -> int:
        return len(self.identifiers)

    def rank_of(self, ident: str) -> int:
        """1-based rank at which ``ident`` was decoded."""
        try:
            return self.decoded.index(ident) + 1
        except ValueError:
            raise KeyError(f"identifier {ident!r} was not decoded") from None

    def column(self, ident: str) -> int:
        return self.identifiers.index(ident)


def list_mode(rd: RankDistributions, i: str, j: str) -> Preference:
    """+1 when ``i`` was decoded ahead of ``j``, else -1."""
    if i == j:
        raise ValueError("cannot compare an identifier with itself")
    return Preference(1.0 if rd.rank_of(i) < rd.rank_of(j) else -1.0, "list-mode", discrete=True)


def list_mean(rd: RankDistributions, i: str, j: str) -> Preference:
    """Average of ``p_r(i) / (p_r(i) + p_r(j))`` over ranks up to the first decoding of ``i`` or ``j``.

    Reported on the ``[-1, 1]`` scale (``2v - 1``).
    """
    if i == j:
        raise ValueError("cannot compare an identifier with itself")
    stop = min(rd.rank_of(i), rd.rank_of(j))
    pi = rd.probs[:stop, rd.column(i)]
    pj = rd.probs[:stop, rd.column(j)]
    total = pi + pj
    # (pi - pj)/(pi + pj) == 2 * pi/(pi + pj) - 1, and is exactly antisymmetric
    ratios = np.divide(pi - pj, total, out=np.zeros(stop), where=total > 0)
    return Preference(float(ratios.sum() / stop), "list-mean")


_LIST_RE = re.compile(r"\[\[([^\[\]]*)\]\]")


def _slot_distribution(position, identifiers, exclude=()) -> np.ndarray:
    probs = np.zeros(len(identifiers))
    lookup = {ident: t for t, ident in enumerate(identifiers)}
    for tok, p in position.probabilities().items():
        s = normalize_token(tok).strip(",").strip()
        if s in lookup and s not in exclude:
            probs[lookup[s]] += p
    total = probs.sum()
    return probs / total if total > 0 else probs


def parse_list_output(
    rec: LogprobRecord,
    n: int,
    identifiers: tuple[str, ...] | None = None,
    exclude_decoded: bool = False,
) -> RankDistributions:
    """Rank distributions from the final ``[[A, B, ...]]`` list of a listwise run.

    With ``exclude_decoded`` each rank's distribution is renormalized over the
    identifiers not decoded at earlier ranks.
    """
    identifiers = identifiers or default_identifiers(n)
    decoded_text = "".join(rec.decoded_tokens())
    matches = list(_LIST_RE.finditer(decoded_text))
    if not matches:
        raise ListParseError("no bracketed list in the judge output", rec.text)
    m = matches[-1]
    items = [x.strip() for x in m.group(1).split(",")]
    if len(items) != n:
        raise ListParseError(f"expected {n} identifiers, found {len(items)}", rec.text)
    if len(set(items)) != n:
        raise ListParseError("repeated identifier in the decoded list", rec.text)
    if set(items) - set(identifiers):
        raise ListParseError(f"unknown identifiers {sorted(set(items) - set(identifiers))}", rec.text)
    lo, hi = m.start(1), m.end(1)
    slots = []
    for idx, (a, b) in enumerate(token_offsets(rec)):
        if b <= lo or a >= hi:
            continue
        s = normalize_token(rec.positions[idx].chosen).strip(",").strip()
        if s in identifiers:
            slots.append(idx)
    if len(slots) != n:
        raise ListParseError("list identifiers are not aligned with single token positions", rec.text)
    rows = []
    for r, idx in enumerate(slots):
        exclude = tuple(items[:r]) if exclude_decoded else ()
        rows.append(_slot_distribution(rec.positions[idx], identifiers, exclude))
    return RankDistributions(tuple(identifiers), np.array(rows), tuple(items))


@dataclass(frozen=True)
class IntermEntry:
    pair: tuple[str, str]
    likert: JudgmentDistribution
    decoded: float | None = None


@dataclass(frozen=True)
class IntermPreferences:
    """Intermediate Likert-3 verdicts, one per pair, in one presentation order."""

    entries: tuple[IntermEntry, ...] = field(default_factory=tuple)

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            key = frozenset(e.pair)
            if key in seen:
                raise ValueError(f"pair {e.pair} appears more than once")
            seen.add(key)
        object.__setattr__(self, "entries", tuple(self.entries))

    def lookup(self, i: str, j: str) -> tuple[IntermEntry, bool]:
        """Entry for the pair and whether it is stored as ``(j, i)``."""
        for e in self.entries:
            if e.pair == (i, j):
                return e, False
            if e.pair == (j, i):
                return e, True
        raise KeyError(f"pair ({i}, {j}) has no intermediate preference")


def interm_preference(ip: IntermPreferences, i: str, j: str, variant: str = "mean") -> Preference:
    entry, flipped = ip.lookup(i, j)
    factor = -1.0 if flipped else 1.0
    if variant == "mode":
        decoded = entry.decoded
        if decoded is None:
            decoded = mode(entry.likert)
        return Preference(factor * sign(decoded), "interm-mode", discrete=True)
    if variant == "mean":
        delta = rank_delta(entry.likert, (1, 2)).delta
        return Preference(factor * normalized_mean(delta), "interm-mean")
    raise ValueError(f"variant must be 'mode' or 'mean', got {variant!r}")


def parse_interm_output(rec: LogprobRecord, pairs: list[tuple[str, str]]) -> IntermPreferences:
    """Intermediate verdicts: the letter of the better text of each pair, or ``=``.

    The verdict tokens are the first ``len(pairs)`` positions inside the first
    bracketed array of the output.
    """
    decoded_text = "".join(rec.decoded_tokens())
    m = _LIST_RE.search(decoded_text)
    if m is None:
        raise ListParseError("no bracketed pairwise array in the judge output", rec.text)
    items = [x.strip() for x in m.group(1).split(",")]
    if len(items) != len(pairs):
        raise ListParseError(f"expected {len(pairs)} pairwise verdicts, found {len(items)}", rec.text)
    lo, hi = m.start(1), m.end(1)
    slots = []
    for idx, (a, b) in enumerate(token_offsets(rec)):
        if b <= lo or a >= hi:
            continue
        s = normalize_token(rec.positions[idx].chosen).strip(",").strip()
        if s:
            slots.append(idx)
    if len(slots) != len(pairs):
        raise ListParseError("pairwise verdicts are not aligned with single token positions", rec.text)
    space = likert_space(3)
    entries = []
    for (a, b), idx, item in zip(pairs, slots, items):
        probs = np.zeros(3)
        for tok, p in rec.positions[idx].probabilities().items():
            s = normalize_token(tok).strip(",").strip()
            if s == a:
                probs[0] += p
            elif s == "=":
                probs[1] += p
            elif s == b:
                probs[2] += p
        if probs.sum() > 0:
            dist = JudgmentDistribution(space, probs / probs.sum())
        else:
            dist = JudgmentDistribution.point_mass(space, 0.0)
        decoded = 1.0 if item == a else -1.0 if item == b else 0.0
        entries.append(IntermEntry((a, b), dist, decoded))
    return IntermPreferences(tuple(entries))
