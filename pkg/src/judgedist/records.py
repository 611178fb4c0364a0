"""Logprob records and the JSONL files that carry them."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator

import jsonschema

SETTINGS = ("pointwise-score", "pairwise-score", "pairwise-rank", "listwise")

RECORD_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["id", "setting", "positions", "text"],
    "properties": {
        "id": {"type": "string"},
        "setting": {"enum": list(SETTINGS)},
        "instance_id": {"type": "string"},
        "response": {"type": "integer", "minimum": 1},
        "order": {
            "type": "array",
            "items": {"type": "integer", "enum": [1, 2]},
            "minItems": 2,
            "maxItems": 2,
        },
        "positions": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["candidates"],
                "properties": {
                    "token": {"type": "string"},
                    "candidates": {
                        "type": "array",
                        "minItems": 1,
                        "items": {
                            "type": "array",
                            "prefixItems": [{"type": "string"}, {"type": "number", "maximum": 0}],
                            "minItems": 2,
                            "maxItems": 2,
                        },
                    },
                },
            },
        },
        "text": {"type": "string"},
        "meta": {"type": "object"},
    },
}

DATASET_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["id", "label"],
    "properties": {
        "id": {"type": "string"},
        "label": {"type": "number", "minimum": 0, "maximum": 1},
        "human_judgments": {"type": "array", "items": {"type": "number"}},
        "human_scores": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
        "group": {"type": "string"},
        "list_id": {"type": "string"},
        "a": {"type": "string"},
        "b": {"type": "string"},
        "positions": {"type": "array", "items": {"type": "integer"}},
    },
}


class SchemaError(ValueError):
    """A JSONL line does not match the expected schema."""


@dataclass(frozen=True)
class Position:
    """One generated token position: the sampled token and its top candidates."""

    candidates: tuple[tuple[str, float], ...]
    token: str | None = None

    def __post_init__(self):
        cands = tuple((str(t), float(lp)) for t, lp in self.candidates)
        if not cands:
            raise ValueError("a position needs at least one candidate")
        for _, lp in cands:
            if lp > 0 or math.isnan(lp):
                raise ValueError("logprobs must be <= 0")
        object.__setattr__(self, "candidates", cands)

    @property
    def chosen(self) -> str:
        """Decoded token (the top candidate when not recorded explicitly)."""
        if self.token is not None:
            return self.token
        return max(self.candidates, key=lambda c: c[1])[0]

    def probabilities(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for tok, lp in self.candidates:
            out[tok] = out.get(tok, 0.0) + math.exp(lp)
        return out


@dataclass(frozen=True)
class LogprobRecord:
    id: str
    setting: str
    positions: tuple[Position, ...]
    text: str
    instance_id: str | None = None
    response: int | None = None
    order: tuple[int, int] | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.setting not in SETTINGS:
            raise ValueError(f"unknown setting {self.setting!r}")
        object.__setattr__(self, "positions", tuple(self.positions))
        if self.order is not None:
            object.__setattr__(self, "order", tuple(self.order))

    def decoded_tokens(self) -> list[str]:
        return [p.chosen for p in self.positions]

    def to_json(self) -> dict:
        out: dict[str, Any] = {"id": self.id, "setting": self.setting}
        if self.instance_id is not None:
            out["instance_id"] = self.instance_id
        if self.response is not None:
            out["response"] = self.response
        if self.order is not None:
            out["order"] = list(self.order)
        positions = []
        for p in self.positions:
            pos: dict[str, Any] = {}
            if p.token is not None:
                pos["token"] = p.token
            pos["candidates"] = [[t, lp] for t, lp in p.candidates]
            positions.append(pos)
        out["positions"] = positions
        out["text"] = self.text
        if self.meta:
            out["meta"] = self.meta
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "LogprobRecord":
        try:
            jsonschema.validate(obj, RECORD_SCHEMA)
        except jsonschema.ValidationError as exc:
            raise SchemaError(f"record {obj.get('id', '?')}: {exc.message}") from exc
        positions = tuple(
            Position(tuple((c[0], c[1]) for c in p["candidates"]), p.get("token"))
            for p in obj["positions"]
        )
        order = obj.get("order")
        return cls(
            id=obj["id"],
            setting=obj["setting"],
            positions=positions,
            text=obj["text"],
            instance_id=obj.get("instance_id"),
            response=obj.get("response"),
            order=tuple(order) if order is not None else None,
            meta=obj.get("meta", {}),
        )


def dumps(obj: Any) -> str:
    """Canonical single-line JSON (sorted keys, no NaN)."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def read_jsonl(path: str | Path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc


def write_jsonl(path: str | Path, rows: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(dumps(row))
            fh.write("\n")


def read_records(path: str | Path) -> list[LogprobRecord]:
    return [LogprobRecord.from_json(obj) for obj in read_jsonl(path)]


def write_records(path: str | Path, records: Iterable[LogprobRecord]) -> None:
    write_jsonl(path, (r.to_json() for r in records))


def read_dataset(path: str | Path) -> list[dict]:
    rows = []
    for obj in read_jsonl(path):
        try:
            jsonschema.validate(obj, DATASET_SCHEMA)
        except jsonschema.ValidationError as exc:
            raise SchemaError(f"dataset row {obj.get('id', '?')}: {exc.message}") from exc
        rows.append(obj)
    return rows
