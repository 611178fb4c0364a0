"""OpenAI-compatible chat-completions client that records token logprobs."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import string
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Callable, Mapping, Sequence

import httpx

from .listwise import default_identifiers
from .records import LogprobRecord, Position, dumps

log = logging.getLogger(__name__)

TEMPLATES = {
    ("pointwise-score", True): ("pointwise_system_cot.txt", "pointwise_user.txt"),
    ("pointwise-score", False): ("pointwise_system_nocot.txt", "pointwise_user.txt"),
    ("pairwise-score", True): ("pairwise_score_system_cot.txt", "pairwise_user.txt"),
    ("pairwise-score", False): ("pairwise_score_system_nocot.txt", "pairwise_user.txt"),
    ("pairwise-rank", True): ("pairwise_rank_system_cot.txt", "pairwise_user.txt"),
    ("pairwise-rank", False): ("pairwise_rank_system_nocot.txt", "pairwise_user.txt"),
    ("listwise", True): ("listwise_system_interm.txt", None),
    ("listwise", False): ("listwise_system_direct.txt", None),
}

VERDICT_FORMATS = {
    5: (
        '"[[>>]]" if assistant A is significantly better, "[[>]]" if assistant A is slightly better, '
        '"[[=]]" for a tie, "[[<]]" if assistant B is slightly better, and "[[<<]]" if assistant B is '
        "significantly better."
    ),
    3: '"[[>]]" if assistant A is better, "[[=]]" for a tie, and "[[<]]" if assistant B is better.',
    2: '"[[>]]" if assistant A is better and "[[<]]" if assistant B is better.',
}


class TemplateError(KeyError):
    """A template placeholder has no value."""


def load_template(name: str) -> str:
    return resources.files("judgedist").joinpath("prompts", name).read_text(encoding="utf-8")


def _fill(text: str, fields: Mapping[str, object]) -> str:
    tpl = string.Template(text)
    missing = [
        m.group("named") or m.group("braced")
        for m in tpl.pattern.finditer(text)
        if (m.group("named") or m.group("braced")) and (m.group("named") or m.group("braced")) not in fields
    ]
    if missing:
        raise TemplateError(f"missing template fields: {sorted(set(missing))}")
    return tpl.substitute({k: str(v) for k, v in fields.items()})


def _listwise_user(fields: Mapping[str, object], interm: bool) -> str:
    if "conversation" not in fields or "answers" not in fields:
        raise TemplateError("listwise prompts need 'conversation' and 'answers'")
    answers = list(fields["answers"])
    ids = default_identifiers(len(answers))
    parts = [f"[CONVERSATION START]\n{fields['conversation']}\n[CONVERSATION END]"]
    for ident, ans in zip(ids, answers):
        parts.append(f"[MODEL {ident} RESPONSE START]\n{ans}\n[MODEL {ident} RESPONSE END]")
    if interm:
        if "pairs" not in fields:
            raise TemplateError("missing template fields: ['pairs']")
        order = ", ".join(f"({a}, {b})" for a, b in fields["pairs"])
        parts.append(f"PAIRWISE EVALUATION ORDER: [{order}]")
    return "\n\n".join(parts)


def render_prompt(setting: str, cot: bool, fields: Mapping[str, object]) -> list[dict]:
    """System and user messages for one judge call.

    Scoring prompts take ``k``; ranking prompts take ``likert`` (2, 3 or 5);
    listwise prompts take ``conversation``, ``answers`` and, with ``cot``
    (the variant with intermediate pairwise verdicts), ``pairs``.
    """
    try:
        sys_name, user_name = TEMPLATES[(setting, bool(cot))]
    except KeyError:
        raise ValueError(f"unknown setting {setting!r}") from None
    fields = dict(fields)
    if setting == "pairwise-rank":
        lik = int(fields.get("likert", 5))
        if lik not in VERDICT_FORMATS:
            raise ValueError(f"Likert granularity must be 2, 3 or 5, got {lik}")
        fields["verdict_format"] = VERDICT_FORMATS[lik]
    if setting == "listwise":
        n = len(list(fields.get("answers", ())))
        fields.setdefault("n", n)
        fields.setdefault("slots", ", ".join(["_"] * n))
        user = _listwise_user(fields, interm=bool(cot))
    else:
        user = _fill(load_template(user_name), fields)
    system = _fill(load_template(sys_name), fields)
    return [{"role": "system", "content": system}, {"role": "user", "content": user}]


@dataclass(frozen=True)
class JudgeRequest:
    id: str
    setting: str
    messages: tuple[dict, ...]
    model: str = "gpt-4o-2024-08-06"
    top_logprobs: int = 20
    temperature: float = 0.0
    max_tokens: int = 1024
    assistant_prefix: str | None = None
    instance_id: str | None = None
    response: int | None = None
    order: tuple[int, int] | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def payload(self) -> dict:
        messages = [dict(m) for m in self.messages]
        body = {
            "model": self.model,
            "messages": messages,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
            "logprobs": True,
            "top_logprobs": self.top_logprobs,
        }
        if self.assistant_prefix is not None:
            messages.append({"role": "assistant", "content": self.assistant_prefix})
            body["continue_final_message"] = True
            body["add_generation_prompt"] = False
        return body

    def key(self) -> str:
        return hashlib.sha256(dumps(self.payload()).encode("utf-8")).hexdigest()


class ClientError(RuntimeError):
    pass


class AuthError(ClientError):
    pass


class MalformedResponseError(ClientError):
    pass


class RetryExhaustedError(ClientError):
    pass


class PrefixUnsupportedError(ClientError):
    pass


class ResponseCache:
    """Request-hash keyed JSON files; concurrent reads, serialized writes."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _path(self, key: str) -> Path:
        return self.root / f"{key}.json"

    def get(self, key: str) -> dict | None:
        p = self._path(key)
        if not p.exists():
            return None
        return json.loads(p.read_text(encoding="utf-8"))

    def put(self, key: str, request: dict, response: dict) -> None:
        data = dumps({"request": request, "response": response})
        with self._lock:
            fd, tmp = tempfile.mkstemp(dir=self.root, suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(data)
            os.replace(tmp, self._path(key))


RETRY_STATUS = {429, 500, 502, 503, 504}


@dataclass
class JudgeClient:
    base_url: str
    api_key: str | None = None
    cache_dir: str | Path | None = None
    max_attempts: int = 5
    backoff: float = 1.0
    supports_prefix: bool = False
    timeout: float = 120.0
    transport: httpx.BaseTransport | None = None
    sleep: Callable[[float], None] = time.sleep
    attempts_log: list = field(default_factory=list)

    def __post_init__(self):
        self._http = httpx.Client(base_url=self.base_url.rstrip("/"), timeout=self.timeout, transport=self.transport)
        self._cache = ResponseCache(self.cache_dir) if self.cache_dir else None
        self._memo: dict[str, dict] = {}
        self._memo_lock = threading.Lock()

    @classmethod
    def from_env(cls, prefix: str = "JUDGE", **kwargs) -> "JudgeClient":
        """Endpoint from ``{prefix}_BASE_URL`` and key from ``{prefix}_API_KEY``."""
        url = os.environ.get(f"{prefix}_BASE_URL")
        if not url:
            raise ValueError(f"environment variable {prefix}_BASE_URL is not set")
        return cls(url, os.environ.get(f"{prefix}_API_KEY"), **kwargs)

    def close(self) -> None:
        self._http.close()

    def _post(self, body: dict) -> dict:
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        last = None
        for attempt in range(1, self.max_attempts + 1):
            try:
                resp = self._http.post("/chat/completions", json=body, headers=headers)
            except httpx.TransportError as exc:
                last = f"transport error: {exc}"
            else:
                self.attempts_log.append(resp.status_code)
                if resp.status_code in (401, 403):
                    raise AuthError(f"endpoint rejected credentials ({resp.status_code})")
                if resp.status_code == 200:
                    try:
                        return resp.json()
                    except ValueError as exc:
                        raise MalformedResponseError("response body is not JSON") from exc
                if resp.status_code not in RETRY_STATUS:
                    raise ClientError(f"unexpected status {resp.status_code}: {resp.text[:200]}")
                last = f"status {resp.status_code}"
            log.warning("attempt %d failed (%s)", attempt, last)
            if attempt < self.max_attempts:
                self.sleep(self.backoff * 2 ** (attempt - 1))
        raise RetryExhaustedError(f"gave up after {self.max_attempts} attempts ({last})")

    def fetch(self, req: JudgeRequest) -> LogprobRecord:
        if req.assistant_prefix is not None and not self.supports_prefix:
            raise PrefixUnsupportedError("endpoint does not accept an assistant prefix; refusing to approximate")
        key = req.key()
        with self._memo_lock:
            raw = self._memo.get(key)
        if raw is None and self._cache is not None:
            hit = self._cache.get(key)
            raw = hit["response"] if hit else None
        if raw is None:
            raw = self._post(req.payload())
            if self._cache is not None:
                self._cache.put(key, req.payload(), raw)
        with self._memo_lock:
            self._memo[key] = raw
        return parse_response(raw, req)

    def fetch_many(self, reqs: Sequence[JudgeRequest], workers: int = 4) -> list[LogprobRecord]:
        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            records = list(pool.map(self.fetch, reqs))
        return sorted(records, key=lambda r: r.id)

    def run_both_orders(self, req_12: JudgeRequest, req_21: JudgeRequest) -> tuple[LogprobRecord, LogprobRecord]:
        first = self.fetch(replace(req_12, order=(1, 2)))
        second = self.fetch(replace(req_21, order=(2, 1)))
        return first, second


def parse_response(raw: dict, req: JudgeRequest) -> LogprobRecord:
    try:
        choice = raw["choices"][0]
        text = choice["message"]["content"]
        content = choice["logprobs"]["content"]
        if text is None or content is None:
            raise TypeError("null content")
        positions = []
        for item in content:
            top = item.get("top_logprobs") or [{"token": item["token"], "logprob": item["logprob"]}]
            cands = tuple((c["token"], min(float(c["logprob"]), 0.0)) for c in top)
            positions.append(Position(cands, item["token"]))
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise MalformedResponseError(f"response for {req.id} lacks logprobs: {exc!r}") from exc
    if req.assistant_prefix:
        text = req.assistant_prefix + text
        positions.insert(0, Position(((req.assistant_prefix, 0.0),), req.assistant_prefix))
    return LogprobRecord(
        id=req.id,
        setting=req.setting,
        positions=tuple(positions),
        text=text,
        instance_id=req.instance_id,
        response=req.response,
        order=req.order,
        meta=dict(req.meta),
    )


def pairwise_requests(
    instance_id: str,
    setting: str,
    cot: bool,
    question: str,
    answer_1: str,
    answer_2: str,
    **kwargs,
) -> tuple[JudgeRequest, JudgeRequest]:
    """Requests for both presentation orders of a pair; only the answer slots differ."""
    extra = {k: kwargs.pop(k) for k in ("k", "likert") if k in kwargs}
    out = []
    for order, (a, b) in (((1, 2), (answer_1, answer_2)), ((2, 1), (answer_2, answer_1))):
        msgs = render_prompt(setting, cot, {"question": question, "answer_a": a, "answer_b": b, **extra})
        out.append(
            JudgeRequest(
                id=f"{instance_id}:{order[0]}{order[1]}",
                setting=setting,
                messages=tuple(msgs),
                instance_id=instance_id,
                order=order,
                **kwargs,
            )
        )
    return out[0], out[1]
