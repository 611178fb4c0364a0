"""Command-line entry point: simulate, judge, compare, evaluate, diagnose."""

from __future__ import annotations

import argparse
import hashlib
import itertools
import json
import logging
import sys
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import (
    alignment,
    disagreement_correlation,
    flip_rate,
    granularity_sensitivity,
    intransitivity_rate,
    multimodality,
    position_bias_list,
    position_bias_pair,
)
from .distribution import JudgmentDistribution, rescale_to_unit, std
from .extract import ExtractionSpec, extract, extract_pairwise_scores
from .listwise import (
    ListParseError,
    default_identifiers,
    interm_preference,
    list_mean,
    list_mode,
    parse_interm_output,
    parse_list_output,
)
from .metrics import EvalInstance, accuracy, mse, tie_analysis
from .pairwise import aggregate, rank_delta, score_delta, single_order_value
from .pointwise import METHODS
from .records import SETTINGS, SchemaError, dumps, read_dataset, read_records, read_jsonl, write_jsonl, write_records
from .simulate import LatentJudge, generate_dataset

log = logging.getLogger("judgedist")

EXIT_OK, EXIT_CONFIG, EXIT_INPUT, EXIT_SCHEMA = 0, 2, 3, 4

PAIRWISE_CENTERS = ("mode", "medi", "mean")
LIST_METHODS = ("list-mode", "list-mean", "interm-mode", "interm-mean")
DISCRETE_OUTPUTS = {
    "mode", "[mean]", "medi", "1p",
    "agg-mode", "agg-medi", "mode-agg", "medi-agg",
    "list-mode", "interm-mode",
}
REFERENCE_ORDER = ("mean", "agg-mean", "mean-agg", "list-mean", "interm-mean")


class ConfigError(ValueError):
    pass


class MissingInputError(FileNotFoundError):
    pass


@dataclass
class RunConfig:
    command: str
    setting: str | None = None
    methods: list[str] = field(default_factory=list)
    k: int = 9
    likert: int = 5
    agg: str = "pre"
    cot: bool = False
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.setting is not None and self.setting not in SETTINGS:
            raise ConfigError(f"unknown setting {self.setting!r}")
        if self.agg not in ("pre", "post"):
            raise ConfigError("--agg must be pre or post")
        if self.likert not in (2, 3, 5):
            raise ConfigError("--likert must be 2, 3 or 5")
        if self.k < 2:
            raise ConfigError("--k must be at least 2")
        if self.command == "compare":
            if not self.methods:
                raise ConfigError("method list is empty")
            allowed = {
                "pointwise-score": set(METHODS),
                "pairwise-score": set(PAIRWISE_CENTERS),
                "pairwise-rank": set(PAIRWISE_CENTERS),
                "listwise": set(LIST_METHODS),
            }[self.setting]
            bad = [m for m in self.methods if m not in allowed]
            if bad:
                raise ConfigError(f"methods {bad} not available for {self.setting}; choose from {sorted(allowed)}")

    def as_dict(self) -> dict:
        return {
            "command": self.command,
            "setting": self.setting,
            "methods": list(self.methods),
            "k": self.k,
            "likert": self.likert,
            "agg": self.agg,
            "cot": self.cot,
            "seed": self.seed,
            **self.extra,
        }


def default_methods(setting: str) -> list[str]:
    if setting == "pointwise-score":
        return list(METHODS)
    if setting == "listwise":
        return list(LIST_METHODS)
    return list(PAIRWISE_CENTERS)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _require(path: str | None, what: str) -> Path:
    if not path:
        raise ConfigError(f"{what} is required")
    p = Path(path)
    if not p.exists():
        raise MissingInputError(f"{what} not found: {p}")
    return p


def write_manifest(target: Path, cfg: RunConfig, inputs: list[Path]) -> Path:
    config = cfg.as_dict()
    manifest = {
        "version": __version__,
        "config": config,
        "config_hash": hashlib.sha256(dumps(config).encode()).hexdigest(),
        "inputs": {p.name: _sha256(p) for p in sorted(inputs, key=lambda q: q.name)},
    }
    path = target / "manifest.json" if target.is_dir() else target.with_name(target.name + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def cmd_simulate(cfg: RunConfig, output: str) -> Path:
    out = Path(output)
    out.mkdir(parents=True, exist_ok=True)
    judge = LatentJudge(
        noise=cfg.extra.get("noise", 0.05),
        tau=cfg.extra.get("tau", 1.0),
        beta=cfg.extra.get("beta", 0.0),
        seed=cfg.seed,
    )
    k = cfg.likert if cfg.setting == "pairwise-rank" else cfg.k
    data = generate_dataset(
        judge,
        cfg.extra.get("n", 100),
        cfg.setting,
        k=k,
        n_annotators=cfg.extra.get("annotators", 0),
        list_size=cfg.extra.get("list_size", 4),
    )
    write_records(out / "records.jsonl", sorted(data.records, key=lambda r: r.id))
    write_jsonl(out / "dataset.jsonl", sorted(data.dataset, key=lambda r: r["id"]))
    write_manifest(out, cfg, [])
    return out


# ---------------------------------------------------------------------------
# judge
# ---------------------------------------------------------------------------


def cmd_judge(cfg: RunConfig, input_path: str, output: str, endpoint_env: str, workers: int, client=None) -> Path:
    from .client import JudgeClient, JudgeRequest, pairwise_requests, render_prompt

    src = _require(input_path, "--input")
    rows = list(read_jsonl(src))
    if client is None:
        client = JudgeClient.from_env(endpoint_env, cache_dir=cfg.extra.get("cache"))
    model = cfg.extra.get("model") or "gpt-4o-2024-08-06"
    rng = np.random.default_rng(cfg.seed)
    reqs = []
    for row in rows:
        iid = str(row["id"])
        answers = row["answers"]
        if cfg.setting == "pointwise-score":
            for r, ans in enumerate(answers, 1):
                msgs = render_prompt(cfg.setting, cfg.cot, {"question": row["question"], "answer": ans, "k": cfg.k})
                reqs.append(JudgeRequest(f"{iid}:{r}", cfg.setting, tuple(msgs), model=model, instance_id=iid, response=r))
        elif cfg.setting in ("pairwise-score", "pairwise-rank"):
            extra = {"k": cfg.k} if cfg.setting == "pairwise-score" else {"likert": cfg.likert}
            reqs += pairwise_requests(iid, cfg.setting, cfg.cot, row["question"], answers[0], answers[1], model=model, **extra)
        else:
            ids = default_identifiers(len(answers))
            pairs = [list(p) for p in itertools.combinations(ids, 2)]
            rng.shuffle(pairs)
            pairs = [p if rng.random() < 0.5 else p[::-1] for p in pairs]
            fields = {"conversation": row["question"], "answers": answers, "pairs": pairs}
            msgs = render_prompt("listwise", cfg.cot, fields)
            meta = {"n": len(answers), "pairs": pairs} if cfg.cot else {"n": len(answers)}
            reqs.append(JudgeRequest(iid, "listwise", tuple(msgs), model=model, instance_id=iid, meta=meta))
    records = client.fetch_many(reqs, workers=workers)
    out = Path(output)
    write_records(out, records)
    write_manifest(out, cfg, [src])
    return out


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------


def _group(records, key):
    groups = defaultdict(dict)
    for r in records:
        groups[r.instance_id or r.id][key(r)] = r
    return groups


def pointwise_distributions(records, k: int) -> dict[str, dict[int, JudgmentDistribution]]:
    spec = ExtractionSpec("pointwise-score", k)
    out: dict[str, dict[int, JudgmentDistribution]] = {}
    for iid, by_resp in _group(records, lambda r: r.response).items():
        out[iid] = {resp: extract(rec, spec).distribution for resp, rec in by_resp.items()}
    return out


def ordered_judgments(records, setting: str, k: int, likert: int):
    """Per instance, the two orders' difference distributions in text 1's frame."""
    out = {}
    for iid, by_order in _group(records, lambda r: r.order).items():
        if set(by_order) != {(1, 2), (2, 1)}:
            raise SchemaError(f"instance {iid} needs records for both presentation orders")
        ojs = []
        for order in ((1, 2), (2, 1)):
            rec = by_order[order]
            if setting == "pairwise-score":
                first, ext = extract_pairwise_scores(rec, k)
                ojs.append(score_delta(first, ext.distribution, order))
            else:
                lik = extract(rec, ExtractionSpec("pairwise-rank", likert)).distribution
                ojs.append(rank_delta(lik, order))
        out[iid] = tuple(ojs)
    return out


def _pointwise_rows(cfg, records):
    rows = []
    for iid, dists in pointwise_distributions(records, cfg.k).items():
        if set(dists) != {1, 2}:
            raise SchemaError(f"instance {iid} needs records for responses 1 and 2")
        rows.append((iid, dists[1], dists[2]))

    def work(item):
        iid, d1, d2 = item
        return {"id": iid, "predictions": {m: METHODS[m](d1, d2).value for m in cfg.methods}}

    return rows, work


def _pairwise_rows(cfg, records):
    rows = list(ordered_judgments(records, cfg.setting, cfg.k, cfg.likert).items())

    def name(center):
        return f"agg-{center}" if cfg.agg == "pre" else f"{center}-agg"

    def work(item):
        iid, (oj1, oj2) = item
        return {"id": iid, "predictions": {name(c): aggregate(oj1, oj2, c, cfg.agg).value for c in cfg.methods}}

    return rows, work


def listwise_pair_values(rec, methods) -> list[dict]:
    n = int(rec.meta.get("n", 0)) or None
    if n is None:
        raise SchemaError(f"listwise record {rec.id} lacks meta.n")
    ids = default_identifiers(n)
    rd = parse_list_output(rec, n, ids)
    ip = None
    if any(m.startswith("interm") for m in methods):
        pairs = rec.meta.get("pairs")
        if not pairs:
            raise SchemaError(f"listwise record {rec.id} lacks the pairwise evaluation order")
        ip = parse_interm_output(rec, [tuple(p) for p in pairs])
    out = []
    for a, b in itertools.combinations(ids, 2):
        preds = {}
        for m in methods:
            if m == "list-mode":
                preds[m] = list_mode(rd, a, b).value
            elif m == "list-mean":
                preds[m] = list_mean(rd, a, b).value
            else:
                preds[m] = interm_preference(ip, a, b, m.split("-")[1]).value
        out.append({"id": f"{rec.instance_id or rec.id}:{a}{b}", "predictions": preds, "a": a, "b": b})
    return out


def _listwise_rows(cfg, records):
    def work(rec):
        return listwise_pair_values(rec, cfg.methods)

    return list(records), work


def compute_predictions(cfg: RunConfig, records, workers: int = 1) -> list[dict]:
    builder = {
        "pointwise-score": _pointwise_rows,
        "pairwise-score": _pairwise_rows,
        "pairwise-rank": _pairwise_rows,
        "listwise": _listwise_rows,
    }[cfg.setting]
    rows, work = builder(cfg, records)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, rows))
    else:
        results = [work(r) for r in rows]
    if cfg.setting == "listwise":
        results = [{"id": x["id"], "predictions": x["predictions"]} for chunk in results for x in chunk]
    return sorted(results, key=lambda x: x["id"])


def _check_settings(records, setting):
    other = {r.setting for r in records} - {setting}
    if other:
        raise SchemaError(f"records of setting {sorted(other)} found, expected {setting}")


def cmd_compare(cfg: RunConfig, input_path: str, output: str, workers: int = 1) -> Path:
    src = _require(input_path, "--input")
    records = read_records(src)
    _check_settings(records, cfg.setting)
    preds = compute_predictions(cfg, records, workers)
    out = Path(output)
    write_jsonl(out, preds)
    write_manifest(out, cfg, [src])
    return out


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------


def evaluate(preds: list[dict], labels: dict[str, dict]) -> dict:
    missing = [p["id"] for p in preds if p["id"] not in labels]
    if missing:
        raise SchemaError(f"no label for predictions {missing[:5]}")
    methods = sorted({m for p in preds for m in p["predictions"]})
    y = np.array([labels[p["id"]]["label"] for p in preds], dtype=float)
    binary = (y == 0.0) | (y == 1.0)
    groups = [labels[p["id"]].get("group") for p in preds]
    report: dict = {"n": len(preds), "n_binary": int(binary.sum()), "methods": {}}
    for m in methods:
        v = np.array([p["predictions"][m] for p in preds], dtype=float)
        inst = [EvalInstance(p["id"], float(x), float(t)) for p, x, t in zip(preds, v, y)]
        entry = {
            "mse": mse(inst),
            "accuracy": accuracy([i for i, b in zip(inst, binary) if b]) if binary.any() else None,
        }
        if any(g is not None for g in groups):
            per_group = {}
            for g in sorted({g for g in groups if g is not None}):
                sel = [i for i, gg, b in zip(inst, groups, binary) if gg == g and b]
                per_group[g] = accuracy(sel) if sel else None
            entry["group_accuracy"] = per_group
            scored = [x for x in per_group.values() if x is not None]
            entry["macro_accuracy"] = float(np.mean(scored)) if scored else None
        report["methods"][m] = entry
    ref = next((r for r in REFERENCE_ORDER if r in methods), None)
    if ref is not None and binary.any():
        ref_v = np.array([p["predictions"][ref] for p in preds], dtype=float)[binary]
        report["tie_analysis"] = {
            "reference": ref,
            "methods": {
                m: tie_analysis(
                    np.array([p["predictions"][m] for p in preds], dtype=float)[binary], ref_v, y[binary]
                ).to_dict()
                for m in methods
                if m in DISCRETE_OUTPUTS
            },
        }
    return report


def cmd_evaluate(cfg: RunConfig, input_path: str, labels_path: str, output: str) -> Path:
    src = _require(input_path, "--input")
    lab = _require(labels_path, "--labels")
    preds = list(read_jsonl(src))
    for p in preds:
        if "id" not in p or not isinstance(p.get("predictions"), dict):
            raise SchemaError("prediction rows need 'id' and a 'predictions' object")
    labels = {row["id"]: row for row in read_dataset(lab)}
    report = evaluate(preds, labels)
    out = Path(output)
    _write_json(out, report)
    write_manifest(out, cfg, [src, lab])
    return out


# ---------------------------------------------------------------------------
# diagnose
# ---------------------------------------------------------------------------


def _summary(xs) -> dict:
    xs = [float(x) for x in xs]
    if not xs:
        return {"mean": None, "n": 0}
    return {"mean": float(np.mean(xs)), "n": len(xs)}


def diagnose(cfg: RunConfig, records, labels: dict | None = None, records_fine=None) -> dict:
    report: dict = {"setting": cfg.setting}
    if cfg.setting == "pointwise-score":
        dists = pointwise_distributions(records, cfg.k)
        flat = [d for by in dists.values() for _, d in sorted(by.items())]
        mm = [multimodality(d) for d in flat]
        report["multimodality"] = {**_summary(mm), "multimodal_rate": float(np.mean([x > 0 for x in mm]))}
        report["std"] = _summary(std(rescale_to_unit(d)) for d in flat)
        triplets = [
            tuple(by[r] for r in combo)
            for by in dists.values()
            for combo in itertools.combinations(sorted(by), 3)
        ]
        report["intransitivity"] = {
            m: (intransitivity_rate(triplets, METHODS[m]) if triplets else None) for m in METHODS
        }
        report["intransitivity"]["n"] = len(triplets)
        if records_fine is not None:
            fine = pointwise_distributions(records_fine, 99)
            common = sorted(set(dists) & set(fine))
            gs = [granularity_sensitivity(dists[i][r], fine[i][r]) for i in common for r in sorted(dists[i])]
            flips = {}
            for m in METHODS:
                a9 = [METHODS[m](dists[i][1], dists[i][2]).value for i in common]
                a99 = [METHODS[m](fine[i][1], fine[i][2]).value for i in common]
                flips[m] = flip_rate(a9, a99)
            report["granularity"] = {"w1": _summary(gs), "flip_rate": flips}
        if labels:
            pairs, hs, ms = [], [], []
            for iid, by in sorted(dists.items()):
                scores = labels.get(iid, {}).get("human_scores")
                if not scores:
                    continue
                for r, d in sorted(by.items()):
                    human = JudgmentDistribution.empirical(d.space, scores[r - 1])
                    pairs.append((d, human))
                    hs.append(std(human))
                    ms.append(std(d))
            if pairs:
                report["alignment"] = {
                    "distribution": alignment(pairs).to_dict(),
                    **{f"baseline_{b}": alignment(pairs, b).to_dict() for b in ("mode", "mean", "median")},
                }
                report["disagreement_correlation"] = disagreement_correlation(hs, ms).to_dict()
    elif cfg.setting in ("pairwise-score", "pairwise-rank"):
        ojs = ordered_judgments(records, cfg.setting, cfg.k, cfg.likert)
        vals = [(single_order_value(a), single_order_value(b)) for _, (a, b) in sorted(ojs.items())]
        report["position_bias"] = position_bias_pair(vals)
        pre = [aggregate(a, b, "mean", "pre") for _, (a, b) in sorted(ojs.items())]
        report["multimodality"] = _summary(
            multimodality(oj.delta) for _, pair in sorted(ojs.items()) for oj in pair
        )
        report["mean_preference"] = _summary(p.value for p in pre)
    else:
        pos_pairs = []
        values = {}
        for rec in sorted(records, key=lambda r: r.id):
            for row in listwise_pair_values(rec, ["list-mean"]):
                a, b = row["a"], row["b"]
                pa, pb = ord(a) - 64, ord(b) - 64
                pos_pairs.append((pa - pb, row["predictions"]["list-mean"]))
                values[(rec.id, a, b)] = row["predictions"]["list-mean"]
        report["position_bias"] = position_bias_list(pos_pairs)
        triplets = []
        for rec in sorted(records, key=lambda r: r.id):
            ids = default_identifiers(int(rec.meta["n"]))
            for x, y, z in itertools.combinations(ids, 3):
                triplets.append((values[(rec.id, x, y)], values[(rec.id, y, z)], values[(rec.id, x, z)]))
        report["intransitivity"] = {"list-mean": intransitivity_rate(triplets) if triplets else None, "n": len(triplets)}
    return report


def cmd_diagnose(
    cfg: RunConfig, input_path: str, output: str, labels_path: str | None = None, fine_path: str | None = None
) -> Path:
    src = _require(input_path, "--input")
    records = read_records(src)
    _check_settings(records, cfg.setting)
    inputs = [src]
    labels = None
    if labels_path:
        lab = _require(labels_path, "--labels")
        labels = {row["id"]: row for row in read_dataset(lab)}
        inputs.append(lab)
    fine = None
    if fine_path:
        fp = _require(fine_path, "--fine-input")
        fine = read_records(fp)
        inputs.append(fp)
    report = diagnose(cfg, records, labels, fine)
    out = Path(output)
    _write_json(out, report)
    write_manifest(out, cfg, inputs)
    return out


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="judgedist", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, methods=False):
        p.add_argument("--setting", choices=SETTINGS, default="pointwise-score")
        p.add_argument("--k", type=int, default=9, help="score granularity")
        p.add_argument("--likert", type=int, default=5, choices=(2, 3, 5))
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--output", required=True)
        p.add_argument("--workers", type=int, default=1)
        if methods:
            p.add_argument("--methods", help="comma-separated method names")
            p.add_argument("--agg", choices=("pre", "post"), default="pre")

    p = sub.add_parser("simulate", help="generate a synthetic judge dataset")
    common(p)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--annotators", type=int, default=0)
    p.add_argument("--list-size", type=int, default=4)

    p = sub.add_parser("judge", help="query a chat endpoint for logprob records")
    common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--cot", action="store_true")
    p.add_argument("--endpoint-env", default="JUDGE", help="prefix of the *_BASE_URL / *_API_KEY variables")
    p.add_argument("--model")
    p.add_argument("--cache")

    p = sub.add_parser("compare", help="per-instance predictions for each method")
    common(p, methods=True)
    p.add_argument("--input", required=True)

    p = sub.add_parser("evaluate", help="accuracy, MSE and tie analysis")
    common(p, methods=True)
    p.add_argument("--input", required=True)
    p.add_argument("--labels", required=True)

    p = sub.add_parser("diagnose", help="distributional diagnostics")
    common(p, methods=True)
    p.add_argument("--input", required=True)
    p.add_argument("--labels")
    p.add_argument("--fine-input", help="K=99 records of the same instances for granularity analysis")
    return parser


def config_from_args(args) -> RunConfig:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()] if getattr(args, "methods", None) else None
    extra = {}
    if args.command == "simulate":
        extra = {
            "n": args.n, "tau": args.tau, "beta": args.beta, "noise": args.noise,
            "annotators": args.annotators, "list_size": args.list_size,
        }
    elif args.command == "judge":
        extra = {"model": args.model, "cache": args.cache}
    cfg = RunConfig(
        command=args.command,
        setting=args.setting,
        methods=methods if methods is not None else default_methods(args.setting),
        k=args.k,
        likert=args.likert,
        agg=getattr(args, "agg", "pre"),
        cot=getattr(args, "cot", False),
        seed=args.seed,
        extra=extra,
    )
    if args.command == "simulate" and args.tau <= 0:
        raise ConfigError("--tau must be positive")
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(args)
        if args.command == "simulate":
            cmd_simulate(cfg, args.output)
        elif args.command == "judge":
            cmd_judge(cfg, args.input, args.output, args.endpoint_env, args.workers)
        elif args.command == "compare":
            cmd_compare(cfg, args.input, args.output, args.workers)
        elif args.command == "evaluate":
            cmd_evaluate(cfg, args.input, args.labels, args.output)
        else:
            cmd_diagnose(cfg, args.input, args.output, args.labels, args.fine_input)
    except MissingInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SchemaError, ListParseError) as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
