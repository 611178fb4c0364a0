"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""

import itertools
import json
import time

import numpy as np
import pytest

import oracles
from conftest import FIXTURES, random_dist
from judgedist.cli import main
from judgedist.diagnostics import flip_rate, intransitivity_rate, multimodality, wasserstein
from judgedist.distribution import JudgmentDistribution, JudgmentSpace
from judgedist.listwise import RankDistributions, default_identifiers, list_mean, list_mode
from judgedist.metrics import EvalInstance, accuracy, mse
from judgedist.pairwise import (
    OrderedJudgment,
    agg_mean,
    agg_medi,
    agg_mode,
    aggregate,
    central_mode,
    likert_distribution,
    post_aggregate_mean,
    post_aggregate_medi,
    post_aggregate_mode,
    pre_aggregate,
    rank_delta,
)
from judgedist.pointwise import METHODS, MONOTONE_INVARIANT_METHODS, SINGLE_STATISTIC_METHODS, cmp_mean, sign
from judgedist.simulate import ContinuousSpec, prop1_check, sharpening_sweep, tie_rate_sweep

S9 = JudgmentSpace.scores(9)


class Gate:
    def __init__(self, capsys, number, title, limit):
        self.capsys, self.number, self.title, self.limit = capsys, number, title, limit
        self.failures = []

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def check(self, ok, message):
        if not ok:
            self.failures.append(message)

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.start
        if exc is not None:
            self.failures.append(f"{exc_type.__name__}: {exc}")
        if elapsed >= self.limit:
            self.failures.append(f"runtime {elapsed:.3f}s over {self.limit}s")
        status = "PASS" if not self.failures else "FAIL"
        detail = "" if not self.failures else " | " + "; ".join(self.failures[:5])
        with self.capsys.disabled():
            print(f"\n[{status}] criterion {self.number:>2}: {self.title} ({elapsed:.3f}s){detail}")
        assert not self.failures, "; ".join(self.failures[:5])
        return True


def test_criterion_01_multimodality_exact(capsys):
    d = JudgmentDistribution.from_values([1, 2, 3], [0.5, 0.2, 0.3])
    multimodality(d)  # warm-up outside the timed block
    with Gate(capsys, 1, "multimodality worked example", 1e-3) as g:
        val = multimodality(d)
        g.check(abs(val - 1 / 11) <= 1e-12, f"got {val}")


def test_criterion_02_oracle_equivalence(capsys):
    rng = np.random.default_rng(2)
    v = list(range(1, 10))
    with Gate(capsys, 2, "ps vs Monte Carlo, qt vs comonotone coupling", 60) as g:
        worst_ps = worst_qt = 0.0
        for _ in range(10_000):
            a, b = random_dist(rng), random_dist(rng)
            ps = METHODS["ps"](a, b).value
            qt = METHODS["qt"](a, b).value
            worst_ps = max(worst_ps, abs(ps - oracles.cmp_ps_monte_carlo(v, a.probs, v, b.probs, 10**6, rng)))
            worst_qt = max(worst_qt, abs(qt - oracles.cmp_qt(v, a.probs, v, b.probs)))
        g.check(worst_ps <= 0.01, f"ps max gap {worst_ps}")
        g.check(worst_qt <= 1e-9, f"qt max gap {worst_qt}")


def test_criterion_03_invariances(capsys):
    rng = np.random.default_rng(3)
    affine = lambda x: 2.5 * x - 3.0  # noqa: E731
    monotone = lambda x: np.exp(x) + x**3  # noqa: E731
    with Gate(capsys, 3, "invariance suite", 10) as g:
        for _ in range(1000):
            a, b = random_dist(rng), random_dist(rng)
            aa, ba = a.relabel(affine), b.relabel(affine)
            am, bm = a.relabel(monotone), b.relabel(monotone)
            for name, fn in METHODS.items():
                ab, ba_ = fn(a, b).value, fn(b, a).value
                g.check(abs(ab + ba_) <= 1e-12, f"{name} antisymmetry {ab} {ba_}")
                g.check(-1.0 <= ab <= 1.0, f"{name} range {ab}")
                g.check(abs(fn(aa, ba).value - ab) <= 1e-9, f"{name} affine")
                if name in MONOTONE_INVARIANT_METHODS:
                    g.check(abs(fn(am, bm).value - ab) <= 1e-9, f"{name} monotone")
            x, y = rng.integers(1, 10, size=2)
            pa, pb = JudgmentDistribution.point_mass(S9, x), JudgmentDistribution.point_mass(S9, y)
            signs = {sign(fn(pa, pb).value) for fn in METHODS.values()}
            g.check(signs == {int(np.sign(x - y))}, f"point masses {x} {y}: {signs}")


def test_criterion_04_mean_continuity(capsys):
    with Gate(capsys, 4, "epsilon-continuity of mean", 1) as g:
        for k, kp in itertools.permutations(range(1, 10), 2):
            vals = []
            for eps in (1e-2, 1e-3, 1e-4):
                p = np.zeros(9)
                p[k - 1] += 1 - eps
                p[kp - 1] += eps
                vals.append(abs(cmp_mean(JudgmentDistribution(S9, p), JudgmentDistribution.point_mass(S9, k)).value))
            g.check(vals[0] > vals[1] > vals[2], f"({k},{kp}) not decreasing {vals}")
            g.check(vals[2] < 0.02, f"({k},{kp}) at 1e-4 is {vals[2]}")


def test_criterion_05_pairwise_laws(capsys):
    rng = np.random.default_rng(5)
    with Gate(capsys, 5, "pairwise aggregation laws", 5) as g:
        for _ in range(1000):
            oj1 = rank_delta(likert_distribution(2, rng.dirichlet(np.ones(2))), (1, 2))
            oj2 = rank_delta(likert_distribution(2, rng.dirichlet(np.ones(2))), (2, 1))
            d = pre_aggregate(oj1, oj2)
            s = {agg_mode(d).sign, agg_medi(d).sign, sign(agg_mean(d).value)}
            g.check(len(s) == 1, f"Likert-2 signs differ {s}")
        for k in (2, 3, 5):
            checked = violations = 0
            for _ in range(1000):
                oj1 = rank_delta(likert_distribution(k, rng.dirichlet(np.ones(k))), (1, 2))
                oj2 = rank_delta(likert_distribution(k, rng.dirichlet(np.ones(k))), (2, 1))
                s1, s2 = sign(central_mode(oj1.delta)), sign(central_mode(oj2.delta))
                if s1 == s2 != 0:
                    checked += 1
                    pre = aggregate(oj1, oj2, "mode", "pre").sign
                    post = aggregate(oj1, oj2, "mode", "post").sign
                    violations += pre != post
            g.check(violations == 0, f"agreement collapse Likert-{k}: {violations}/{checked} violations")
        zero = JudgmentDistribution.from_values([-1, 0, 1], [0, 1, 0])
        plus = JudgmentDistribution.from_values([-1, 0, 1], [0, 0, 1])
        minus = JudgmentDistribution.from_values([-1, 0, 1], [1, 0, 0])
        z1, z2 = OrderedJudgment((1, 2), zero), OrderedJudgment((2, 1), zero)
        cases = [
            agg_mean(zero).value,
            post_aggregate_mean(z1, z2).value,
            post_aggregate_mode(z1, z2).value,
            post_aggregate_medi(z1, z2).value,
            post_aggregate_mode(OrderedJudgment((1, 2), plus), OrderedJudgment((2, 1), minus)).value,
        ]
        g.check(all(c == 0.0 for c in cases), f"0/0 cases {cases}")


def test_criterion_06_rounding_bounds(capsys):
    rng = np.random.default_rng(6)
    with Gate(capsys, 6, "rounding bounds on piecewise-linear densities", 30) as g:
        for k in (9, 99):
            for _ in range(1000):
                c = ContinuousSpec.random(k, rng)
                for p in (0.01, 0.5):
                    gaps = prop1_check(c, k, p)
                    g.check(gaps.ok, f"K={k} p={p} gaps {gaps}")


def test_criterion_07_tie_rates(capsys):
    with Gate(capsys, 7, "finer granularity lowers tie rates", 30) as g:
        rates = tie_rate_sweep(ks=(9, 99), methods=("[mean]", "medi", "1p"), n=1000, tau=1.0, seed=7)
        for m in ("[mean]", "medi", "1p"):
            r9, r99 = rates[9][m], rates[99][m]
            g.check(r99 < r9 and 2 * r99 <= r9, f"{m}: K=9 {r9} vs K=99 {r99}")


def test_criterion_08_sharpening(capsys):
    with Gate(capsys, 8, "sharpening trend", 30) as g:
        rows = sharpening_sweep([1.5, 1.0, 0.5, 0.25], n=1000, k=9, seed=8)
        stds = [r["mean_rescaled_std"] for r in rows]
        agree = [r["mode_mean_agreement"] for r in rows]
        g.check(all(a > b for a, b in zip(stds, stds[1:])), f"std {stds}")
        g.check(all(a <= b for a, b in zip(agree, agree[1:])), f"agreement {agree}")


def test_criterion_09_metrics(capsys):
    data = json.loads((FIXTURES / "metrics_20.json").read_text())
    with Gate(capsys, 9, "metrics fixture and constant tie predictor", 1) as g:
        inst = [EvalInstance(r["id"], r["prediction"], r["label"], r["group"]) for r in data["instances"]]
        g.check(abs(accuracy(inst) - data["accuracy"]) <= 1e-12, f"accuracy {accuracy(inst)}")
        g.check(abs(mse(inst) - data["mse"]) <= 1e-12, f"mse {mse(inst)}")
        labels = np.random.default_rng(9).integers(0, 2, size=100)
        ties = [EvalInstance(str(i), 0.0, float(y)) for i, y in enumerate(labels)]
        g.check(accuracy(ties) == 0.5, f"tie accuracy {accuracy(ties)}")
        g.check(mse(ties) == 0.25, f"tie mse {mse(ties)}")


def test_criterion_10_diagnostics(capsys):
    rng = np.random.default_rng(10)
    faces = {"A": (2, 4, 9), "B": (1, 6, 8), "C": (3, 5, 7)}
    dice = [JudgmentDistribution.empirical(S9, f) for f in faces.values()]
    with Gate(capsys, 10, "diagnostics sanity", 30) as g:
        for _ in range(100):
            a, b, c = (random_dist(rng) for _ in range(3))
            for p in (1, 2):
                ab, bc, ac = wasserstein(a, b, p), wasserstein(b, c, p), wasserstein(a, c, p)
                g.check(abs(wasserstein(a, a, p)) <= 1e-9, "identity")
                g.check(abs(ab - wasserstein(b, a, p)) <= 1e-9, "symmetry")
                g.check(ac <= ab + bc + 1e-9, "triangle")
                g.check(ab >= -1e-9 and (ab > 1e-9 or np.allclose(a.probs, b.probs)), "separation")
        g.check(flip_rate([1, -1, 0, 1], [1, -1, 0, 1]) == 0.0, "flip 0")
        g.check(flip_rate([1, -1, 1], [-1, 1, -1]) == 1.0, "flip 1")
        g.check(flip_rate([1, 1, 1, 1, 1], [1, 1, 1, 1, -1]) == pytest.approx(1 / 5, abs=1e-12), "flip 1/5")
        triplets = [tuple(random_dist(rng) for _ in range(3)) for _ in range(1000)]
        for m in SINGLE_STATISTIC_METHODS:
            rate = intransitivity_rate(triplets, lambda x, y, m=m: METHODS[m](x, y).value)
            g.check(rate == 0.0, f"{m} intransitivity {rate}")
        dice_rate = intransitivity_rate([tuple(dice)], lambda x, y: METHODS["ps"](x, y).value)
        g.check(dice_rate > 0, f"dice rate {dice_rate}")


def test_criterion_11_listwise(capsys):
    rng = np.random.default_rng(11)
    with Gate(capsys, 11, "listwise consistency", 5) as g:
        for _ in range(1000):
            n = int(rng.integers(2, 7))
            ids = default_identifiers(n)
            decoded = tuple(ids[t] for t in rng.permutation(n))
            probs = rng.dirichlet(np.full(n, 0.5), size=n)
            probs[rng.random(probs.shape) < 0.2] = 0.0
            for r in range(n):
                if probs[r].sum() == 0:
                    probs[r, rng.integers(n)] = 1.0
            probs /= probs.sum(axis=1, keepdims=True)
            rd = RankDistributions(ids, probs, decoded)
            point = RankDistributions(ids, np.eye(n)[[ids.index(d) for d in decoded]], decoded)
            for i, j in itertools.permutations(ids, 2):
                g.check(list_mean(rd, i, j).value == -list_mean(rd, j, i).value, f"antisymmetry {i} {j}")
                g.check(
                    sign(list_mean(point, i, j).value) == list_mode(point, i, j).value,
                    f"point-mass reduction {i} {j}",
                )


def test_criterion_12_determinism(capsys, tmp_path):
    def pipeline(root):
        sim = root / "sim"
        assert main(["simulate", "--n", "200", "--seed", "12", "--annotators", "3", "--output", str(sim)]) == 0
        pred = root / "pred.jsonl"
        assert main(["compare", "--input", str(sim / "records.jsonl"), "--output", str(pred)]) == 0
        rep = root / "report.json"
        assert main(["evaluate", "--input", str(pred), "--labels", str(sim / "dataset.jsonl"), "--output", str(rep)]) == 0
        return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}

    with Gate(capsys, 12, "end-to-end determinism", 60) as g:
        first = pipeline(tmp_path / "a")
        second = pipeline(tmp_path / "b")
        g.check(len(first) >= 7, f"only {sorted(first)}")
        g.check(first == second, f"differing files {[k for k in first if first[k] != second.get(k)]}")
