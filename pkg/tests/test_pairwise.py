import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from judgedist.distribution import JudgmentDistribution, JudgmentSpace
from judgedist.pairwise import (
    LIKERT_VALUES,
    OrderedJudgment,
    agg_mean,
    agg_medi,
    agg_mode,
    aggregate,
    central_median,
    central_mode,
    likert_distribution,
    post_aggregate_mean,
    post_aggregate_mode,
    pre_aggregate,
    rank_delta,
    score_delta,
)
from judgedist.pointwise import sign

S9 = JudgmentSpace.scores(9)


def as_dict(d):
    return {float(v): round(float(p), 12) for v, p in zip(d.values, d.probs) if p > 0}


def test_likert_value_maps():
    assert LIKERT_VALUES[5] == (2, 1, 0, -1, -2)
    assert LIKERT_VALUES[3] == (1, 0, -1)
    assert LIKERT_VALUES[2] == (1, -1)


def test_score_delta_examples():
    d4 = JudgmentDistribution.point_mass(S9, 4)
    assert as_dict(score_delta(7, d4, (1, 2)).delta) == {3.0: 1.0}
    assert as_dict(score_delta(7, d4, (2, 1)).delta) == {-3.0: 1.0}
    u68 = JudgmentDistribution(S9, [0, 0, 0, 0, 0, 0.5, 0, 0.5, 0])
    assert as_dict(score_delta(7, u68, (1, 2)).delta) == {-1.0: 0.5, 1.0: 0.5}


def test_score_delta_rejects_off_grid_first_score_and_bad_order():
    d = JudgmentDistribution.uniform(S9)
    with pytest.raises(ValueError):
        score_delta(7.5, d, (1, 2))
    with pytest.raises(ValueError):
        score_delta(7, d, (1, 1))


def test_rank_delta_negates_second_order():
    lik = likert_distribution(5, [0.1, 0.2, 0.3, 0.25, 0.15])
    a = rank_delta(lik, (1, 2)).delta
    b = rank_delta(lik, (2, 1)).delta
    assert as_dict(a) == {2.0: 0.1, 1.0: 0.2, 0.0: 0.3, -1.0: 0.25, -2.0: 0.15}
    assert as_dict(b) == {-2.0: 0.1, -1.0: 0.2, 0.0: 0.3, 1.0: 0.25, 2.0: 0.15}
    assert list(a.values) == sorted(a.values)


def test_ordered_judgment_requires_symmetric_support():
    with pytest.raises(ValueError):
        OrderedJudgment((1, 2), JudgmentDistribution.from_values([0, 1, 2], [0.2, 0.3, 0.5]))


def test_central_mode_symmetric_tie_is_zero():
    d = JudgmentDistribution.from_values([-1, 0, 1], [0.4, 0.2, 0.4])
    assert central_mode(d) == 0.0
    d = JudgmentDistribution.from_values([-2, -1, 0, 1, 2], [0.3, 0.1, 0.1, 0.2, 0.3])
    assert central_mode(d) == 0.0
    d = JudgmentDistribution.from_values([-2, -1, 0, 1, 2], [0.3, 0.1, 0.0, 0.3, 0.3])
    assert central_mode(d) == 1.0


def test_central_median_is_antisymmetric_on_even_split():
    d = JudgmentDistribution.from_values([-1, 1], [0.5, 0.5])
    assert central_median(d) == 0.0
    assert agg_medi(d).value == 0.0


def test_zero_over_zero_cases_are_exactly_zero():
    zero = JudgmentDistribution.from_values([-1, 0, 1], [0, 1, 0])
    assert agg_mean(zero).value == 0.0
    oj1, oj2 = OrderedJudgment((1, 2), zero), OrderedJudgment((2, 1), zero)
    assert post_aggregate_mean(oj1, oj2).value == 0.0
    assert post_aggregate_mode(oj1, oj2).value == 0.0
    plus = JudgmentDistribution.from_values([-1, 0, 1], [0, 0, 1])
    minus = JudgmentDistribution.from_values([-1, 0, 1], [1, 0, 0])
    assert post_aggregate_mode(OrderedJudgment((1, 2), plus), OrderedJudgment((2, 1), minus)).value == 0.0


def test_post_aggregate_mode_can_be_fractional():
    a = JudgmentDistribution.from_values([-2, -1, 0, 1, 2], [0, 0, 0, 0, 1])
    b = JudgmentDistribution.from_values([-2, -1, 0, 1, 2], [0, 1, 0, 0, 0])
    assert post_aggregate_mode(OrderedJudgment((1, 2), a), OrderedJudgment((2, 1), b)).value == pytest.approx(1 / 3)


def test_pre_aggregate_requires_both_orders():
    d = JudgmentDistribution.from_values([-1, 1], [0.5, 0.5])
    with pytest.raises(ValueError):
        pre_aggregate(OrderedJudgment((1, 2), d), OrderedJudgment((1, 2), d))
    with pytest.raises(ValueError):
        aggregate(OrderedJudgment((1, 2), d), OrderedJudgment((2, 1), d), timing="during")


likert_probs = {
    k: st.lists(st.integers(0, 30), min_size=k, max_size=k).filter(lambda w: sum(w) > 0) for k in (2, 3, 5)
}


def _lik(k, w):
    w = np.asarray(w, float)
    return likert_distribution(k, w / w.sum())


@given(likert_probs[2], likert_probs[2])
@settings(max_examples=300, deadline=None)
def test_likert2_pre_aggregation_equivalence(w1, w2):
    oj1 = rank_delta(_lik(2, w1), (1, 2))
    oj2 = rank_delta(_lik(2, w2), (2, 1))
    delta = pre_aggregate(oj1, oj2)
    s = {agg_mode(delta).sign, agg_medi(delta).sign, sign(agg_mean(delta).value)}
    assert len(s) == 1


@pytest.mark.parametrize("k", [2, 3])
def test_agreement_collapse_on_short_likert_scales(k):
    rng = np.random.default_rng(k)
    checked = 0
    for _ in range(2000):
        oj1 = rank_delta(likert_distribution(k, rng.dirichlet(np.ones(k))), (1, 2))
        oj2 = rank_delta(likert_distribution(k, rng.dirichlet(np.ones(k))), (2, 1))
        s1, s2 = sign(central_mode(oj1.delta)), sign(central_mode(oj2.delta))
        if s1 == s2 != 0:
            checked += 1
            assert aggregate(oj1, oj2, "mode", "pre").sign == aggregate(oj1, oj2, "mode", "post").sign
    assert checked > 100


def test_agreement_collapse_fails_on_five_point_deltas():
    # both orders have positive modes, yet the mixture's mode is negative
    v = [-2, -1, 0, 1, 2]
    o1 = JudgmentDistribution.from_values(v, [0.35, 0, 0, 0.4, 0.25])
    o2 = JudgmentDistribution.from_values(v, [0.35, 0, 0, 0.25, 0.4])
    oj1, oj2 = OrderedJudgment((1, 2), o1), OrderedJudgment((2, 1), o2)
    assert central_mode(o1) > 0 and central_mode(o2) > 0
    assert aggregate(oj1, oj2, "mode", "post").sign == 1
    assert aggregate(oj1, oj2, "mode", "pre").sign == -1


@given(likert_probs[5], likert_probs[5])
@settings(max_examples=200, deadline=None)
def test_swapping_texts_negates_every_aggregate(w1, w2):
    oj1 = rank_delta(_lik(5, w1), (1, 2))
    oj2 = rank_delta(_lik(5, w2), (2, 1))
    sw1 = OrderedJudgment((1, 2), oj2.delta.reflect())
    sw2 = OrderedJudgment((2, 1), oj1.delta.reflect())
    for center in ("mode", "medi", "mean"):
        for timing in ("pre", "post"):
            a = aggregate(oj1, oj2, center, timing).value
            b = aggregate(sw1, sw2, center, timing).value
            assert abs(a + b) <= 1e-12
