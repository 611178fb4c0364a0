import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from judgedist.distribution import JudgmentDistribution, JudgmentSpace  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"


def random_probs(rng, k, sparsity=0.3):
    p = rng.dirichlet(np.full(k, 0.7))
    if sparsity:
        mask = rng.random(k) < sparsity
        if mask.all():
            mask[rng.integers(k)] = False
        p = np.where(mask, 0.0, p)
        p = p / p.sum()
    return p


def random_dist(rng, k=9, sparsity=0.3):
    return JudgmentDistribution(JudgmentSpace.scores(k), random_probs(rng, k, sparsity))


@st.composite
def distributions(draw, k=9):
    weights = draw(st.lists(st.integers(0, 20), min_size=k, max_size=k).filter(lambda w: sum(w) > 0))
    p = np.asarray(weights, float)
    return JudgmentDistribution(JudgmentSpace.scores(k), p / p.sum())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
