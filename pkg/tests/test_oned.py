import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from froglab.oned import (OneDModel, coupled_paths, domination_threshold, dominating_step,
                          left_hit_probability_exact, reach_decay_estimate, y_step)
from froglab.rng import RngStream


def test_left_hit_examples():
    assert left_hit_probability_exact(OneDModel.drift(1 / 3)) == pytest.approx(0.5)
    assert left_hit_probability_exact(OneDModel.death(0.8)) == pytest.approx(0.5)
    assert left_hit_probability_exact(OneDModel.death(1 - 1e-12)) == pytest.approx(1, abs=1e-5)


def test_left_hit_death_solves_first_step_equation():
    for s in np.linspace(0.05, 0.95, 10):
        q = left_hit_probability_exact(OneDModel.death(s))
        assert q == pytest.approx(s / 2 + s / 2 * q * q)


def test_left_hit_vacuous_case():
    with pytest.raises(ValueError):
        left_hit_probability_exact(OneDModel.drift(0.0))
    with pytest.raises(ValueError):
        left_hit_probability_exact(OneDModel.death(1.0))


def test_y_step_examples():
    assert y_step(0, 0.7, 1) == 0
    assert y_step(4, 1.0, 1) == 5


def test_y_step_law():
    gen = np.random.default_rng(3)
    n = 10**6
    draws = np.array([y_step(2, 0.5, gen) for _ in range(n // 10)])
    counts = np.bincount(draws, minlength=4)
    chi = stats.chisquare(counts, stats.binom.pmf(np.arange(4), 3, 0.5) * len(draws))
    assert chi.pvalue > 0.01


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32), st.floats(0.01, 0.99))
def test_y_absorbing(seed, p):
    gen = np.random.default_rng(seed)
    y = 0
    for _ in range(20):
        y = y_step(y, p, gen)
        assert y == 0


def brute_k0(p):
    for k in range(1, 10_000):
        pmf = [math.comb(k + 1, j) * p**j * (1 - p) ** (k + 1 - j) for j in range(k)]
        if sum(pmf) > 2 / 3:
            return k


def test_k0_matches_pmf_scan():
    for p in np.round(np.arange(0.1, 1.0, 0.1), 1):
        assert domination_threshold(p) == brute_k0(p)


def test_dominating_step_table():
    k0 = domination_threshold(0.5)
    assert dominating_step(0, 0.5, k0, 1) == 0
    assert all(dominating_step(k0, 1 - 1e-12, k0, RngStream(1, (i,))) == k0 + 1
               for i in range(50))
    with pytest.raises(ValueError):
        dominating_step(k0 - 1, 0.5, k0, 1)


def test_dominating_step_probabilities():
    p, k0 = 0.5, domination_threshold(0.5)
    gen = np.random.default_rng(9)
    n = 40_000
    down = np.mean([dominating_step(k0 + 3, p, k0, gen) == k0 + 2 for _ in range(n)])
    assert abs(down - 2 / 3) < 4 * math.sqrt(2 / 9 / n)
    drop = np.mean([dominating_step(k0, p, k0, gen) == 0 for _ in range(n)])
    q = (1 - p) ** (k0 + 1)
    assert abs(drop - q) < 4 * math.sqrt(q * (1 - q) / n)


def test_coupled_domination_paths():
    violations = 0
    for t in range(10_000):
        p = (t % 9 + 1) / 10
        y, yt = coupled_paths(p, 1 + t % 6, 25, RngStream(4, (t,)))
        violations += int((yt < y).any())
    assert violations == 0


def test_reach_decay_full_drift():
    r = reach_decay_estimate(OneDModel.drift(1.0), 5, 1000, 1)
    assert (r.estimates == 0).all() and r.lower_bound


def test_reach_decay_rejects_short_range():
    with pytest.raises(ValueError):
        reach_decay_estimate(OneDModel.drift(0.5), 2, 10, 1)


@pytest.mark.parametrize("model", [OneDModel.drift(a) for a in (0.2, 0.4, 0.6, 0.8)]
                         + [OneDModel.death(s) for s in (0.7, 0.8, 0.9)])
def test_decay_rate_positive(model):
    r = reach_decay_estimate(model, 8, 20_000, RngStream(2))
    assert r.rate > 0


def test_one_frog_reach_matches_left_hit():
    # with no other frogs to wake, reaching -1 means the origin frog did
    r = reach_decay_estimate(OneDModel.drift(0.6), 3, 50_000, RngStream(8))
    p = left_hit_probability_exact(OneDModel.drift(0.6))
    assert r.estimates[0] >= p - 4 * r.stderr[0]
