import math
from collections import defaultdict

import numpy as np
import pytest
from scipy import optimize

from froglab.brw import (MuEstimate, OffspringModel, TransienceCertificate, _verdict,
                         certify_transience, entrance_exit_times, estimate_mu_1d_projected,
                         estimate_mu_lines, line_occupancy, mu_exact_1d, optimal_theta_1d,
                         reference_brw_boundary, sample_xi, sample_xi_batch,
                         simulate_brw_martingale)
from froglab.rng import RngStream
from froglab.stats import log_linear_fit


def test_xi_without_survival():
    xs = sample_xi_batch(1.0, 1000, RngStream(1))
    assert (xs == 2).all()
    assert sample_xi(1.0, 10, 3) == (2, False)


def test_xi_rejects_bad_arguments():
    with pytest.raises(ValueError):
        sample_xi(0.0, 10, 1)
    with pytest.raises(ValueError):
        sample_xi(0.5, 1, 1)


def test_xi_cap_flag():
    x, capped = sample_xi(0.05, 3, RngStream(2))
    assert x <= 3 and capped == (x >= 3)


def test_xi_tail_geometric():
    xs = sample_xi_batch(0.5, 100_000, RngStream(4))
    k = np.arange(2, 12)
    tail = np.array([(xs > j).mean() for j in k])
    fit = log_linear_fit(k, tail)
    assert fit.slope < 0 and fit.r2 > 0.95


def _range_law(s, h):
    """Law of (min, max) offset of one frog: lifetime L with P(L >= l) = s^l,
    at most ``h`` steps, each +-1 equally likely."""
    law = defaultdict(float)
    for ell in range(h + 1):
        p_ell = s**ell * (1 - s) if ell < h else s**h
        for bits in range(2**ell):
            pos, lo, hi = 0, 0, 0
            for j in range(ell):
                pos += 1 if (bits >> j) & 1 else -1
                lo, hi = min(lo, pos), max(hi, pos)
            law[(lo, hi)] += p_ell / 2**ell
    return law


def xi_enumeration(w, h, width=60):
    """Exact law of the activated count with frogs walking at most ``h`` steps.

    States (lo, hi, pl, pr, left0): visited interval, processed sites and
    unprocessed frogs at the origin.
    """
    law = _range_law(1 - w, h)
    states = {(0, 0, 0, 0, 2): 1.0}
    out = defaultdict(float)
    while states:
        nxt = defaultdict(float)
        for (lo, hi, pl, pr, left0), p in states.items():
            if left0 > 0:
                x, st = 0, (pl, pr, left0 - 1)
            elif pl > lo:
                x, st = pl - 1, (pl - 1, pr, 0)
            elif pr < hi:
                x, st = pr + 1, (pl, pr + 1, 0)
            else:
                out[hi - lo + 2] += p
                continue
            if hi - lo > width:
                continue  # negligible mass
            for (a, b), q in law.items():
                nxt[(min(lo, x + a), max(hi, x + b)) + st] += p * q
        states = nxt
    return out


def test_xi_matches_enumeration():
    w, h = 0.5, 4
    exact = xi_enumeration(w, h)
    assert sum(exact.values()) == pytest.approx(1, abs=1e-9)
    xs = sample_xi_batch(w, 200_000, RngStream(6), max_steps=h)
    vals, counts = np.unique(xs, return_counts=True)
    emp = dict(zip(vals.tolist(), (counts / len(xs)).tolist()))
    keys = set(emp) | set(exact)
    tv = 0.5 * sum(abs(emp.get(k, 0) - exact.get(k, 0)) for k in keys)
    assert tv < 0.02


def test_mu_exact_examples():
    m = 3.7
    assert mu_exact_1d(1.0, math.log(2 * m), m) == pytest.approx(0.5)
    assert mu_exact_1d(0.0, 0.0, m) == pytest.approx(m)
    assert mu_exact_1d(0.9, 1.0, 2.0) == pytest.approx(0.1 * math.e + 1.9 / math.e)
    assert mu_exact_1d(0.9, 1.0, 2.0) == pytest.approx(0.9708, abs=1e-4)


@pytest.mark.parametrize("alpha", [0.1, 0.5, 0.9, 0.99])
def test_mu_convex_with_known_minimiser(alpha):
    f = lambda t: mu_exact_1d(alpha, t, 2.0)
    ts = np.linspace(0.01, 5, 300)
    v = np.array([f(t) for t in ts])
    assert (np.diff(v, 2) >= -1e-12).all()
    r = optimize.minimize_scalar(f, bounds=(0, 10), method="bounded",
                                 options={"xatol": 1e-9})
    assert abs(r.x - optimal_theta_1d(alpha)) < 1e-6


def test_reference_boundary_examples():
    assert reference_brw_boundary(1.0) == pytest.approx(0.5)
    assert reference_brw_boundary(0.0) == 1.0
    assert reference_brw_boundary(0.96) == pytest.approx(0.694, abs=1e-3)
    with pytest.raises(ValueError):
        reference_brw_boundary(1.2)


def test_projected_estimate_at_full_drift():
    gen = RngStream(9)
    m = sample_xi_batch(0.9, 50_000, gen.child(0)).mean()
    e = estimate_mu_1d_projected(1.0, 0.9, math.log(2 * m), 50_000, 10_000, gen.child(1))
    assert e.ci_low <= 0.5 <= e.ci_high


def test_projected_never_certifies_without_drift():
    for t in (0.1, 0.5, 2.0):
        e = estimate_mu_1d_projected(0.0, 0.7, t, 2000, 10_000, RngStream(3))
        assert e.mu_hat >= 2 and e.ci_low > 1


def test_projected_reproducible():
    a = estimate_mu_1d_projected(0.5, 0.8, 0.4, 5000, 10_000, RngStream(7, (1,)))
    b = estimate_mu_1d_projected(0.5, 0.8, 0.4, 5000, 10_000, RngStream(7, (1,)))
    assert a == b


def test_projected_cap_flag():
    e = estimate_mu_1d_projected(0.5, 0.05, 0.4, 200, 3, RngStream(1))
    assert e.flagged and e.cap_hit_frequency > 0.01


def test_mu_estimate_rejects_nonpositive_theta():
    with pytest.raises(ValueError):
        MuEstimate(0.0, 1, 1, 1, 1)
    with pytest.raises(ValueError):
        estimate_mu_1d_projected(0.5, 0.5, 0.0, 10, 10, 1)


def test_lines_no_lateral_steps():
    e = estimate_mu_lines(2, 1.0, 0.5, 0.2, 200, 50, RngStream(1), decay_trials=5000)
    assert e.mu_hat == 0.0


def test_lines_rejects_theta_above_decay():
    with pytest.raises(ValueError):
        estimate_mu_lines(2, 0.9, 0.3, 50.0, 10, 20, RngStream(1), decay_trials=2000)


def test_lines_monotone_in_w():
    lo = estimate_mu_lines(2, 0.9, 0.9, 0.5, 2000, 200, RngStream(5), decay_trials=5000)
    hi = estimate_mu_lines(2, 0.99, 0.9, 0.5, 2000, 200, RngStream(5), decay_trials=5000)
    assert hi.mu_hat <= lo.ci_high and hi.ci_low <= lo.mu_hat


def test_occupancy_shift_invariance():
    k_max, i, n = 30, 3, 20_000
    c0, _ = line_occupancy(2, 0.7, 0.5, 0, n, RngStream(1), k_max)
    ci, _ = line_occupancy(2, 0.7, 0.5, i, n, RngStream(2), k_max)
    for k in range(-10, 11):
        a, b = ci[:, k + k_max], c0[:, k - i + k_max]
        se = math.hypot(a.std(), b.std()) / math.sqrt(n)
        assert abs(a.mean() - b.mean()) <= 3 * se + 1e-12


def test_occupancy_bounded_by_residence_time():
    for t in range(200):
        counts, first, last = entrance_exit_times(2, 0.6, 0.4, RngStream(3, (t,)), k_max=40)
        seen = first >= 0
        assert (counts[~seen] == 0).all()
        assert (counts[seen] <= last[seen] - first[seen] + 1).all()


def test_martingale_deterministic_is_constant():
    M, origin, trunc = simulate_brw_martingale(OffspringModel("deterministic"), 0.7, 10, 10, 1)
    assert np.allclose(M, 1.0) and not trunc
    assert origin[0] == 1 and (origin[1:] == 0).all()


def test_martingale_requires_mu():
    with pytest.raises(ValueError):
        simulate_brw_martingale(OffspringModel("xi-1d", w=0.9, alpha=0.5), 0.5, 3, 100, 1)


def test_martingale_truncation_flag():
    off = OffspringModel("xi-1d", w=0.5, alpha=0.0)
    _, _, trunc = simulate_brw_martingale(off, 0.1, 30, 50, RngStream(2), mu=3.0)
    assert trunc


def _martingale_runs(n_runs, generations):
    w, alpha, theta = 0.95, 0.6, 0.3
    m = sample_xi_batch(w, 10**6, RngStream(100)).mean()
    mu = mu_exact_1d(alpha, theta, m)
    off = OffspringModel("xi-1d", w=w, alpha=alpha)
    return np.array([simulate_brw_martingale(off, theta, generations, 10**6,
                                             RngStream(101, (r,)), mu)[0]
                     for r in range(n_runs)])


def test_martingale_mean_and_regression():
    M = _martingale_runs(2000, 5)
    m5 = M[:, 5]
    assert abs(m5.mean() - 1) < 4 * m5.std() / math.sqrt(len(m5))
    x, y = M[:, 2], M[:, 3]
    X = np.column_stack([np.ones_like(x), x])
    beta, res, *_ = np.linalg.lstsq(X, y, rcond=None)
    sigma2 = res[0] / (len(x) - 2)
    se = np.sqrt(np.diag(sigma2 * np.linalg.inv(X.T @ X)))
    assert abs(beta[1] - 1) < 1.96 * se[1]
    assert abs(beta[0]) < 1.96 * se[0]


def test_certify_without_drift_inconclusive():
    c = certify_transience(2, 0.7, 0.0, rng=RngStream(1), budget=2000)
    assert c.verdict == "inconclusive"
    assert all(e.ci_high >= 1 for e in c.searched)
    assert certify_transience(2, 0.7, 0.0, "lines", 200, RngStream(1)).verdict == "inconclusive"


def test_certify_stable_across_seeds():
    verdicts = {certify_transience(2, 0.95, 0.95, budget=20_000, rng=RngStream(s)).verdict
                for s in range(5)}
    assert verdicts == {"certified-evidence"}


def test_verdict_rule():
    assert _verdict(MuEstimate(0.5, 0.9, 0.8, 1.01, 10)) == "inconclusive"
    assert _verdict(MuEstimate(0.5, 0.9, 0.8, 0.99, 10)) == "certified-evidence"
    assert _verdict(MuEstimate(0.5, 0.9, 0.8, 0.99, 10, truncated_mass=0.01)) == "inconclusive"
    for seed in range(5):
        c = certify_transience(2, 0.6, 0.8, "projected-1d", 3000, RngStream(seed))
        if c.estimate.ci_low <= 1 <= c.estimate.ci_high:
            assert c.verdict == "inconclusive"


def test_certificate_json_round_trip():
    c = certify_transience(2, 0.95, 0.95, budget=2000, rng=RngStream(3))
    back = TransienceCertificate.from_json(c.to_json())
    assert back.to_dict() == c.to_dict()
    assert set(c.to_dict()) == {"d", "w", "alpha", "strategy", "theta", "mu_hat", "ci_low",
                                "ci_high", "trials", "truncated_mass", "verdict", "seed"}


def test_certify_rejects_bad_strategy():
    with pytest.raises(ValueError):
        certify_transience(2, 0.5, 0.5, "magic")
    with pytest.raises(ValueError):
        certify_transience(3, 0.5, 0.5, "projected-1d")
