"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Criterion 9 runs the full 9 x 9 phase sweep and takes about half an hour
on one core.
"""
import itertools
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from froglab.brw import (OffspringModel, certify_transience, estimate_mu_1d_projected,
                         mu_exact_1d, sample_xi_batch, simulate_brw_martingale)
from froglab.cli import main
from froglab.experiments import boundary_monotonicity_report, run_sweep, validate_config
from froglab.lattice import (LatticeBox, TransitionKernel, exact_hit_solver,
                             hyperplane_hit_exact, mc_hit_estimate)
from froglab.oned import OneDModel, coupled_paths, reach_decay_estimate, y_step
from froglab.percolation import (PercolationField, RenormScheme, estimate_pc, explore_cluster,
                                 renorm_open_probability)
from froglab.rng import RngStream

ROOT = Path(__file__).resolve().parents[1]


def test_criterion_1_hyperplane_law(criterion):
    t0 = time.perf_counter()
    worst = 0.0
    for j, alpha in enumerate((0.2, 1 / 3, 0.6)):
        kernel = TransitionKernel(1, 1.0, alpha)
        for n in range(1, 9):
            # killed on reaching 60: a later return to -n has probability < rho^61
            box = LatticeBox((-n,), (60,))
            est, _ = mc_hit_estimate(kernel, (0,), [(-n,)], None, 10**5,
                                     RngStream(1, (j, n)), box=box)
            exact = hyperplane_hit_exact(alpha, n)
            se = math.sqrt(exact * (1 - exact) / 10**5)
            worst = max(worst, abs(est - exact) / se)
    elapsed = time.perf_counter() - t0
    ok = worst <= 4 and elapsed < 120
    criterion(1, ok, f"max |z| = {worst:.2f} over 24 points, {elapsed:.0f} s")
    assert ok


def test_criterion_2_oracle_equivalence(criterion):
    gen = np.random.default_rng(2024)
    worst = 0.0
    for case in range(10):
        d = 1 if case < 4 else 2
        radius = int(gen.integers(5, 31))
        w = 1.0 if d == 1 else float(gen.uniform(0.2, 0.9))
        alpha = float(gen.uniform(0.0, 0.6))
        kernel = TransitionKernel(d, w, alpha)
        box = LatticeBox.cube(d, radius)
        r = min(radius - 1, 6)
        start = tuple(0 for _ in range(d))
        while start == (0,) * d:
            start = tuple(int(c) for c in gen.integers(-r, r + 1, size=d))
        target = [(0,) * d]
        exact = exact_hit_solver(kernel, start, target, box)
        est, _ = mc_hit_estimate(kernel, start, target, 10**6, 10**5, RngStream(2, (case,)),
                                 box=box)
        # standard error of the estimator, which stays positive when every walk hits
        se = math.sqrt(exact * (1 - exact) / 10**5)
        worst = max(worst, abs(est - exact) / se)
    ok = worst <= 3
    criterion(2, ok, f"max |MC - exact| / stderr = {worst:.2f} over 10 cases")
    assert ok


def test_criterion_3_exponential_decay(criterion):
    parts, ok = [], True
    for model in (OneDModel.drift(0.4), OneDModel.death(0.9)):
        r = reach_decay_estimate(model, 8, 10**5, RngStream(3))
        ok &= r.fit.slope < 0 and r.r2 >= 0.95
        parts.append(f"{model.kind}: slope {r.fit.slope:.3f}, R2 {r.r2:.4f}")
    criterion(3, ok, "; ".join(parts))
    assert ok


def test_criterion_4_y_chain(criterion):
    gen = np.random.default_rng(4)
    pmin = 1.0
    for k, p in itertools.product((1, 2, 5), (0.3, 0.5, 0.7)):
        draws = np.array([y_step(k, p, gen) for _ in range(20_000)])
        counts = np.bincount(draws, minlength=k + 2)
        expected = stats.binom.pmf(np.arange(k + 2), k + 1, p) * len(draws)
        pmin = min(pmin, stats.chisquare(counts, expected).pvalue)
    violations = 0
    for t in range(10_000):
        p = (t % 9 + 1) / 10
        y, yt = coupled_paths(p, 1 + t % 6, 25, RngStream(4, (t,)))
        violations += int((yt < y).any())
    ok = pmin > 0.01 and violations == 0
    criterion(4, ok, f"min chi-square p-value {pmin:.3f}; {violations} domination violations "
                     "in 10^4 coupled paths")
    assert ok


def test_criterion_5_certificate(criterion):
    c = certify_transience(2, 0.95, 0.95, rng=RngStream(5))
    e = c.estimate
    good = (c.verdict == "certified-evidence" and e.ci_high < 1 and e.truncated_mass < 1e-3)
    z = certify_transience(2, 0.95, 0.0, rng=RngStream(5))
    none = z.verdict == "inconclusive" and all(s.ci_high >= 1 for s in z.searched)
    ok = good and none
    criterion(5, ok, f"alpha=0.95 w=0.95: {c.verdict}, mu_hat {e.mu_hat:.4f} "
                     f"CI [{e.ci_low:.4f}, {e.ci_high:.4f}], truncated mass "
                     f"{e.truncated_mass:.1e}; alpha=0: {z.verdict} over "
                     f"{len(z.searched)} tilts")
    assert ok


def test_criterion_6_closed_form_and_martingale(criterion):
    w = 0.9
    m = sample_xi_batch(w, 10**5, RngStream(6, (0,))).mean()
    e = estimate_mu_1d_projected(1.0, w, math.log(2 * m), 10**5, 10_000, RngStream(6, (1,)))
    in_ci = e.ci_low <= 0.5 <= e.ci_high
    w, alpha, theta = 0.95, 0.6, 0.3
    mu = mu_exact_1d(alpha, theta, sample_xi_batch(w, 10**6, RngStream(6, (2,))).mean())
    off = OffspringModel("xi-1d", w=w, alpha=alpha)
    m5 = np.array([simulate_brw_martingale(off, theta, 5, 10**6, RngStream(6, (3, r)), mu)[0][5]
                   for r in range(10_000)])
    z = abs(m5.mean() - 1) / (m5.std(ddof=1) / math.sqrt(len(m5)))
    ok = in_ci and z <= 4
    criterion(6, ok, f"alpha=1: mu_hat {e.mu_hat:.4f} CI [{e.ci_low:.4f}, {e.ci_high:.4f}]; "
                     f"E[M_5] = {m5.mean():.4f} (|z| = {z:.2f})")
    assert ok


def test_criterion_7_renormalized_openness(criterion):
    planar = [renorm_open_probability(RenormScheme("cube", 2, K=K), TransitionKernel(2, 0.5, 0),
                                      1.0, 100, RngStream(7, (K,)), max_steps=10**6)[0]
              for K in (1, 2, 3)]
    k3 = [renorm_open_probability(RenormScheme("cube", 3, K=K), TransitionKernel(3, 0.5, 0),
                                  1.0, 400, RngStream(8, (K,))) for K in (1, 2, 3, 4)]
    mono = all(b[0] >= a[0] - 2 * math.hypot(a[1], b[1]) for a, b in zip(k3, k3[1:]))
    alphas = (0.2, 0.1, 0.05, 0.02, 0.01, 0.0)
    cont = [renorm_open_probability(RenormScheme("cube", 3, K=2), TransitionKernel(3, 0.5, a),
                                    1.0, 400, RngStream(9)) for a in alphas]
    p0, s0 = cont[-1]
    gaps = [abs(p - p0) / max(math.hypot(s, s0), 1e-12) for p, s in cont[:-1]]
    # continuity: the small-alpha estimates sit within 2 sigma of alpha = 0
    near = all(g <= 2 for g, a in zip(gaps, alphas) if a <= 0.02)
    ok = planar == [1.0, 1.0, 1.0] and mono and near
    criterion(7, ok, f"d=2 p(K,0) = {planar}; d=3 p(K,0) = {[round(p, 4) for p, _ in k3]}; "
                     f"d=3 K=2 p(alpha) = {[round(p, 4) for p, _ in cont]} for alpha in "
                     f"{list(alphas)}")
    assert ok


def test_criterion_8_percolation(criterion):
    t0 = time.perf_counter()
    box = LatticeBox((0, 0), (2, 2))
    exact = True
    for bits in itertools.product((False, True), repeat=9):
        open_ = np.array(bits).reshape(3, 3)
        f = PercolationField(2, 0.5, box, open_)
        parent = {s: s for s in itertools.product(range(3), repeat=2) if open_[s]}

        def find(s):
            while parent[s] != s:
                s = parent[s]
            return s

        for s in parent:
            for t in ((s[0] + 1, s[1]), (s[0], s[1] + 1)):
                if t in parent:
                    parent[find(s)] = find(t)
        for x in itertools.product(range(3), repeat=2):
            want = {s for s in parent if x in parent and find(s) == find(x)}
            exact &= explore_cluster(f, x).as_set() == want
    p2 = estimate_pc(2, (32, 64, 128), 100, RngStream(10))
    p3 = estimate_pc(3, (32, 64, 128), 40, RngStream(11))
    elapsed = time.perf_counter() - t0
    ok = exact and 0.55 <= p2.estimate <= 0.65 and p3.estimate < p2.estimate and elapsed < 600
    criterion(8, ok, f"3x3 enumeration exact: {exact}; pc(2) = {p2.estimate:.4f}, "
                     f"pc(3) = {p3.estimate:.4f}; {elapsed:.0f} s")
    assert ok


def test_criterion_9_phase_diagram(criterion, tmp_path):
    raw = json.loads((ROOT / "configs" / "phase_d2.json").read_text())
    raw["out_dir"] = str(tmp_path)
    cfg = validate_config(raw)
    assert (cfg.d, cfg.arena_radius, cfg.trials, len(cfg.alphas), len(cfg.ws)) == \
        (2, 100, 200, 9, 9)
    grid = run_sweep(cfg)
    rec_pts = [p for p in grid if p.alpha <= 0.1 and p.w <= 0.3]
    tra_pts = [p for p in grid if p.alpha >= 0.9 and p.w >= 0.9]
    conflicts = sum(p.conflict for p in grid)
    rep = boundary_monotonicity_report(grid)
    ok = (all(p.classification == "recurrent-like" for p in rec_pts)
          and all(p.classification == "transient-like" for p in tra_pts)
          and conflicts == 0 and rep["nonincreasing"] and rec_pts and tra_pts)
    counts = {c: sum(p.classification == c for p in grid)
              for c in ("recurrent-like", "transient-like", "undetermined")}
    criterion(9, ok, f"{counts}, {conflicts} conflicts, boundary {rep['boundary']} "
                     f"nonincreasing: {rep['nonincreasing']}")
    assert ok


def test_criterion_10_determinism(criterion, tmp_path):
    configs = {
        "sweep": {"d": 2, "alphas": [0.2, 0.5, 0.9], "ws": [0.3, 0.95], "arena_radius": 30,
                  "n_boxes": 8, "trials": 10, "budget": 2000, "root_seed": 7},
        "certify": {"w": 0.9, "alpha": 0.9, "budget": 5000},
        "pc-estimate": {"box_sizes": [16, 32], "trials": 30},
        "lemma-checks": {"trials": 2000},
    }
    compared, ok = 0, True
    for cmd, cfg in configs.items():
        path = tmp_path / f"{cmd}.json"
        path.write_text(json.dumps(cfg))
        for fmt in ("csv", "json"):
            runs = [tmp_path / f"{cmd}-{fmt}-{r}" for r in range(2)]
            for out in runs:
                ok &= main([cmd, "--config", str(path), "--seed", "99", "--out", str(out),
                            "--format", fmt]) == 0
            names = sorted(p.name for p in runs[0].iterdir() if not p.name.startswith("partial"))
            ok &= names == sorted(p.name for p in runs[1].iterdir()
                                  if not p.name.startswith("partial"))
            for n in names:
                ok &= (runs[0] / n).read_bytes() == (runs[1] / n).read_bytes()
                compared += 1
    criterion(10, ok, f"{compared} output files byte-identical across reruns")
    assert ok
