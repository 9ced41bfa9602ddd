"""A small phase diagram sweep.

Every grid point gets a recurrence proxy (with a confidence interval) and a
transience certificate; the two are combined into a classification.  The
full 9 x 9 sweep lives in configs/phase_d2.json and is run with
``froglab sweep --config configs/phase_d2.json --out results``.
"""
import tempfile

from froglab.experiments import (boundary_monotonicity_report, emit_results, run_sweep,
                                 sweep_meta, validate_config)

with tempfile.TemporaryDirectory() as out:
    cfg = validate_config({"d": 2, "alphas": [0.1, 0.5, 0.95], "ws": [0.2, 0.6, 0.95],
                           "arena_radius": 40, "n_boxes": 12, "trials": 30, "budget": 5000,
                           "root_seed": 1, "out_dir": out})
    grid = run_sweep(cfg)
    for p in grid:
        print(f"alpha={p.alpha:<5} w={p.w:<5} proxy {p.proxy_frac:.2f} "
              f"[{p.proxy_ci_low:.2f}, {p.proxy_ci_high:.2f}]  {p.verdict:<19} "
              f"-> {p.classification}")
    print(boundary_monotonicity_report(grid))
    print([str(p) for p in emit_results(grid, out, meta=sweep_meta(cfg))])
