"""Command-line entry point: ``froglab <sweep|certify|pc-estimate|lemma-checks>``.

Exit codes: 0 on success, 2 if the configuration is rejected, 1 on any
other failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from .experiments import (ConfigError, _atomic_write, boundary_monotonicity_report,
                          emit_results, run_sweep, sweep_meta, validate_config)
from .rng import RngStream

log = logging.getLogger("froglab")


def _read_config(path) -> dict:
    if path is None:
        return {}
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError([f"config file {path} not found"])
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config is not valid JSON: {exc}"])
    if not isinstance(raw, dict):
        raise ConfigError(["config must be a JSON object"])
    return raw


def _check_keys(raw: dict, allowed: dict) -> dict:
    """Fill defaults and reject unknown keys or wrong types."""
    errs = [f"{k}: unknown field" for k in sorted(set(raw) - set(allowed))]
    out = {}
    for k, (typ, default) in allowed.items():
        v = raw.get(k, default)
        if v is None:
            errs.append(f"{k}: required")
        elif typ is float and (isinstance(v, bool) or not isinstance(v, (int, float))):
            errs.append(f"{k}: must be a number")
        elif typ is int and (isinstance(v, bool) or not isinstance(v, int)):
            errs.append(f"{k}: must be an integer")
        elif typ is list and not isinstance(v, list):
            errs.append(f"{k}: must be a list")
        elif typ is str and not isinstance(v, str):
            errs.append(f"{k}: must be a string")
        else:
            out[k] = v
    if errs:
        raise ConfigError(errs)
    return out


def _write_rows(rows: list, out: Path, stem: str, fmt: str) -> Path:
    path = out / f"{stem}.{fmt}"
    if fmt == "json":
        text = json.dumps(rows, sort_keys=True, indent=1) + "\n"
    else:
        keys = sorted({k for r in rows for k in r})
        lines = [",".join(keys)]
        for r in rows:
            lines.append(",".join("" if r.get(k) is None else
                                  (repr(r[k]) if isinstance(r[k], float) else str(r[k]))
                                  for k in keys))
        text = "\n".join(lines) + "\n"
    _atomic_write(path, text)
    return path


def cmd_sweep(args, raw: dict) -> list:
    if args.seed is not None:
        raw["root_seed"] = args.seed
    if args.out is not None:
        raw["out_dir"] = args.out
    if args.format is not None:
        raw["formats"] = [args.format]
    cfg = validate_config(raw)
    Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
    grid = run_sweep(cfg, workers=args.workers,
                     progress=lambda i, p: log.info("point %d (alpha=%g, w=%g): %s", i,
                                                    p.alpha, p.w, p.classification))
    paths = emit_results(grid, cfg.out_dir, cfg.formats, sweep_meta(cfg))
    if len(cfg.alphas) >= 3:
        rep = boundary_monotonicity_report(grid)
        p = Path(cfg.out_dir) / "boundary_report.json"
        _atomic_write(p, json.dumps(rep, sort_keys=True, indent=1) + "\n")
        paths.append(p)
    return paths


CERTIFY_KEYS = {"d": (int, 2), "w": (float, None), "alpha": (float, None),
                "strategy": (str, "auto"), "budget": (int, 20_000), "seed": (int, 0)}


def cmd_certify(args, raw: dict) -> list:
    from .brw import certify_transience
    from .lattice import TransitionKernel

    c = _check_keys(raw, CERTIFY_KEYS)
    seed = args.seed if args.seed is not None else c["seed"]
    try:
        TransitionKernel(c["d"], c["w"], c["alpha"])
    except ValueError as exc:
        raise ConfigError([str(exc)])
    if c["strategy"] not in ("auto", "lines", "projected-1d"):
        raise ConfigError(["strategy: must be auto, lines or projected-1d"])
    cert = certify_transience(c["d"], c["w"], c["alpha"], c["strategy"], c["budget"],
                              RngStream(seed))
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return [_write_rows([cert.to_dict()], out, "certificate", args.format or "json")]


PC_KEYS = {"d": (int, 2), "box_sizes": (list, [32, 64, 128]), "trials": (int, 100),
           "seed": (int, 0)}


def cmd_pc(args, raw: dict) -> list:
    from .percolation import estimate_pc

    c = _check_keys(raw, PC_KEYS)
    if c["d"] < 1 or len(c["box_sizes"]) < 2 or c["trials"] < 2:
        raise ConfigError(["need d >= 1, at least two box_sizes and trials >= 2"])
    seed = args.seed if args.seed is not None else c["seed"]
    est = estimate_pc(c["d"], c["box_sizes"], c["trials"], RngStream(seed))
    row = {"d": c["d"], "pc_hat": est.estimate, "bracket_low": est.bracket[0],
           "bracket_high": est.bracket[1], "flagged": est.flagged,
           "box_sizes": " ".join(map(str, est.sizes)), "trials": c["trials"], "seed": seed}
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return [_write_rows([row], out, "pc_estimate", args.format or "json")]


LEMMA_KEYS = {"trials": (int, 20_000), "seed": (int, 0)}


def lemma_checks(trials: int, seed: int) -> list:
    """Quick numerical checks of the hyperplane law, the 1d decay and k0."""
    from .lattice import LatticeBox, TransitionKernel, hyperplane_hit_exact, mc_hit_estimate
    from .oned import OneDModel, domination_threshold, reach_decay_estimate

    root = RngStream(seed)
    rows = []
    for j, alpha in enumerate((0.2, 1 / 3, 0.6)):
        kernel = TransitionKernel(1, 1.0, alpha)
        for n in (1, 2, 4):
            est, se = mc_hit_estimate(kernel, (0,), LatticeBox.hyperplane(1, -n), 200 * n, trials,
                                      root.child(0, j, n))
            exact = hyperplane_hit_exact(alpha, n)
            rows.append({"check": "hyperplane-law", "param": f"alpha={alpha:.4f},n={n}",
                         "value": est, "reference": exact,
                         "pass": bool(abs(est - exact) <= 4 * max(se, 1e-12))})
    for j, model in enumerate((OneDModel.drift(0.4), OneDModel.death(0.9))):
        r = reach_decay_estimate(model, 8, trials, root.child(1, j))
        rows.append({"check": "exponential-decay", "param": f"{model.kind}",
                     "value": r.rate, "reference": r.r2,
                     "pass": bool(r.rate > 0 and r.r2 >= 0.95)})
    for p in (0.3, 0.5, 0.7):
        rows.append({"check": "k0", "param": f"p={p}", "value": domination_threshold(p),
                     "reference": None, "pass": True})
    return rows


def cmd_lemmas(args, raw: dict) -> list:
    c = _check_keys(raw, LEMMA_KEYS)
    if c["trials"] < 1:
        raise ConfigError(["trials: must be >= 1"])
    seed = args.seed if args.seed is not None else c["seed"]
    rows = lemma_checks(c["trials"], seed)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return [_write_rows(rows, out, "lemma_checks", args.format or "json")]


COMMANDS = {"sweep": cmd_sweep, "certify": cmd_certify, "pc-estimate": cmd_pc,
            "lemma-checks": cmd_lemmas}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="froglab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    env_workers = os.environ.get("FROGLAB_WORKERS")
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--seed", type=int, help="root seed (overrides the config)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--workers", type=int,
                       default=int(env_workers) if env_workers else 1)
        p.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError(["seed: must fit in 64 unsigned bits"])
        if args.workers < 1:
            raise ConfigError(["workers: must be >= 1"])
        raw = _read_config(args.config)
        paths = COMMANDS[args.command](args, raw)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
