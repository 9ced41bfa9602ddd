"""Phase-diagram sweeps over (alpha, w) grids and their persistence."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .brw import certify_transience, reference_brw_boundary
from .frogs import FrogSystemConfig, recurrence_proxy
from .lattice import LatticeBox, TransitionKernel
from .rng import RngStream
from .stats import mean_ci

CSV_COLUMNS = ("d", "alpha", "w", "proxy_frac", "proxy_ci_low", "proxy_ci_high", "mu_hat",
               "mu_ci_low", "mu_ci_high", "verdict", "classification", "trials", "seed")
EXTRA_COLUMNS = ("g_alpha",)


class ConfigError(ValueError):
    """Configuration rejected; ``violations`` lists every problem found."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class SweepConfig:
    d: int
    alphas: tuple
    ws: tuple
    arena_radius: int = 100
    n_boxes: int = 32
    trials: int = 200
    budget: int = 20_000
    root_seed: int = 0
    out_dir: str = "results"
    formats: tuple = ("csv", "json")
    proxy_threshold: float = 0.05
    ci_level: float = 0.95
    max_steps: int = 2000
    box_K: int = 0
    strategy: str = "auto"

    def canonical(self) -> dict:
        out = asdict(self)
        out["alphas"] = list(self.alphas)
        out["ws"] = list(self.ws)
        out["formats"] = list(self.formats)
        return out

    def fingerprint(self) -> str:
        """Hash of every field that affects results (not output paths)."""
        c = self.canonical()
        c.pop("out_dir")
        c.pop("formats")
        return hashlib.sha256(json.dumps(c, sort_keys=True).encode()).hexdigest()[:16]

    def points(self) -> list:
        return [(a, w) for a in self.alphas for w in self.ws]


_INT_FIELDS = ("d", "arena_radius", "n_boxes", "trials", "budget", "root_seed", "max_steps",
               "box_K")


def validate_config(raw: dict) -> SweepConfig:
    """Normalise a raw mapping into a :class:`SweepConfig`.

    Raises :class:`ConfigError` listing every violation.
    """
    if not isinstance(raw, dict):
        raise ConfigError(["config must be a JSON object"])
    known = {f.name for f in fields(SweepConfig)}
    errs = [f"{k}: unknown field" for k in sorted(set(raw) - known)]
    for k in ("d", "alphas", "ws"):
        if k not in raw:
            errs.append(f"{k}: required")
    vals = {k: v for k, v in raw.items() if k in known}
    for k in _INT_FIELDS:
        if k in vals and (isinstance(vals[k], bool) or not isinstance(vals[k], int)):
            errs.append(f"{k}: must be an integer")
            vals.pop(k)
    for k in ("alphas", "ws"):
        if k in vals:
            g = vals[k]
            if not isinstance(g, (list, tuple)) or not g:
                errs.append(f"{k}: must be a non-empty list")
                vals.pop(k)
                continue
            bad = [x for x in g if isinstance(x, bool) or not isinstance(x, (int, float))
                   or not 0.0 <= x <= 1.0]
            if bad:
                errs.append(f"{k}: values outside [0, 1]: {bad}")
                vals.pop(k)
            else:
                vals[k] = tuple(float(x) for x in g)
    d = vals.get("d")
    if d is not None and d < 1:
        errs.append("d: must be >= 1")
    if d == 1 and "ws" in vals and any(w != 1.0 for w in vals["ws"]):
        errs.append("ws: d = 1 requires w = 1")
    for k, lo in (("trials", 1), ("n_boxes", 1), ("arena_radius", 1), ("budget", 100),
                  ("max_steps", 1), ("box_K", 0)):
        if k in vals and vals[k] < lo:
            errs.append(f"{k}: must be >= {lo}")
    if "root_seed" in vals and not 0 <= vals["root_seed"] < 2**64:
        errs.append("root_seed: must fit in 64 unsigned bits")
    for k in ("proxy_threshold", "ci_level"):
        if k in vals and not (isinstance(vals[k], (int, float)) and 0 < vals[k] < 1):
            errs.append(f"{k}: must lie in (0, 1)")
    if "formats" in vals:
        f = vals["formats"]
        f = [f] if isinstance(f, str) else f
        if not f or any(x not in ("csv", "json") for x in f):
            errs.append("formats: each entry must be 'csv' or 'json'")
        else:
            vals["formats"] = tuple(f)
    if vals.get("strategy", "auto") not in ("auto", "lines", "projected-1d"):
        errs.append("strategy: must be auto, lines or projected-1d")
    if vals.get("strategy") == "projected-1d" and d not in (None, 2):
        errs.append("strategy: projected-1d needs d = 2")
    if not errs and d is not None:
        K = vals.get("box_K", 0)
        n = vals.get("n_boxes", 32)
        R = vals.get("arena_radius", 100)
        side = 2 * K + 1
        if side * n + K > R or (d > 1 and int(side * math.sqrt(n)) + K > R):
            errs.append(f"arena_radius: {R} does not contain the {n} recurrence boxes")
    if errs:
        raise ConfigError(errs)
    return SweepConfig(**vals)


@dataclass
class PhasePointEstimate:
    d: int
    alpha: float
    w: float
    proxy_frac: float
    proxy_ci_low: float
    proxy_ci_high: float
    mu_hat: Optional[float]
    mu_ci_low: Optional[float]
    mu_ci_high: Optional[float]
    verdict: str
    classification: str
    trials: int
    seed: int
    error: str = ""

    @property
    def g_alpha(self) -> float:
        return reference_brw_boundary(self.alpha)

    @property
    def conflict(self) -> bool:
        return self.classification == "conflict"


def classify(proxy_ci_low: float, verdict: str, threshold: float) -> str:
    """Recurrent-like if the proxy's lower bound exceeds ``threshold``,
    transient-like if certified, conflict if both."""
    rec = proxy_ci_low > threshold
    tra = verdict == "certified-evidence"
    if rec and tra:
        return "conflict"
    if rec:
        return "recurrent-like"
    if tra:
        return "transient-like"
    return "undetermined"


def _strategy(cfg: SweepConfig) -> str:
    if cfg.strategy != "auto":
        return cfg.strategy
    return "projected-1d" if cfg.d == 2 else "lines"


def evaluate_point(cfg: SweepConfig, index: int) -> PhasePointEstimate:
    """Proxy and certificate at grid point ``index``; pure in (cfg, index)."""
    alpha, w = cfg.points()[index]
    stream = RngStream(cfg.root_seed, (index,))
    try:
        kernel = TransitionKernel(cfg.d, w, alpha)
        fc = FrogSystemConfig(kernel, LatticeBox.cube(cfg.d, cfg.arena_radius),
                              max_steps=cfg.max_steps)
        fr = np.array([recurrence_proxy(fc, cfg.n_boxes, stream.child(0, t), K=cfg.box_K)[0]
                       for t in range(cfg.trials)])
        m, _, (lo, hi) = mean_ci(fr, cfg.ci_level)
        lo, hi = max(lo, 0.0), min(hi, 1.0)
        if cfg.d >= 2 and w > 0:
            cert = certify_transience(cfg.d, w, alpha, _strategy(cfg), cfg.budget,
                                      stream.child(1))
            e, verdict = cert.estimate, cert.verdict
        else:
            e, verdict = None, "inconclusive"
        mu = (None, None, None) if e is None else (float(e.mu_hat), float(e.ci_low),
                                                   float(e.ci_high))
        return PhasePointEstimate(cfg.d, alpha, w, float(m), float(lo), float(hi), *mu, verdict,
                                  classify(lo, verdict, cfg.proxy_threshold), cfg.trials,
                                  cfg.root_seed)
    except Exception as exc:  # recorded, the sweep goes on
        nan = float("nan")
        return PhasePointEstimate(cfg.d, alpha, w, nan, nan, nan, None, None, None,
                                  "inconclusive", "undetermined", cfg.trials, cfg.root_seed,
                                  f"{type(exc).__name__}: {exc}")


def _point_record(index: int, p: PhasePointEstimate) -> dict:
    r = asdict(p)
    r["index"] = index
    return r


def _point_from(r: dict) -> PhasePointEstimate:
    return PhasePointEstimate(**{k: r[k] for k in (f.name for f in fields(PhasePointEstimate))})


def partial_path(cfg: SweepConfig) -> Path:
    return Path(cfg.out_dir) / f"partial-{cfg.fingerprint()}.jsonl"


def _load_partial(path: Path) -> dict:
    done = {}
    if path.exists():
        for line in path.read_text().splitlines():
            try:
                r = json.loads(line)
            except json.JSONDecodeError:
                continue  # torn last line of an interrupted run
            done[r["index"]] = _point_from(r)
    return done


def run_sweep(cfg: SweepConfig, workers: int = 1, progress=None) -> list:
    """Evaluate every grid point, resuming from the partial-results file.

    Points are independent and seeded by their grid index, so the result
    does not depend on ``workers`` or on interruptions.
    """
    path = partial_path(cfg)
    path.parent.mkdir(parents=True, exist_ok=True)
    done = _load_partial(path)
    todo = [i for i in range(len(cfg.points())) if i not in done]
    with open(path, "a") as fh:
        def record(i, p):
            done[i] = p
            fh.write(json.dumps(_point_record(i, p), sort_keys=True) + "\n")
            fh.flush()
            if progress:
                progress(i, p)

        if workers > 1 and len(todo) > 1:
            with ProcessPoolExecutor(workers) as ex:
                for i, p in zip(todo, ex.map(evaluate_point, [cfg] * len(todo), todo)):
                    record(i, p)
        else:
            for i in todo:
                record(i, evaluate_point(cfg, i))
    return [done[i] for i in range(len(cfg.points()))]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def results_csv(grid: list) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(CSV_COLUMNS + EXTRA_COLUMNS)
    for p in grid:
        wr.writerow([_fmt(getattr(p, c)) for c in CSV_COLUMNS] + [_fmt(p.g_alpha)])
    return buf.getvalue()


def results_json(grid: list, meta: Optional[dict] = None) -> str:
    pts = []
    for p in grid:
        r = asdict(p)
        r["g_alpha"] = p.g_alpha
        pts.append(r)
    return json.dumps({"meta": meta or {}, "points": pts}, sort_keys=True, indent=1,
                      allow_nan=True) + "\n"


def emit_results(grid: list, out_dir, formats=("csv", "json"), meta: Optional[dict] = None,
                 stem: str = "sweep") -> list:
    """Write ``<stem>.csv`` and/or ``<stem>.json`` atomically; returns the paths."""
    out_dir = Path(out_dir)
    if not out_dir.is_dir():
        raise OSError(f"output directory {out_dir} does not exist")
    written = []
    for f in formats:
        path = out_dir / f"{stem}.{f}"
        _atomic_write(path, results_csv(grid) if f == "csv" else results_json(grid, meta))
        written.append(path)
    return written


def load_results(path) -> list:
    """Reload the grid from a JSON results file."""
    data = json.loads(Path(path).read_text())
    return [_point_from(r) for r in data["points"]]


def sweep_meta(cfg: SweepConfig) -> dict:
    c = cfg.canonical()
    c.pop("out_dir")
    c.pop("formats")
    return {"config": c, "proxy_threshold": cfg.proxy_threshold,
            "ci_level": cfg.ci_level, "threshold_note": "calibration choice",
            "strategy": _strategy(cfg)}


def boundary_monotonicity_report(grid: list, other: Optional[list] = None) -> dict:
    """Empirical transient boundary per alpha column.

    For each alpha the boundary is the smallest w classified transient-like
    (infinite if none).  Conflicts and failed points are excluded and
    counted.  With ``other`` (a grid in another dimension) the boundaries are
    compared column by column.
    """
    def columns(g):
        cols = {}
        excluded = 0
        for p in g:
            if p.conflict or p.error:
                excluded += 1
                continue
            cols.setdefault(p.alpha, []).append(p)
        return cols, excluded

    def boundary(cols):
        return {a: min((p.w for p in ps if p.classification == "transient-like"),
                       default=math.inf) for a, ps in sorted(cols.items())}

    cols, excluded = columns(grid)
    b = boundary(cols)
    seq = [b[a] for a in sorted(b)]
    resolved = sum(p.classification in ("transient-like", "recurrent-like")
                   for ps in cols.values() for p in ps)
    report = {
        "d": grid[0].d if grid else None,
        "boundary": {repr(a): (None if math.isinf(v) else v) for a, v in b.items()},
        "nonincreasing": all(x >= y for x, y in zip(seq, seq[1:])),
        "excluded": excluded,
        "resolved": resolved,
        "partial": len(b) < 3 or resolved == 0,
    }
    if other is not None:
        ob = boundary(columns(other)[0])
        common = sorted(set(b) & set(ob))
        lo, hi = (b, ob) if (grid and other and grid[0].d < other[0].d) else (ob, b)
        report["dimension_comparison"] = {
            repr(a): {"lower_d": None if math.isinf(lo[a]) else lo[a],
                      "higher_d": None if math.isinf(hi[a]) else hi[a]} for a in common}
        report["increasing_in_d"] = all(hi[a] >= lo[a] for a in common)
    return report
