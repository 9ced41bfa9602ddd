"""The frog model and the frog model with death on a finite arena.

A run starts with active frogs at the initial sites and ``sleeping`` frogs
at every other site of ``region``.  Each frog follows its own walk of at most
``max_steps`` steps and is retired when it leaves ``arena``; with
``survival < 1`` it also dies at each step with probability ``1 - survival``.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import _engine
from .lattice import LatticeBox, TransitionKernel
from .rng import as_stream

MAX_FROGS = 20_000_000


class ResourceError(MemoryError):
    """The requested run would not fit in the memory budget."""


@dataclass(frozen=True)
class FrogSystemConfig:
    kernel: TransitionKernel
    arena: LatticeBox
    max_steps: int
    survival: float = 1.0
    initial_sites: tuple = None
    initial_count: int = 1
    sleeping: int = 1
    region: Optional[LatticeBox] = None
    origin: tuple = None

    def __post_init__(self):
        d = self.kernel.d
        if self.arena.d != d:
            raise ValueError("arena dimension does not match the kernel")
        if not 0.0 <= self.survival <= 1.0:
            raise ValueError("survival must lie in [0, 1]")
        if self.max_steps < 0 or self.sleeping < 0 or self.initial_count < 0:
            raise ValueError("max_steps, sleeping and initial_count must be non-negative")
        sites = ((0,) * d,) if self.initial_sites is None else tuple(tuple(int(c) for c in s)
                                                                    for s in self.initial_sites)
        object.__setattr__(self, "initial_sites", sites)
        object.__setattr__(self, "origin", (0,) * d if self.origin is None
                           else tuple(int(c) for c in self.origin))
        if self.region is None:
            object.__setattr__(self, "region", self.arena)
        if self.region.d != d:
            raise ValueError("region dimension does not match the kernel")
        if not all(s in self.arena for s in sites):
            raise ValueError("initial active sites must lie inside the arena")
        n = self.region.size * self.sleeping + len(sites) * self.initial_count
        if n > MAX_FROGS:
            raise ResourceError(f"{n} frogs requested; shrink the region to at most "
                                f"{MAX_FROGS // max(self.sleeping, 1)} sites")


@dataclass
class FrogRunRecord:
    """Outcome of one run.  Row ``i`` of the per-frog arrays is frog ``i``."""

    config: FrogSystemConfig
    run_key: int
    sites: np.ndarray
    frog_index: np.ndarray
    keys: np.ndarray
    activation_time: np.ndarray
    parent: np.ndarray
    steps: np.ndarray
    origin_visits: np.ndarray
    first_visit: np.ndarray
    final_time: int
    active_at_end: int
    stopped_early: bool
    watch_time: np.ndarray = None
    box_return_flags: Optional[np.ndarray] = None
    horizon: Optional[int] = None

    @property
    def n_frogs(self) -> int:
        return len(self.sites)

    @property
    def activated(self) -> np.ndarray:
        """Distinct sites whose frogs were activated, lexicographically sorted."""
        return np.unique(self.sites, axis=0) if self.n_frogs else self.sites

    def activated_set(self) -> set:
        return {tuple(int(c) for c in s) for s in self.sites}

    @property
    def origin_visit_count(self) -> int:
        return int(self.origin_visits.sum())

    def origin_visits_off_line(self) -> int:
        """Visits to the origin by frogs not starting on the e1-line through it."""
        lateral = self.sites[:, 1:] == np.asarray(self.config.origin[1:])
        on_line = lateral.all(axis=1)
        return int(self.origin_visits[~on_line].sum())

    @property
    def hyperplane_counts(self) -> dict:
        xs, counts = np.unique(self.activated[:, 0], return_counts=True)
        return {int(x): int(c) for x, c in zip(xs, counts)}

    @property
    def survived(self) -> bool:
        """Whether some frog was still alive when the horizon was reached."""
        return self.active_at_end > 0

    def trajectory(self, i: int) -> np.ndarray:
        c = self.config
        k = c.kernel
        return _engine.frog_path(np.uint64(self.keys[i]), self.sites[i].astype(np.int64),
                                 k.thresholds(), k.step_vectors(),
                                 np.int64(c.max_steps), float(c.survival),
                                 np.asarray(c.arena.lower, dtype=np.int64),
                                 np.asarray(c.arena.upper, dtype=np.int64))

    def traces(self) -> dict:
        """Site -> concatenated trajectories of the frogs starting there."""
        out = {}
        for i in range(self.n_frogs):
            site = tuple(int(c) for c in self.sites[i])
            path = self.trajectory(i)
            out[site] = np.vstack([out[site], path]) if site in out else path
        return out

    def activation_chain(self, i: int) -> list:
        """Frog indices from frog ``i`` back to an initially active frog."""
        chain = [int(i)]
        while self.parent[chain[-1]] >= 0:
            chain.append(int(self.parent[chain[-1]]))
        return chain


@dataclass(frozen=True)
class FrogCluster:
    root: tuple
    members: frozenset


def _as_i64(x):
    return np.ascontiguousarray(np.asarray(x, dtype=np.int64))


def _run(config: FrogSystemConfig, rng, horizon: Optional[int] = None,
         watch: Optional[tuple] = None, stop_when_watched: bool = False,
         boxes: Optional[list] = None, stop_when_boxes: bool = False) -> FrogRunRecord:
    """Shared driver.

    ``watch`` is ``(box, group_ids)`` with ``group_ids`` shaped like the box,
    ``-1`` where nothing is watched.  ``boxes`` is a list of boxes whose
    frogs are tested for ever reaching the origin.
    """
    stream = as_stream(rng)
    key = stream.key()
    k = config.kernel
    d = k.d
    region = config.region
    if watch is None:
        wbox = LatticeBox((0,) * d, (0,) * d)
        wgroup = np.full(1, -1, dtype=np.int64)
        n_groups = 0
    else:
        wbox, groups = watch
        wgroup = _as_i64(groups).ravel()
        n_groups = int(wgroup.max()) + 1 if wgroup.size else 0
    if boxes:
        bgroup = np.full(region.size, -1, dtype=np.int64)
        sizes = np.zeros(len(boxes), dtype=np.int64)
        for g, b in enumerate(boxes):
            pts = b.points()
            if not region.contains(pts).all():
                raise ValueError(f"box {g + 1} is not contained in the arena")
            bgroup[region.ravel(pts)] = g
            sizes[g] = len(pts) if config.sleeping > 0 else 0
    else:
        bgroup = np.full(1, -1, dtype=np.int64)
        sizes = np.zeros(0, dtype=np.int64)
    out = _engine.simulate(
        np.uint64(key), k.thresholds(), k.step_vectors(),
        _as_i64(region.lower), _as_i64(region.shape), np.int64(config.sleeping),
        _as_i64(config.arena.lower), _as_i64(config.arena.upper),
        np.int64(config.max_steps), float(config.survival),
        np.int64(-1 if horizon is None else horizon),
        _as_i64(config.initial_sites).reshape(-1, d),
        np.full(len(config.initial_sites), config.initial_count, dtype=np.int64),
        _as_i64(config.origin),
        _as_i64(wbox.lower), _as_i64(wbox.shape), wgroup, np.int64(n_groups),
        bool(stop_when_watched), bgroup, sizes, bool(stop_when_boxes))
    (sites, fk, keys, times, parent, steps, origin, _life, first_visit, watch_time,
     box_flag, _box_count, t, n_active, early) = out
    return FrogRunRecord(config=config, run_key=key, sites=sites, frog_index=fk, keys=keys,
                         activation_time=times, parent=parent, steps=steps,
                         origin_visits=origin, first_visit=first_visit.reshape(region.shape),
                         final_time=int(t), active_at_end=int(n_active),
                         stopped_early=bool(early), watch_time=watch_time,
                         box_return_flags=box_flag if boxes else None, horizon=horizon)


def run_frog_model(config: FrogSystemConfig, rng) -> FrogRunRecord:
    """Run the frog model without death until every frog is retired."""
    if config.survival != 1.0:
        raise ValueError("run_frog_model needs survival = 1; use run_frog_model_with_death")
    return _run(config, rng)


def run_frog_model_with_death(config: FrogSystemConfig, rng,
                              horizon: Optional[int] = None) -> FrogRunRecord:
    """Run the frog model with death.

    With a ``horizon`` the run stops at that time and ``record.survived``
    tells whether a frog was still alive then.
    """
    return _run(config, rng, horizon=horizon)


def _visited_sites(path) -> set:
    return {tuple(int(c) for c in p) for p in np.atleast_2d(path)}


def _in_region(region, site) -> bool:
    if region is None:
        return True
    if isinstance(region, LatticeBox):
        return site in region
    return site in region


def frog_path_exists(traces: dict, x, y, region) -> bool:
    """Whether there is a frog path from ``x`` to ``y`` with every
    intermediate frog in ``region``.

    ``traces`` maps a site to the trajectory of its frog.  ``region`` is a
    set of sites, a LatticeBox, or None for the whole lattice.
    """
    x = tuple(int(c) for c in x)
    y = tuple(int(c) for c in y)
    if x not in traces:
        raise ValueError(f"no trajectory for site {x}")
    if isinstance(region, (list, tuple)) and region and not isinstance(region[0], int):
        region = {tuple(s) for s in region}
    seen = set()
    queue = deque([x])
    done = {x}
    while queue:
        z = queue.popleft()
        visited = _visited_sites(traces[z])
        if y in visited:
            return True
        for v in visited - seen:
            if v not in done and _in_region(region, v):
                if v not in traces:
                    raise ValueError(f"no trajectory for site {v} inside the region")
                done.add(v)
                queue.append(v)
        seen |= visited
    return False


def frog_cluster(traces: dict, x, region=None) -> FrogCluster:
    """All sites reachable from ``x`` by frog paths through ``region``."""
    x = tuple(int(c) for c in x)
    members = set()
    queue = deque([x])
    done = {x}
    while queue:
        z = queue.popleft()
        for v in _visited_sites(traces[z]):
            members.add(v)
            if v not in done and v in traces and _in_region(region, v):
                done.add(v)
                queue.append(v)
    return FrogCluster(x, frozenset(members))


def recurrence_boxes(d: int, n_boxes: int, K: int = 0) -> list:
    """Boxes ``{|y_1 + (2K+1) i| <= K, |y_j| <= (2K+1) sqrt(i) + K}``."""
    side = 2 * K + 1
    out = []
    for i in range(1, n_boxes + 1):
        lat = int(math.floor(side * math.sqrt(i))) + K
        lo = (-side * i - K,) + (-lat,) * (d - 1)
        hi = (-side * i + K,) + (lat,) * (d - 1)
        out.append(LatticeBox(lo, hi))
    return out


def recurrence_proxy(config: FrogSystemConfig, n_boxes: int, rng, K: int = 0,
                     early_stop: bool = True):
    """Fraction of the boxes ``1..n_boxes`` holding an activated frog that
    visits the origin.

    Returns ``(fraction, flags)``.  With ``early_stop`` the run ends once
    every box is decided, i.e. flagged or with all of its frogs activated.
    """
    if n_boxes < 1:
        raise ValueError("n_boxes must be >= 1")
    boxes = recurrence_boxes(config.kernel.d, n_boxes, K)
    for b in boxes:
        if not config.region.contains(b.points()).all():
            raise ValueError("the arena does not contain all recurrence boxes")
    rec = _run(config, rng, boxes=boxes, stop_when_boxes=early_stop)
    flags = rec.box_return_flags
    return float(flags.mean()), flags


def measure_shape_growth(config: FrogSystemConfig, horizon: int, rng) -> np.ndarray:
    """Number of distinct sites visited by active frogs by time n, n = 0..horizon."""
    if config.kernel.alpha != 0.0:
        raise ValueError("shape growth is measured for the driftless model")
    centre = np.asarray(config.initial_sites[0])
    need = LatticeBox.cube(config.kernel.d, horizon, centre)
    if not config.region.contains(need.points()[[0, -1]]).all():
        raise ValueError("the arena must contain the cube of radius horizon")
    rec = _run(config, rng, horizon=horizon)
    fv = rec.first_visit.ravel()
    fv = fv[fv >= 0]
    return np.cumsum(np.bincount(fv, minlength=horizon + 1)[: horizon + 1])


def hyperplane_death_coupling(d: int, w: float, horizon: int, rng,
                              radius: Optional[int] = None) -> FrogRunRecord:
    """The in-hyperplane image of the drifted model: symmetric frogs on
    Z^(d-1) that die when they would leave their hyperplane.

    The drift strength plays no role, so it is not a parameter.
    """
    if d < 2:
        raise ValueError("d must be >= 2")
    radius = horizon + 1 if radius is None else radius
    kernel = TransitionKernel.symmetric(d - 1)
    arena = LatticeBox.cube(d - 1, radius)
    config = FrogSystemConfig(kernel, arena, max_steps=horizon, survival=1.0 - w)
    return _run(config, rng, horizon=horizon)


def dump_trajectories(record: FrogRunRecord, path) -> None:
    """Write one JSON line ``{"frog", "step", "site"}`` per trajectory point."""
    with open(path, "w") as fh:
        for i in range(record.n_frogs):
            for step, site in enumerate(record.trajectory(i)):
                fh.write(json.dumps({"frog": i, "step": step,
                                     "site": [int(c) for c in site]}) + "\n")
