"""Site percolation and the block couplings between frog clusters and
percolation clusters.
"""
from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage, optimize, stats

from . import _engine
from .frogs import FrogCluster, FrogSystemConfig, _run
from .lattice import LatticeBox, TransitionKernel
from .rng import RngStream, as_generator, as_stream
from .stats import Z95

FAR = 2**40


# ----------------------------------------------------------------------------
# fields and clusters


@dataclass(frozen=True)
class PercolationField:
    """Open/closed sites of ``box``; ``uniforms`` couples fields across ``p``."""

    d: int
    p: float
    box: LatticeBox
    open: np.ndarray
    uniforms: Optional[np.ndarray] = field(default=None, repr=False)

    def is_open(self, site) -> bool:
        return bool(self.open[tuple(np.asarray(site) - np.asarray(self.box.lower))])

    def at(self, p: float) -> "PercolationField":
        """The field at another ``p`` built from the same uniforms."""
        if self.uniforms is None:
            raise ValueError("field was not sampled from stored uniforms")
        return PercolationField(self.d, p, self.box, self.uniforms < p, self.uniforms)


def sample_field(d: int, p: float, box: LatticeBox, rng) -> PercolationField:
    """I.i.d. Bernoulli(p) sites on ``box``: site open iff its uniform is below ``p``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if box.d != d:
        raise ValueError("box dimension does not match d")
    u = as_generator(rng).random(box.shape)
    return PercolationField(d, p, box, u < p, u)


@dataclass(frozen=True)
class Cluster:
    """Open cluster of ``root``; ``members`` lists sites in exploration order."""

    root: tuple
    members: np.ndarray

    @property
    def size(self) -> int:
        return len(self.members)

    def as_set(self) -> set:
        return {tuple(int(c) for c in m) for m in self.members}


def _neighbours(d: int):
    for a in range(d):
        for sgn in (1, -1):
            e = [0] * d
            e[a] = sgn
            yield tuple(e)


def explore_cluster(field: PercolationField, x) -> Cluster:
    """Open cluster of ``x`` explored in lexicographic order.

    At every step the smallest (lexicographic) reached but unexplored site
    is explored next.  A closed ``x`` gives an empty cluster.
    """
    x = tuple(int(c) for c in x)
    if x not in field.box:
        raise ValueError("x is outside the field's box")
    d = field.d
    if not field.is_open(x):
        return Cluster(x, np.empty((0, d), dtype=np.int64))
    heap = [x]
    seen = {x}
    order = []
    nbrs = list(_neighbours(d))
    while heap:
        z = heapq.heappop(heap)
        order.append(z)
        for e in nbrs:
            y = tuple(a + b for a, b in zip(z, e))
            if y not in seen and y in field.box and field.is_open(y):
                seen.add(y)
                heapq.heappush(heap, y)
    return Cluster(x, np.array(order, dtype=np.int64).reshape(-1, d))


def _members_set(cluster) -> set:
    if isinstance(cluster, Cluster):
        return cluster.as_set()
    if isinstance(cluster, FrogCluster):
        return set(cluster.members)
    return {tuple(int(c) for c in s) for s in cluster}


def density_statistic(cluster, region, a: float) -> bool:
    """Indicator of ``|A ∩ C| >= a |A|``."""
    A = {tuple(int(c) for c in s) for s in region}
    if not A:
        raise ValueError("region A must be non-empty")
    return len(A & _members_set(cluster)) >= a * len(A)


def density_frequency(d: int, p: float, box: LatticeBox, region, x, a: float,
                      trials: int, rng) -> float:
    """Frequency over fresh fields of ``|A ∩ C_x| >= a |A|``."""
    stream = as_stream(rng)
    pts = np.asarray([tuple(s) for s in region], dtype=np.int64)
    if len(pts) == 0:
        raise ValueError("region A must be non-empty")
    idx_a = tuple((pts - np.asarray(box.lower)).T)
    ix = tuple(np.asarray(x) - np.asarray(box.lower))
    hits = 0
    for t in range(trials):
        f = sample_field(d, p, box, stream.child(t))
        lab, _ = ndimage.label(f.open)
        lx = lab[ix]
        if lx == 0:
            hits += a <= 0
            continue
        hits += (lab[idx_a] == lx).sum() >= a * len(pts)
    return hits / trials


# ----------------------------------------------------------------------------
# critical probability


def spanning_thresholds(d: int, size: int, trials: int, rng) -> np.ndarray:
    """Per-field threshold: the field on ``[0, size)^d`` spans along the first
    axis iff ``p`` exceeds it."""
    stream = as_stream(rng)
    shape = np.full(d, size, dtype=np.int64)
    out = np.empty(trials)
    for t in range(trials):
        u = stream.child(t).generator().random(size ** d)
        out[t] = _engine.spanning_threshold(u, shape)
    return out


def spans(field: PercolationField) -> bool:
    """Whether an open cluster connects the two faces orthogonal to e1."""
    lab, _ = ndimage.label(field.open)
    first = set(np.unique(lab[0])) - {0}
    last = set(np.unique(lab[-1])) - {0}
    return bool(first & last)


@dataclass(frozen=True)
class PcEstimate:
    estimate: float
    bracket: tuple
    crossings: tuple
    flagged: bool
    sizes: tuple


def estimate_pc(d: int, box_sizes, trials: int, rng, resolution: float = 0.01) -> PcEstimate:
    """Crossing point of the spanning-probability curves of several box sizes.

    Each size's spanning probability ``R_L(p)`` is the normal CDF matched to
    the mean and spread of its per-field thresholds.  The crossing of each
    consecutive pair of sizes is found by bisection to ``resolution``; the
    estimate is their mean.  A pair whose curves do not cross contributes the
    midpoint of its medians and flags the estimate, with a widened bracket.
    """
    sizes = sorted(int(s) for s in box_sizes)
    if len(sizes) < 2:
        raise ValueError("need at least two box sizes")
    stream = as_stream(rng)
    fits = []
    for j, L in enumerate(sizes):
        th = spanning_thresholds(d, L, trials, stream.child(j))
        fits.append((th.mean(), max(th.std(ddof=1), 1e-6)))
    crossings, flagged, lo, hi = [], False, 1.0, 0.0
    for (ma, sa), (mb, sb) in zip(fits, fits[1:]):
        f = lambda p: stats.norm.cdf(p, mb, sb) - stats.norm.cdf(p, ma, sa)
        a, b = min(ma, mb) - 3 * max(sa, sb), max(ma, mb) + 3 * max(sa, sb)
        a, b = max(a, 0.0), min(b, 1.0)
        if f(a) * f(b) < 0:
            c = optimize.bisect(f, a, b, xtol=resolution / 2)
            crossings.append(c)
            lo, hi = min(lo, c - resolution), max(hi, c + resolution)
        else:
            flagged = True
            c = 0.5 * (ma + mb)
            crossings.append(c)
            lo, hi = min(lo, ma, mb), max(hi, ma, mb)
    return PcEstimate(float(np.mean(crossings)), (max(lo, 0.0), min(hi, 1.0)),
                      tuple(crossings), flagged, tuple(sizes))


# ----------------------------------------------------------------------------
# block schemes


@dataclass(frozen=True)
class RenormScheme:
    """Tessellation of Z^d into blocks.

    ``cube``: centre ``(2K+1) x``, block the sup-ball of radius K.
    ``segment`` (d = 2): centre ``(x_1, (2K+1) x_2)``, block a vertical segment.
    ``prime-cube``: centre ``3 x``, block the sup-ball of radius 1, inner set
    ``W_x`` the sites of the block within l1 distance ``a d`` of the centre.
    """

    variant: str
    d: int
    K: int = 0
    a: float = None

    def __post_init__(self):
        if self.variant not in ("cube", "segment", "prime-cube"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.variant == "segment" and self.d != 2:
            raise ValueError("the segment scheme is defined for d = 2")
        if self.variant == "prime-cube":
            if self.a is None or not self.a > 0:
                raise ValueError("prime-cube needs a > 0")
        elif self.K < 0:
            raise ValueError("K must be >= 0")

    @property
    def side(self) -> int:
        return 3 if self.variant == "prime-cube" else 2 * self.K + 1

    def centre(self, x) -> tuple:
        x = tuple(int(c) for c in x)
        if self.variant == "segment":
            return (x[0], self.side * x[1])
        return tuple(self.side * c for c in x)

    def block(self, x) -> LatticeBox:
        q = np.asarray(self.centre(x))
        if self.variant == "segment":
            r = np.array([0, self.K])
        elif self.variant == "prime-cube":
            r = np.ones(self.d, dtype=np.int64)
        else:
            r = np.full(self.d, self.K)
        return LatticeBox(tuple(q - r), tuple(q + r))

    def inner(self, x) -> np.ndarray:
        """``W_x`` for prime-cube, the centre alone otherwise."""
        q = np.asarray(self.centre(x))
        if self.variant != "prime-cube":
            return q[None, :]
        pts = self.block(x).points()
        return pts[np.abs(pts - q).sum(axis=1) <= self.a * self.d + 1e-12]

    def block_of(self, y) -> tuple:
        y = np.asarray(y)
        if self.variant == "segment":
            return (int(y[0]), int(math.floor((y[1] + self.K) / self.side)))
        r = 1 if self.variant == "prime-cube" else self.K
        return tuple(int(c) for c in np.floor((y + r) / self.side).astype(int))

    def neighbours(self, x):
        x = tuple(int(c) for c in x)
        return [tuple(a + b for a, b in zip(x, e)) for e in _neighbours(self.d)]


def _block_run(scheme: RenormScheme, kernel: TransitionKernel, s: float, x, start,
               targets: list, stream: RngStream, max_steps: int, stop: bool = True):
    """Frog model with frogs only in block ``x``, started at ``start``.

    ``targets`` lists point sets, one watch group each.  Returns the run
    record, whose ``watch_time`` is -1 for groups never visited.
    """
    d = scheme.d
    allpts = np.vstack(targets)
    wbox = LatticeBox(tuple(allpts.min(axis=0)), tuple(allpts.max(axis=0)))
    groups = np.full(wbox.size, -1, dtype=np.int64)
    for g, pts in enumerate(targets):
        groups[wbox.ravel(pts)] = g
    config = FrogSystemConfig(kernel, LatticeBox((-FAR,) * d, (FAR,) * d),
                              max_steps=max_steps, survival=s,
                              initial_sites=(tuple(int(c) for c in start),),
                              region=scheme.block(x))
    return _run(config, stream, watch=(wbox, groups.reshape(wbox.shape)),
                stop_when_watched=stop)


def default_block_steps(scheme: RenormScheme) -> int:
    return 100 * scheme.side ** 2


def block_is_open(scheme: RenormScheme, kernel: TransitionKernel, s: float, x,
                  stream: RngStream, max_steps: Optional[int] = None) -> bool:
    """Whether ``q_x`` reaches every ``q_{x+e}`` by frog paths inside ``Q_x``."""
    steps = default_block_steps(scheme) if max_steps is None else max_steps
    targets = [np.asarray(scheme.centre(y))[None, :] for y in scheme.neighbours(x)]
    rec = _block_run(scheme, kernel, s, x, scheme.centre(x), targets, stream, steps)
    return bool((rec.watch_time >= 0).all())


def renorm_open_probability(scheme: RenormScheme, kernel: TransitionKernel, s: float,
                            trials: int, rng, x=None, max_steps: Optional[int] = None):
    """Monte Carlo estimate ``(p_hat, stderr)`` of the block-openness probability.

    Frogs walk at most ``max_steps`` steps (default ``100 (2K+1)^2``), which
    can only lower the estimate.
    """
    if scheme.variant == "prime-cube":
        raise ValueError("use good_vertex_probability for the prime-cube scheme")
    if scheme.d != kernel.d:
        raise ValueError("scheme and kernel dimensions differ")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    x = (0,) * scheme.d if x is None else x
    stream = as_stream(rng)
    hits = sum(block_is_open(scheme, kernel, s, x, stream.child(t), max_steps)
               for t in range(trials))
    ph = hits / trials
    return ph, math.sqrt(ph * (1 - ph) / trials)


def _check_good_params(s: float, a: float):
    if not s > 0.75:
        raise ValueError("need s > 3/4")
    if not 2 / 3 < a < 2 - 1 / s:
        raise ValueError(f"need 2/3 < a < 2 - 1/s = {2 - 1 / s:.4f}")


GOOD_STEPS = 10_000


def vertex_is_good(scheme: RenormScheme, s: float, x, o, stream: RngStream):
    """Whether ``o`` in block ``x`` reaches ``W_{x+e}`` for every ``e`` by frog
    paths inside ``Q'_x``.  Also returns the record of the block run."""
    kernel = TransitionKernel.symmetric(scheme.d)
    targets = [scheme.inner(y) for y in scheme.neighbours(x)]
    rec = _block_run(scheme, kernel, s, x, o, targets, stream, GOOD_STEPS, stop=False)
    return bool((rec.watch_time >= 0).all()), rec


def good_vertex_probability(d: int, s: float, a: float, o, trials: int, rng):
    """Estimate ``(P_hat(o good), stderr)`` in the frog model with death.

    ``o`` is given relative to the centre of its block and must lie in ``W_0``.
    """
    _check_good_params(s, a)
    scheme = RenormScheme("prime-cube", d, a=a)
    o = tuple(int(c) for c in o)
    if not any((scheme.inner((0,) * d) == o).all(axis=1)):
        raise ValueError("o must lie in W_0")
    stream = as_stream(rng)
    hits = sum(vertex_is_good(scheme, s, (0,) * d, o, stream.child(t))[0] for t in range(trials))
    ph = hits / trials
    return ph, math.sqrt(ph * (1 - ph) / trials)


def good_probability_table(d: int, s: float, a: float, trials: int, rng):
    """Good-vertex probabilities for every vertex type of ``W_0``.

    By symmetry the probability depends only on the number ``m`` of nonzero
    coordinates of ``o``.  Returns arrays ``(m, p_hat, lower 95% bound)``.
    """
    scheme = RenormScheme("prime-cube", d, a=a)
    stream = as_stream(rng)
    ms = sorted({int(np.count_nonzero(o)) for o in scheme.inner((0,) * d)})
    ph, low = [], []
    for m in ms:
        o = (1,) * m + (0,) * (d - m)
        p, se = good_vertex_probability(d, s, a, o, trials, stream.child(m))
        ph.append(p)
        low.append(max(p - Z95 * se, 0.0))
    return np.array(ms), np.array(ph), np.array(low)


@dataclass
class ExplorationResult:
    """Reached and dead blocks, plus per-candidate acceptance history."""

    reached: set
    dead: set
    order: list
    accepted: list
    acceptance_prob: list


def renormalized_frog_exploration(scheme: RenormScheme, kernel: TransitionKernel, s: float,
                                  v, rng, radius: int = 3, beta: Optional[float] = None,
                                  good_probs=None, max_steps: Optional[int] = None
                                  ) -> ExplorationResult:
    """Explore the block cluster of ``v`` inside ``{|x|_inf <= radius}``.

    Candidates are the unexplored neighbours of reached blocks, taken in
    lexicographic order.  For the prime-cube scheme the entry vertex ``y`` of
    a candidate is the smallest site of its ``W`` visited by frogs of the
    adjacent reached blocks (the centre for ``v``), and the candidate is
    reached iff ``y`` is good and an independent ``Bernoulli(beta / P(y
    good))`` mark equals 1, with ``good_probs[m]`` giving ``P(y good)`` for
    ``m`` nonzero coordinates of ``y - 3x``.  For the cube and segment
    schemes a candidate is reached iff it is open, with no thinning.
    """
    d = scheme.d
    stream = as_stream(rng)
    frogs_stream = stream.child(0)
    marks = stream.child(1).generator()
    prime = scheme.variant == "prime-cube"
    if prime:
        _check_good_params(s, scheme.a)
        if beta is None or good_probs is None:
            raise ValueError("prime-cube exploration needs beta and good_probs")
        kernel = TransitionKernel.symmetric(d)
    v = tuple(int(c) for c in v)
    inside = lambda x: max(abs(c) for c in x) <= radius
    entry = {v: tuple(scheme.centre(v))}
    visited_by = {}  # block -> set of sites of its W visited by reached blocks
    reached, dead, order, accepted, probs = set(), set(), [], [], []
    frontier = [v]
    while frontier:
        x = heapq.heappop(frontier)
        if x in reached or x in dead:
            continue
        order.append(x)
        if prime:
            y = entry[x]
            good, rec = vertex_is_good(scheme, s, x, y, frogs_stream)
            m = int(np.count_nonzero(np.asarray(y) - np.asarray(scheme.centre(x))))
            q = min(1.0, beta / good_probs[m])
            mark = marks.random() < q
            ok = good and mark
            accepted.append(bool(ok))
            probs.append(q)
        else:
            steps = default_block_steps(scheme) if max_steps is None else max_steps
            ok = block_is_open(scheme, kernel, s, x, frogs_stream, steps)
            rec = None
        if not ok:
            dead.add(x)
            continue
        reached.add(x)
        for e_idx, z in enumerate(scheme.neighbours(x)):
            if not inside(z) or z in reached or z in dead:
                continue
            if prime:
                hit = _visited_in(rec, scheme.inner(z))
                visited_by.setdefault(z, set()).update(hit)
                if not visited_by[z]:
                    continue
                entry[z] = min(visited_by[z])
            heapq.heappush(frontier, z)
    return ExplorationResult(reached, dead, order, accepted, probs)


def _visited_in(rec, pts: np.ndarray) -> set:
    """Sites of ``pts`` visited by the frogs of a run record."""
    want = {tuple(int(c) for c in p) for p in pts}
    out = set()
    for i in range(rec.n_frogs):
        for p in rec.trajectory(i):
            t = tuple(int(c) for c in p)
            if t in want:
                out.add(t)
    return out


def percolation_cluster_blocks(d: int, beta: float, v, radius: int, rng) -> set:
    """Open cluster of ``v`` in Bernoulli(beta) site percolation on the blocks."""
    box = LatticeBox.cube(d, radius)
    f = sample_field(d, beta, box, rng)
    return explore_cluster(f, v).as_set()
