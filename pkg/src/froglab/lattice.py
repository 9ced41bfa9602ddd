"""Nearest-neighbour drift walks on Z^d.

Directions are indexed ``0 .. 2d-1`` as ``+e1, -e1, +e2, -e2, ...``; index
``2d`` is the hold move of the lazy walk.  Public functions speak in signed
axis indices (``+1`` is ``e1``, ``-2`` is ``-e2``, ``0`` is hold).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .rng import as_generator

_UNBOUNDED = 2**40


@dataclass(frozen=True)
class TransitionKernel:
    """Step law with weight ``w`` on the drift axis and drift strength ``alpha``.

    With ``hold = q`` every move probability is scaled by ``1 - q`` and the
    walk stays put with probability ``q``.
    """

    d: int
    w: float
    alpha: float
    hold: float = 0.0

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError("d must be a positive integer")
        for name in ("w", "alpha"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if not 0.0 <= self.hold < 1.0:
            raise ValueError(f"hold must lie in [0, 1), got {self.hold}")
        if self.d == 1 and self.w != 1.0:
            raise ValueError("the one-dimensional walk needs w = 1")

    @classmethod
    def symmetric(cls, d: int, hold: float = 0.0) -> "TransitionKernel":
        return cls(d, 1.0 if d == 1 else 1.0 / d, 0.0, hold)

    def probabilities(self) -> np.ndarray:
        """Length ``2d + 1`` vector over ``+e1, -e1, ..., -ed, hold``."""
        move = 1.0 - self.hold
        p = np.empty(2 * self.d + 1)
        p[0] = move * self.w * (1.0 + self.alpha) / 2.0
        p[1] = move * self.w * (1.0 - self.alpha) / 2.0
        if self.d > 1:
            p[2:-1] = move * (1.0 - self.w) / (2.0 * (self.d - 1))
        p[-1] = self.hold
        return p

    def thresholds(self) -> np.ndarray:
        """Cumulative probabilities; the last entry is forced to 1."""
        c = np.cumsum(self.probabilities())
        c[-1] = 1.0
        return c

    def step_vectors(self) -> np.ndarray:
        v = np.zeros((2 * self.d + 1, self.d), dtype=np.int64)
        for j in range(self.d):
            v[2 * j, j] = 1
            v[2 * j + 1, j] = -1
        return v

    @property
    def drift(self) -> float:
        """Mean e1 displacement per step."""
        return (1.0 - self.hold) * self.w * self.alpha


@dataclass(frozen=True)
class LatticeBox:
    """Axis-aligned box ``prod_i [lower_i, upper_i]``.

    ``mode`` says what happens at the box for walks: ``"killing"`` walks
    die on leaving the box, ``"absorbing"`` walks stop on reaching its
    boundary layer.
    """

    lower: tuple
    upper: tuple
    mode: str = "killing"

    def __post_init__(self):
        lo = tuple(int(x) for x in self.lower)
        hi = tuple(int(x) for x in self.upper)
        if len(lo) != len(hi) or not lo:
            raise ValueError("lower and upper must have the same positive length")
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError("lower must not exceed upper on any axis")
        if self.mode not in ("killing", "absorbing"):
            raise ValueError(f"unknown boundary mode {self.mode!r}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def cube(cls, d: int, radius: int, centre=None, mode: str = "killing") -> "LatticeBox":
        c = np.zeros(d, dtype=np.int64) if centre is None else np.asarray(centre)
        return cls(tuple(c - radius), tuple(c + radius), mode)

    @classmethod
    def hyperplane(cls, d: int, n: int) -> "LatticeBox":
        """The hyperplane ``{x : x_1 = n}`` as a degenerate box."""
        return cls((n,) + (-_UNBOUNDED,) * (d - 1), (n,) + (_UNBOUNDED,) * (d - 1))

    @property
    def d(self) -> int:
        return len(self.lower)

    @property
    def shape(self) -> tuple:
        return tuple(b - a + 1 for a, b in zip(self.lower, self.upper))

    @property
    def size(self) -> int:
        return int(np.prod(self.shape, dtype=np.float64))

    @property
    def diameter(self) -> int:
        return int(sum(b - a for a, b in zip(self.lower, self.upper)))

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.int64))
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        return np.all((pts >= lo) & (pts <= hi), axis=1)

    def __contains__(self, point) -> bool:
        return bool(self.contains(point)[0])

    def on_boundary(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.int64))
        return np.any((pts == np.asarray(self.lower)) | (pts == np.asarray(self.upper)), axis=1)

    def points(self) -> np.ndarray:
        """All points in lexicographic order."""
        axes = [np.arange(a, b + 1) for a, b in zip(self.lower, self.upper)]
        grid = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=1)

    def ravel(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.int64)) - np.asarray(self.lower)
        return np.ravel_multi_index(tuple(pts.T), self.shape)


def _axis_to_index(d: int, direction: int) -> int:
    if direction == 0:
        return 2 * d
    axis = abs(int(direction))
    if not 1 <= axis <= d:
        raise ValueError(f"direction {direction} is not an axis of Z^{d}")
    return 2 * (axis - 1) + (0 if direction > 0 else 1)


def _index_to_axis(d: int, index: int) -> int:
    if index == 2 * d:
        return 0
    return (index // 2 + 1) * (1 if index % 2 == 0 else -1)


def kernel_probability(kernel: TransitionKernel, direction: int) -> float:
    """Probability of one step in the signed axis direction (0 means hold)."""
    return float(kernel.probabilities()[_axis_to_index(kernel.d, direction)])


def sample_steps(kernel: TransitionKernel, n: int, rng) -> np.ndarray:
    """``n`` i.i.d. direction indices in ``0 .. 2d``."""
    u = as_generator(rng).random(n)
    return np.searchsorted(kernel.thresholds(), u, side="right")


def sample_step(kernel: TransitionKernel, rng) -> int:
    """One step as a signed axis index, 0 for hold."""
    return _index_to_axis(kernel.d, int(sample_steps(kernel, 1, rng)[0]))


def walk_path(kernel: TransitionKernel, start, max_steps: int,
              box: Optional[LatticeBox] = None, rng=None) -> np.ndarray:
    """Trajectory ``S_0 = start, S_1, ...`` of at most ``max_steps`` steps.

    A killing box truncates the path before the first point outside it; an
    absorbing box stops it at the first boundary point.
    """
    if max_steps < 0:
        raise ValueError("max_steps must be non-negative")
    start = np.asarray(start, dtype=np.int64).reshape(kernel.d)
    if box is not None and start not in box:
        raise ValueError("start lies outside the box")
    steps = kernel.step_vectors()[sample_steps(kernel, max_steps, rng)]
    path = np.vstack([start, start + np.cumsum(steps, axis=0)]) if max_steps else start[None]
    if box is not None:
        inside = box.contains(path)
        if not inside.all():
            path = path[: int(np.argmin(inside))]
        if box.mode == "absorbing":
            hit = np.flatnonzero(box.on_boundary(path))
            if hit.size:
                path = path[: hit[0] + 1]
    return path


def hyperplane_hit_exact(alpha: float, n: int) -> float:
    """Probability that the walk from 0 ever reaches ``{x_1 = -n}``."""
    if n <= 0:
        raise ValueError("n must be a positive integer")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    return ((1.0 - alpha) / (1.0 + alpha)) ** n


class _Targets:
    """Membership test for a finite point set or a box-shaped region."""

    def __init__(self, targets, d: int):
        if isinstance(targets, LatticeBox):
            self.region = targets
            self.mask = None
        else:
            pts = np.atleast_2d(np.asarray(targets, dtype=np.int64))
            if pts.shape[1] != d:
                raise ValueError("target points have the wrong dimension")
            self.region = LatticeBox(tuple(pts.min(0)), tuple(pts.max(0)))
            self.mask = np.zeros(self.region.shape, dtype=bool)
            self.mask[tuple((pts - np.asarray(self.region.lower)).T)] = True

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        inside = self.region.contains(pts)
        if self.mask is None or not inside.any():
            return inside
        hit = np.zeros(len(pts), dtype=bool)
        rel = pts[inside] - np.asarray(self.region.lower)
        hit[inside] = self.mask[tuple(rel.T)]
        return hit


def mc_hit_estimate(kernel: TransitionKernel, start, targets, max_steps: Optional[int],
                    trials: int, rng, box: Optional[LatticeBox] = None):
    """Monte Carlo estimate of P(walk from ``start`` hits ``targets``).

    Walks are advanced together and stop on hitting, on leaving a killing
    ``box`` (or reaching the boundary of an absorbing one) or after
    ``max_steps`` steps.  Returns ``(estimate, stderr)``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if max_steps is None:
        if box is None:
            raise ValueError("max_steps is required without a box")
        max_steps = 64 * box.diameter
    gen = as_generator(rng)
    hits_target = _Targets(targets, kernel.d)
    start = np.asarray(start, dtype=np.int64).reshape(kernel.d)
    if hits_target(start[None])[0]:
        return 1.0, 0.0
    thresholds = kernel.thresholds()
    vectors = kernel.step_vectors()
    pos = np.tile(start, (trials, 1))
    hit = np.zeros(trials, dtype=bool)
    alive = np.arange(trials)
    for _ in range(max_steps):
        if alive.size == 0:
            break
        pos[alive] += vectors[np.searchsorted(thresholds, gen.random(alive.size), side="right")]
        p = pos[alive]
        now = hits_target(p)
        if box is not None:
            inside = box.contains(p)
            now &= inside
            stop = now | ~inside
            if box.mode == "absorbing":
                stop |= box.on_boundary(p)
        else:
            stop = now
        hit[alive[now]] = True
        alive = alive[~stop]
    est = hit.mean()
    return float(est), float(math.sqrt(est * (1.0 - est) / trials))


def exact_hit_solver(kernel: TransitionKernel, start, targets, box: LatticeBox) -> float:
    """P(walk from ``start`` reaches ``targets`` before being stopped by ``box``).

    Solves the first-step equations ``h = P h`` on the finite box with
    ``h = 1`` on targets, ``h = 0`` outside a killing box or on the boundary
    of an absorbing one.  States that cannot reach a target are fixed to 0
    first, which makes the remaining system non-singular.
    """
    d = kernel.d
    start = np.asarray(start, dtype=np.int64).reshape(d)
    if start not in box:
        raise ValueError("start lies outside the box")
    if box.size > 5_000_000:
        raise MemoryError(f"box has {box.size} states; the solver allows 5e6")
    pts = box.points()
    n = len(pts)
    is_target = _Targets(targets, d)(pts)
    absorbed = is_target.copy()
    if box.mode == "absorbing":
        absorbed |= box.on_boundary(pts)
    probs = kernel.probabilities()
    lo = np.asarray(box.lower)
    shape = box.shape
    rows, cols, vals = [], [], []
    for j, vec in enumerate(kernel.step_vectors()):
        if probs[j] == 0.0:
            continue
        nb = pts + vec
        ok = np.all((nb >= lo) & (nb <= np.asarray(box.upper)), axis=1)
        src = np.flatnonzero(ok & ~absorbed)
        dst = np.ravel_multi_index(tuple((nb[src] - lo).T), shape)
        rows.append(src)
        cols.append(dst)
        vals.append(np.full(src.size, probs[j]))
    rows = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
    cols = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
    vals = np.concatenate(vals) if vals else np.zeros(0)
    P = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))

    # backward reachability from the targets
    can_reach = is_target.copy()
    frontier = is_target.copy()
    while frontier.any():
        # i can reach the set if some j in it has P[i, j] > 0
        reached = (P @ frontier.astype(np.float64)) > 0
        frontier = reached & ~can_reach
        can_reach |= frontier

    s = int(box.ravel(start)[0])
    if is_target[s]:
        return 1.0
    if not can_reach[s] or absorbed[s]:
        return 0.0
    free = np.flatnonzero(can_reach & ~absorbed)
    index = np.full(n, -1)
    index[free] = np.arange(free.size)
    A = sp.identity(free.size, format="csc") - P[free][:, free].tocsc()
    b = np.asarray(P[free][:, np.flatnonzero(is_target)].sum(axis=1)).ravel()
    return float(_solve(A, b)[index[s]])


LU_LIMIT = 20_000


def _solve(A, b, tol: float = 1e-12) -> np.ndarray:
    """Sparse LU for small systems, BiCGSTAB above ``LU_LIMIT`` unknowns
    (LU fill-in is prohibitive on 3-d boxes), LU again if it stalls."""
    if A.shape[0] > LU_LIMIT:
        h, info = spla.bicgstab(A, b, rtol=tol, atol=0.0, maxiter=100_000)
        if info == 0 and np.linalg.norm(A @ h - b) <= 1e-10 * max(np.linalg.norm(b), 1.0):
            return h
    return spla.splu(A).solve(b)
