"""One-dimensional frogs: left-hit probabilities, the frontier chain Y_n,
its dominating chain and the decay of P(0 ~> -n).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import _engine
from .lattice import TransitionKernel
from .rng import as_generator, as_stream
from .stats import LogLinearFit, log_linear_fit


@dataclass(frozen=True)
class OneDModel:
    """Either the drifted walk (``kind='drift'``) or the symmetric walk with
    per-step survival ``s`` (``kind='death'``)."""

    kind: str
    alpha: float = 0.0
    s: float = 1.0

    def __post_init__(self):
        if self.kind not in ("drift", "death"):
            raise ValueError("kind must be 'drift' or 'death'")
        if not (0.0 <= self.alpha <= 1.0 and 0.0 <= self.s <= 1.0):
            raise ValueError("alpha and s must lie in [0, 1]")

    @classmethod
    def drift(cls, alpha: float) -> "OneDModel":
        return cls("drift", alpha=alpha)

    @classmethod
    def death(cls, s: float) -> "OneDModel":
        return cls("death", s=s)

    @property
    def kernel(self) -> TransitionKernel:
        return TransitionKernel(1, 1.0, self.alpha if self.kind == "drift" else 0.0)

    @property
    def survival(self) -> float:
        return self.s if self.kind == "death" else 1.0


def left_hit_probability_exact(model: OneDModel) -> float:
    """Probability that a single frog started at 0 ever visits -1."""
    if model.kind == "drift":
        if model.alpha == 0.0:
            raise ValueError("p = 1 without drift")
        return (1 - model.alpha) / (1 + model.alpha)
    s = model.s
    if s >= 1.0:
        raise ValueError("p = 1 without death")
    if s == 0.0:
        return 0.0
    # smaller root of q = s/2 + (s/2) q^2
    return (1 - math.sqrt(1 - s * s)) / s


@dataclass(frozen=True)
class YChainParams:
    p: float
    k0: int

    def __post_init__(self):
        if not 0.0 <= self.p < 1.0:
            raise ValueError("p must lie in [0, 1)")


def domination_threshold(p: float) -> int:
    """Smallest k >= 1 with P(Binomial(k+1, p) <= k-1) > 2/3."""
    if not 0.0 <= p < 1.0:
        raise ValueError("p must lie in [0, 1)")
    k = 1
    while stats.binom.cdf(k - 1, k + 1, p) <= 2 / 3:
        k += 1
    return k


def ychain_params(p: float) -> YChainParams:
    return YChainParams(p, domination_threshold(p))


def y_step(state: int, p: float, rng) -> int:
    """One step of Y: 0 is absorbing, otherwise Binomial(state + 1, p)."""
    if state < 0:
        raise ValueError("state must be non-negative")
    if state == 0:
        return 0
    return int(as_generator(rng).binomial(state + 1, p))


def _y_from_uniform(state: int, p: float, u: float) -> int:
    """Smallest j with ``u < F(j)``, F the Binomial(state+1, p) CDF."""
    if state == 0:
        return 0
    n = state + 1
    if p >= 1.0:
        return n
    pmf = (1.0 - p) ** n
    cdf = pmf
    j = 0
    while u >= cdf and j < n:
        pmf *= (n - j) / (j + 1) * p / (1.0 - p)
        j += 1
        cdf += pmf
    return j


def _dominating_from_uniform(state: int, p: float, k0: int, u: float) -> int:
    if state == 0:
        return 0
    if state == k0:
        return 0 if u < (1 - p) ** (k0 + 1) else k0 + 1
    return state - 1 if u < 2 / 3 else state + 1


def dominating_step(state: int, p: float, k0: int, rng) -> int:
    """One step of the dominating chain on {0} and {k0, k0+1, ...}."""
    if 0 < state < k0 or state < 0:
        raise ValueError(f"state {state} is outside {{0}} and [k0={k0}, inf)")
    return _dominating_from_uniform(state, p, k0, float(as_generator(rng).random()))


def coupled_paths(p: float, y1: int, n_steps: int, rng):
    """Run Y and its dominating chain on shared uniforms.

    Each step draws one uniform ``U``; Y moves to the ``U``-quantile of
    Binomial(Y+1, p), the dominating chain moves down iff ``U < 2/3`` (or
    drops to 0 at k0 iff ``U < (1-p)^(k0+1)``).  Both paths start at time
    1 with the dominating chain at ``max(y1, k0)``.
    """
    k0 = domination_threshold(p)
    u = as_generator(rng).random(n_steps)
    y = np.empty(n_steps + 1, dtype=np.int64)
    yt = np.empty(n_steps + 1, dtype=np.int64)
    y[0] = y1
    yt[0] = max(y1, k0) if y1 > 0 else 0
    for n in range(n_steps):
        y[n + 1] = _y_from_uniform(int(y[n]), p, u[n])
        yt[n + 1] = _dominating_from_uniform(int(yt[n]), p, k0, u[n])
    return y, yt


@dataclass(frozen=True)
class DecayEstimate:
    """Per-n estimates of P(0 ~> -n) and the fitted exponential rate."""

    n: np.ndarray
    estimates: np.ndarray
    stderr: np.ndarray
    rate: float
    r2: float
    lower_bound: bool
    fit: LogLinearFit


def _right_margin(model: OneDModel) -> int:
    try:
        p = left_hit_probability_exact(model)
    except ValueError:
        return 200
    if p <= 0.0:
        return 1
    # a frog beyond the margin reaches 0 with probability below 1e-8
    return int(min(200, math.ceil(math.log(1e-8) / math.log(p)) + 1))


def leftmost_reach(model: OneDModel, n_max: int, trials: int, rng, right: int = None):
    """Leftmost site of the frog cluster of 0, clipped at ``-n_max``, per trial."""
    k = model.kernel
    right = _right_margin(model) if right is None else right
    return _engine.leftmost_reach_batch(np.uint64(as_stream(rng).key()), k.thresholds(),
                                        k.step_vectors(), float(model.survival),
                                        np.int64(n_max), np.int64(right),
                                        np.int64(1000 * n_max), np.int64(trials))


def reach_decay_estimate(model: OneDModel, n_max: int, trials: int, rng) -> DecayEstimate:
    """Estimate P(0 ~> -n) for n = 1..n_max and fit ``exp(-c n)``.

    Frogs walk at most ``1000 n_max`` steps, which can only lower the
    estimates.  If some estimate is zero the fit uses the positive ones and
    the rate is flagged as a lower bound (infinite if all are zero).
    """
    if n_max < 3:
        raise ValueError("n_max must be >= 3")
    lo = leftmost_reach(model, n_max, trials, rng)
    n = np.arange(1, n_max + 1)
    est = (lo[None, :] <= -n[:, None]).mean(axis=1)
    se = np.sqrt(est * (1 - est) / trials)
    fit = log_linear_fit(n, est)
    zero = bool((est == 0).any())
    rate = math.inf if fit.n_points < 2 else -fit.slope
    return DecayEstimate(n, est, se, rate, fit.r2, zero, fit)
