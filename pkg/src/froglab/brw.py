"""Branching random walks dominating the drifted frog model, the tilted
mean ``mu`` and statistical transience certificates.

A certificate is statistical evidence: the upper end of a 95% confidence
interval for ``mu`` lies below 1.  It is not a proof.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import _engine
from .frogs import FrogSystemConfig, _run
from .lattice import LatticeBox, TransitionKernel
from .oned import OneDModel, reach_decay_estimate
from .rng import RngStream, as_generator, as_stream
from .stats import Z95

XI_CAP = 10_000
K_MAX = 200
MASS_LIMIT = 1e-3
FAR = 2**40
GOLDEN_RATIO = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class OffspringModel:
    """Offspring law of a dominating branching random walk.

    ``xi-1d``: ``xi`` children, each displaced by +1 w.p. (1+alpha)/2 and
    -1 otherwise.  ``deterministic``: one child displaced by
    ``displacement``.  ``line-based`` only carries parameters for
    :func:`estimate_mu_lines`.
    """

    variant: str
    w: float = 1.0
    alpha: float = 0.0
    d: int = 2
    cap: int = XI_CAP
    displacement: int = 1

    def __post_init__(self):
        if self.variant not in ("xi-1d", "line-based", "deterministic"):
            raise ValueError(f"unknown offspring variant {self.variant!r}")
        if self.cap < 1:
            raise ValueError("cap must be >= 1")


@dataclass(frozen=True)
class MuEstimate:
    theta: float
    mu_hat: float
    ci_low: float
    ci_high: float
    trials: int
    truncated_mass: float = 0.0
    cap_hit_frequency: float = 0.0
    flagged: bool = False

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError("theta must be > 0")


@dataclass
class TransienceCertificate:
    d: int
    w: float
    alpha: float
    strategy: str
    estimate: Optional[MuEstimate]
    verdict: str
    seed: int
    searched: list = field(default_factory=list)
    note: str = ""

    def to_dict(self) -> dict:
        e = self.estimate
        return {"d": self.d, "w": self.w, "alpha": self.alpha, "strategy": self.strategy,
                "theta": e.theta if e else None, "mu_hat": e.mu_hat if e else None,
                "ci_low": e.ci_low if e else None, "ci_high": e.ci_high if e else None,
                "trials": e.trials if e else 0,
                "truncated_mass": e.truncated_mass if e else None,
                "verdict": self.verdict, "seed": self.seed}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TransienceCertificate":
        r = json.loads(text)
        est = None
        if r["theta"] is not None:
            est = MuEstimate(r["theta"], r["mu_hat"], r["ci_low"], r["ci_high"], r["trials"],
                             r["truncated_mass"])
        return cls(r["d"], r["w"], r["alpha"], r["strategy"], est, r["verdict"], r["seed"])


def reference_brw_boundary(alpha: float) -> float:
    """``g(alpha) = min(1, 1 / (2 (1 - sqrt(1 - alpha^2))))`` with ``g(0) = 1``."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    den = 2 * (1 - math.sqrt(1 - alpha * alpha))
    return 1.0 if den <= 0.5 else 1 / den


def mu_exact_1d(alpha: float, theta: float, mean_xi: float) -> float:
    """``mu = ((1-alpha) e^theta + (1+alpha) e^-theta) E[xi] / 2``."""
    if mean_xi < 0:
        raise ValueError("mean_xi must be >= 0")
    return 0.5 * ((1 - alpha) * math.exp(theta) + (1 + alpha) * math.exp(-theta)) * mean_xi


def optimal_theta_1d(alpha: float) -> float:
    """Minimiser ``log((1+alpha)/(1-alpha)) / 2`` of :func:`mu_exact_1d`."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    return 0.5 * math.log((1 + alpha) / (1 - alpha))


# ----------------------------------------------------------------------------
# the one-dimensional projection


def sample_xi_batch(w: float, trials: int, rng, cap: int = XI_CAP,
                    max_steps: int = 2**62) -> np.ndarray:
    """``trials`` draws of ``xi``, capped at ``cap``."""
    if not 0.0 < w <= 1.0:
        raise ValueError("w must lie in (0, 1]")
    if cap < 2:
        raise ValueError("cap must be >= 2")
    return _engine.xi_batch(np.uint64(as_stream(rng).key()), 1.0 - w, np.int64(cap),
                            np.int64(max_steps), np.int64(trials))


def sample_xi(w: float, cap: int, rng, max_steps: int = 2**62):
    """One draw of ``xi`` and whether it hit the cap.

    ``xi`` counts activated frogs in the symmetric one-dimensional frog
    model with survival ``1 - w`` started from two active frogs at 0.
    """
    x = int(sample_xi_batch(w, 1, rng, cap, max_steps)[0])
    return x, x >= cap


def estimate_mu_1d_projected(alpha: float, w: float, theta: float, trials: int, cap: int,
                             rng) -> MuEstimate:
    """``mu_exact_1d`` at the sample mean of ``xi``, with its 95% interval."""
    if not theta > 0:
        raise ValueError("theta must be > 0")
    xi = sample_xi_batch(w, trials, rng, cap)
    return _mu_from_xi(alpha, theta, xi, cap)


def _mu_from_xi(alpha, theta, xi, cap) -> MuEstimate:
    m = xi.mean()
    se = xi.std(ddof=1) / math.sqrt(len(xi)) if len(xi) > 1 else 0.0
    f = mu_exact_1d(alpha, theta, 1.0)
    hit = float((xi >= cap).mean())
    return MuEstimate(theta, f * m, f * (m - Z95 * se), f * (m + Z95 * se), len(xi),
                      0.0, hit, hit > 0.01)


# ----------------------------------------------------------------------------
# the line-based construction


def _line_margin(alpha: float) -> int:
    rho = (1 - alpha) / (1 + alpha)
    if rho <= 0:
        return 1
    if rho >= 1:
        return K_MAX
    return int(min(K_MAX, math.ceil(math.log(1e-8) / math.log(rho)) + 1))


def line_occupancy(d: int, w: float, alpha: float, i: int, trials: int, rng,
                   k_max: int = K_MAX, max_steps: int = 10**6):
    """Per-walk counts ``N_{k,i}``, ``|k| <= k_max``: distinct sites of
    ``H_k`` off the line ``L_0`` visited by a walk from ``i e_1``.

    Returns ``(counts[trials, 2 k_max + 1], n_capped)``.
    """
    k = TransitionKernel(d, w, alpha)
    return _engine.offline_counts_batch(np.uint64(as_stream(rng).key()), k.thresholds(),
                                        k.step_vectors(), np.int64(i), np.int64(k_max),
                                        np.int64(_line_margin(alpha)), np.int64(max_steps),
                                        np.int64(trials))


def entrance_exit_times(d: int, w: float, alpha: float, rng, k_max: int = K_MAX,
                        max_steps: int = 10**6):
    """One walk from 0: ``(N_k, T_k, T'_k)`` with ``T_k`` the entrance time and
    ``T'_k`` the last exit time of ``H_k`` (-1 if never visited)."""
    k = TransitionKernel(d, w, alpha)
    counts, first, last, _ = _engine.offline_visit_counts(
        np.uint64(as_stream(rng).key()), k.thresholds(), k.step_vectors(), np.int64(0),
        np.int64(k_max), np.int64(_line_margin(alpha)), np.int64(max_steps))
    return counts, first, last


def line_reach(d: int, w: float, alpha: float, trials: int, rng, k_max: int = K_MAX,
               max_steps: int = 10**5) -> np.ndarray:
    """Indicators of ``0 ~> i e_1`` by frog paths through ``L_0``, ``|i| <= k_max``.

    Frogs sleep only on the e1-axis line; a frog is retired after
    ``max_steps`` steps or once it passes ``x_1 = k_max + 2 margin``.
    """
    margin = _line_margin(alpha)
    kernel = TransitionKernel(d, w, alpha)
    lat = (0,) * (d - 1)
    region = LatticeBox((-k_max,) + lat, (k_max + margin,) + lat)
    arena = LatticeBox((-k_max - 1,) + (-FAR,) * (d - 1), (k_max + 2 * margin,) + (FAR,) * (d - 1))
    config = FrogSystemConfig(kernel, arena, max_steps=max_steps, region=region)
    stream = as_stream(rng)
    out = np.zeros((trials, 2 * k_max + 1), dtype=bool)
    for t in range(trials):
        rec = _run(config, stream.child(t))
        out[t] = rec.first_visit.ravel()[: 2 * k_max + 1] >= 0
    return out


@dataclass
class LineSamples:
    """Independent samples behind the two factors of the line-based ``mu``."""

    d: int
    w: float
    alpha: float
    k_max: int
    counts: np.ndarray
    reach: np.ndarray
    n_capped: int
    decay: tuple = (math.inf, 0.0)  # (rate c, intercept b) with P(0 ~> -i) <= e^(b - c i)

    def factors(self, theta: float):
        ks = np.arange(-self.k_max, self.k_max + 1)
        wt = np.exp(-theta * ks)
        a = self.counts @ wt
        b = self.reach @ wt
        return a, b

    def tail_bound(self, theta: float):
        """Bounds on the parts of the two sums beyond ``|k|, |i| > k_max``.

        Expected visits to a hyperplane are at most ``1/(w alpha)``; the walk
        reaches ``H_-k`` w.p. ``rho^k``; ``P(0 ~> -i)`` is bounded by the
        fitted exponential decay of the one-dimensional model.
        """
        K = self.k_max
        if self.w == 1.0:
            a_tail = 0.0
        elif self.alpha == 0.0:
            return math.inf, math.inf
        else:
            rho = (1 - self.alpha) / (1 + self.alpha)
            right = math.exp(-theta * (K + 1)) / (1 - math.exp(-theta))
            r = rho * math.exp(theta)
            left = math.inf if r >= 1 else r ** (K + 1) / (1 - r)
            a_tail = (right + left) / (self.w * self.alpha)
        c, b0 = self.decay
        if c <= theta:
            b_left = math.inf
        elif math.isinf(c):
            b_left = 0.0
        else:
            g = math.exp(-(c - theta))
            b_left = math.exp(b0) * g ** (K + 1) / (1 - g)
        b_tail = math.exp(-theta * (K + 1)) / (1 - math.exp(-theta)) + b_left
        return a_tail, b_tail

    def estimate(self, theta: float) -> MuEstimate:
        a, b = self.factors(theta)
        ma, mb = a.mean(), b.mean()
        va = a.var(ddof=1) / len(a) if len(a) > 1 else 0.0
        vb = b.var(ddof=1) / len(b) if len(b) > 1 else 0.0
        mu = ma * mb
        se = math.sqrt(mb * mb * va + ma * ma * vb)
        at, bt = self.tail_bound(theta)
        mass = (ma + at) * (mb + bt) - mu
        if math.isnan(mass):
            mass = math.inf
        capf = self.n_capped / max(len(a), 1)
        return MuEstimate(theta, mu, max(mu - Z95 * se, 0.0), mu + Z95 * se, min(len(a), len(b)),
                          mass, capf, capf > 0.01)


def sample_lines(d: int, w: float, alpha: float, trials: int, rng, k_max: int = K_MAX,
                 decay: tuple = (math.inf, 0.0)) -> LineSamples:
    if d < 2:
        raise ValueError("the line construction needs d >= 2")
    stream = as_stream(rng)
    counts, capped = line_occupancy(d, w, alpha, 0, trials, stream.child(0), k_max)
    reach = line_reach(d, w, alpha, trials, stream.child(1), k_max)
    return LineSamples(d, w, alpha, k_max, counts, reach, int(capped), decay)


def _decay_of(alpha: float, trials: int, rng):
    """``(c, b)`` from the one-dimensional drifted frog model; ``c = 0`` if
    there is no drift."""
    if alpha == 0.0:
        return 0.0, 0.0
    est = reach_decay_estimate(OneDModel.drift(alpha), 8, trials, rng)
    if math.isinf(est.rate):
        return math.inf, 0.0
    return max(est.rate, 0.0), est.fit.intercept


def estimate_mu_lines(d: int, w: float, alpha: float, theta: float, trials: int,
                      truncation: int, rng, decay_trials: int = 20_000) -> MuEstimate:
    """Monte Carlo ``mu(theta) = sum_k E[N_k0] e^(-theta k) * sum_i e^(-theta i) P(0 ~> i e_1)``.

    The two factors come from independent samples and the interval uses the
    delta method.  ``theta`` must be below the fitted decay rate of
    ``P(0 ~> -i)``.
    """
    stream = as_stream(rng)
    decay = _decay_of(alpha, decay_trials, stream.child(2))
    if not 0 < theta < decay[0]:
        raise ValueError(f"theta={theta} is not below the fitted decay rate {decay[0]:.4g}")
    return sample_lines(d, w, alpha, trials, stream, truncation, decay).estimate(theta)


# ----------------------------------------------------------------------------
# martingale


def simulate_brw_martingale(offspring: OffspringModel, theta: float, generations: int,
                            population_cap: int, rng, mu: Optional[float] = None):
    """One run of the branching random walk from a particle at 0.

    Returns ``(M, at_origin, truncated)`` where ``M[n] = mu^-n sum_i
    exp(-theta X_n^i)`` and ``at_origin[n]`` counts generation-n particles
    at 0.  ``mu`` defaults to the exact value for the deterministic model
    and must be supplied otherwise.
    """
    if offspring.variant == "line-based":
        raise ValueError("martingale runs use the xi-1d or deterministic offspring")
    if mu is None:
        if offspring.variant != "deterministic":
            raise ValueError("supply a point estimate of mu")
        mu = math.exp(-theta * offspring.displacement)
    stream = as_stream(rng)
    gen = stream.child(0).generator()
    pos = np.zeros(1, dtype=np.int64)
    M = np.full(generations + 1, np.nan)
    origin = np.zeros(generations + 1, dtype=np.int64)
    M[0], origin[0] = 1.0, 1
    truncated = False
    for n in range(1, generations + 1):
        if offspring.variant == "deterministic":
            pos = pos + offspring.displacement
        else:
            xi = sample_xi_batch(offspring.w, len(pos), stream.child(1, n), offspring.cap)
            pos = np.repeat(pos, xi)
            up = gen.random(len(pos)) < (1 + offspring.alpha) / 2
            pos = pos + np.where(up, 1, -1)
        if len(pos) > population_cap:
            truncated = True
            break
        M[n] = np.exp(-theta * pos).sum() / mu ** n
        origin[n] = int((pos == 0).sum())
    return M, origin, truncated


# ----------------------------------------------------------------------------
# certificates


def _golden_min(f, lo: float, hi: float, tol: float = 1e-3) -> float:
    a, b = lo, hi
    c = b - GOLDEN_RATIO * (b - a)
    d = a + GOLDEN_RATIO * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN_RATIO * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN_RATIO * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


FALLBACK_THETAS = tuple(np.round(np.linspace(0.1, 1.0, 10), 2))


def _verdict(e: MuEstimate) -> str:
    ok = e.ci_high < 1.0 and e.truncated_mass < MASS_LIMIT and not e.flagged
    return "certified-evidence" if ok else "inconclusive"


def _certify_projected(w, alpha, budget, stream, theta_hi):
    pilot = sample_xi_batch(w, max(budget // 5, 100), stream.child(10))
    searched = []
    if theta_hi <= 0:
        final = sample_xi_batch(w, budget, stream.child(11))
        for t in FALLBACK_THETAS:
            searched.append(_mu_from_xi(alpha, t, final, XI_CAP))
        return min(searched, key=lambda e: e.ci_high), searched, "no admissible tilt range"
    m = pilot.mean()
    th = _golden_min(lambda t: mu_exact_1d(alpha, t, m), 1e-6, theta_hi)
    final = sample_xi_batch(w, budget, stream.child(11))
    est = _mu_from_xi(alpha, th, final, XI_CAP)
    return est, [est], ""


def _certify_lines(d, w, alpha, budget, stream, decay, theta_hi):
    pilot = sample_lines(d, w, alpha, max(budget // 5, 50), stream.child(20), K_MAX, decay)
    if theta_hi <= 0:
        searched = [pilot.estimate(t) for t in FALLBACK_THETAS]
        return min(searched, key=lambda e: e.ci_high), searched, "no admissible tilt range"
    th = _golden_min(lambda t: pilot.estimate(t).ci_high, 1e-3, theta_hi)
    final = sample_lines(d, w, alpha, budget, stream.child(21), K_MAX, decay)
    est = final.estimate(th)
    return est, [est], ""


def certify_transience(d: int, w: float, alpha: float, strategy: str = "auto",
                       budget: int = 20_000, rng=0, decay_trials: int = 20_000
                       ) -> TransienceCertificate:
    """Search a tilt ``theta`` and test ``mu(theta) < 1``.

    ``theta`` is chosen by golden-section minimisation of a pilot estimate
    over ``(0, 0.9 c)``, ``c`` being the fitted decay rate of the drifted
    one-dimensional frog model (capped by the hyperplane rate
    ``log((1+alpha)/(1-alpha))``), and ``mu`` is then re-estimated on a fresh
    sample of size ``budget``.  Without an admissible range a fixed grid of
    tilts is evaluated and the verdict is inconclusive.  ``auto`` uses the
    one-dimensional projection in d = 2 and falls back to the lines when
    there is drift.
    """
    if strategy not in ("auto", "lines", "projected-1d"):
        raise ValueError(f"unknown strategy {strategy!r}")
    if strategy == "projected-1d" and d != 2:
        raise ValueError("the one-dimensional projection is for d = 2")
    TransitionKernel(d, w, alpha)  # validates the parameters
    stream = as_stream(rng)
    if strategy in ("auto", "projected-1d") and d == 2:
        cap_rate = math.inf if alpha == 1.0 else (0.0 if alpha == 0.0 else
                                                  math.log((1 + alpha) / (1 - alpha)))
        # for the projection mu is explicit in theta; its minimiser is the hyperplane rate / 2
        theta_hi = 0.0 if alpha == 0.0 else min(0.9 * cap_rate, 10.0)
        if w == 0.0:
            return TransienceCertificate(d, w, alpha, "projected-1d", None, "inconclusive",
                                         stream.root_seed, [], "xi is infinite at w = 0")
        est, searched, note = _certify_projected(w, alpha, budget, stream, theta_hi)
        cert = TransienceCertificate(d, w, alpha, "projected-1d", est, _verdict(est),
                                     stream.root_seed, searched, note)
        if strategy == "projected-1d" or cert.verdict == "certified-evidence" or alpha == 0.0:
            return cert
    if alpha == 0.0:
        return TransienceCertificate(d, w, alpha, "lines", None, "inconclusive",
                                     stream.root_seed, [], "no admissible tilt range")
    decay = _decay_of(alpha, decay_trials, stream.child(30))
    hyper = math.inf if alpha == 1.0 else (0.0 if alpha == 0.0 else
                                           math.log((1 + alpha) / (1 - alpha)))
    theta_hi = min(0.9 * decay[0], 0.9 * hyper, 10.0)
    est, searched, note = _certify_lines(d, w, alpha, budget, stream, decay, theta_hi)
    return TransienceCertificate(d, w, alpha, "lines", est, _verdict(est), stream.root_seed,
                                 searched, note)
