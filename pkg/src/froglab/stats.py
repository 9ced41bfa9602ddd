"""Small statistical helpers shared by the estimators."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

Z95 = float(stats.norm.ppf(0.975))


def mean_ci(x, level: float = 0.95):
    """Sample mean, standard error and normal-approximation interval."""
    x = np.asarray(x, dtype=float)
    n = x.size
    m = float(x.mean())
    se = float(x.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    z = float(stats.norm.ppf(0.5 + level / 2))
    return m, se, (m - z * se, m + z * se)


def wilson_interval(successes: int, n: int, level: float = 0.95):
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        return 0.0, 1.0
    z = float(stats.norm.ppf(0.5 + level / 2))
    ph = successes / n
    den = 1 + z * z / n
    centre = (ph + z * z / (2 * n)) / den
    half = z * np.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n)) / den
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass(frozen=True)
class LogLinearFit:
    slope: float
    intercept: float
    r2: float
    n_points: int


def log_linear_fit(n, y) -> LogLinearFit:
    """Least-squares fit of ``log y = intercept + slope * n`` over ``y > 0``."""
    n = np.asarray(n, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = y > 0
    if ok.sum() < 2:
        return LogLinearFit(float("nan"), float("nan"), float("nan"), int(ok.sum()))
    r = stats.linregress(n[ok], np.log(y[ok]))
    return LogLinearFit(float(r.slope), float(r.intercept), float(r.rvalue ** 2), int(ok.sum()))
