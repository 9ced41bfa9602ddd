"""Statistical transience certificates.

The drifted frog model is dominated by a branching random walk.  If its
tilted mean mu(theta) is below 1 for some theta > 0 the walk, and hence
the frog model, visits the origin finitely often.  We estimate mu and ask
whether the upper end of its 95% interval is below 1.  This is evidence,
not a proof.
"""
import math

from froglab import RngStream
from froglab.brw import (OffspringModel, certify_transience, mu_exact_1d, reference_brw_boundary,
                         sample_xi_batch, simulate_brw_martingale)

for w, alpha in [(0.95, 0.95), (0.9, 0.9), (0.7, 0.5), (0.8, 0.0)]:
    c = certify_transience(2, w, alpha, budget=20_000, rng=RngStream(1))
    e = c.estimate
    tail = "" if e is None else f" mu_hat {e.mu_hat:.3f} CI [{e.ci_low:.3f}, {e.ci_high:.3f}]"
    print(f"w={w}, alpha={alpha}: {c.verdict} via {c.strategy}{tail} "
          f"(reference g(alpha) = {reference_brw_boundary(alpha):.3f})")

# the normalised sum M_n keeps mean one
w, alpha, theta = 0.95, 0.6, 0.3
mu = mu_exact_1d(alpha, theta, sample_xi_batch(w, 10**5, RngStream(2)).mean())
off = OffspringModel("xi-1d", w=w, alpha=alpha)
runs = [simulate_brw_martingale(off, theta, 5, 10**6, RngStream(3, (r,)), mu)[0]
        for r in range(2000)]
print("\nmean of M_n over 2000 runs:", [round(float(sum(r[n] for r in runs)) / 2000, 3)
                                        for n in range(6)])

# with full drift the tilt log(2 E[xi]) gives mu = 1/2
m = sample_xi_batch(0.9, 10**5, RngStream(4)).mean()
print(f"alpha = 1, w = 0.9, E[xi] ~ {m:.3f}: mu = {mu_exact_1d(1.0, math.log(2 * m), m):.3f}")
