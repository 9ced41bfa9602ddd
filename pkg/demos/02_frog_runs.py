"""Running the frog model and the recurrence proxy.

One active frog starts at the origin and every other site holds a sleeping
frog.  We run a few systems in a finite arena and then look at the
fraction of recurrence boxes whose origin gets revisited.
"""
import numpy as np

from froglab import LatticeBox, RngStream, TransitionKernel
from froglab.frogs import FrogSystemConfig, measure_shape_growth, recurrence_proxy, run_frog_model

arena = LatticeBox.cube(2, 40)
for w, alpha in [(0.5, 0.0), (0.5, 0.6), (0.95, 0.95)]:
    cfg = FrogSystemConfig(TransitionKernel(2, w, alpha), arena, max_steps=500)
    rec = run_frog_model(cfg, RngStream(3))
    print(f"w={w}, alpha={alpha}: {len(rec.activated)} sites woken, "
          f"{rec.origin_visit_count} visits to the origin")

print("\nrecurrence proxy (fraction of 16 boxes whose centre is revisited), 20 runs each")
for w, alpha in [(0.3, 0.1), (0.6, 0.5), (0.95, 0.95)]:
    cfg = FrogSystemConfig(TransitionKernel(2, w, alpha), LatticeBox.cube(2, 60), max_steps=2000)
    fr = [recurrence_proxy(cfg, 16, RngStream(4, (t,)))[0] for t in range(20)]
    print(f"  w={w}, alpha={alpha}: mean {np.mean(fr):.3f}")

# the radius of the visited region grows roughly linearly, its area quadratically
cfg = FrogSystemConfig(TransitionKernel(2, 0.5, 0.0), LatticeBox.cube(2, 80), max_steps=4000)
sizes = measure_shape_growth(cfg, 60, RngStream(5))
print("\nvisited sites at t = 10, 20, ..., 60:", [int(sizes[t]) for t in range(10, 61, 10)])
