"""Site percolation and the spanning-curve estimate of p_c.

Every site is open independently.  For each field we record the smallest
p at which an open cluster crosses the box; the spanning probability of
several box sizes then crosses near p_c.
"""
import numpy as np

from froglab import LatticeBox, RngStream
from froglab.percolation import estimate_pc, explore_cluster, sample_field, spanning_thresholds

f = sample_field(2, 0.65, LatticeBox.cube(2, 20), RngStream(1))
c = explore_cluster(f, (0, 0))
print(f"cluster of the origin at p = 0.65 in a 41 x 41 box: {c.size} sites")

for L in (16, 32, 64):
    th = spanning_thresholds(2, L, 200, RngStream(2, (L,)))
    curve = [(th < p).mean() for p in (0.55, 0.59, 0.63)]
    print(f"L = {L:3d}: spanning probability at 0.55 / 0.59 / 0.63 = "
          + " / ".join(f"{x:.2f}" for x in curve))

for d, sizes, trials in ((2, (32, 64, 128), 100), (3, (16, 32), 60)):
    est = estimate_pc(d, sizes, trials, RngStream(3, (d,)))
    print(f"d = {d}: p_c estimate {est.estimate:.4f}, bracket "
          f"[{est.bracket[0]:.3f}, {est.bracket[1]:.3f}], flagged {est.flagged}")
