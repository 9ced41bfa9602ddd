"""A drifted walk on Z and its chance of ever stepping to -n.

The walk moves right with probability (1 + alpha)/2.  The probability of
ever visiting -n is ((1 - alpha)/(1 + alpha))^n.  We compare this with
Monte Carlo and with the sparse linear solver on a finite box.
"""
from froglab import LatticeBox, RngStream, TransitionKernel
from froglab.lattice import exact_hit_solver, hyperplane_hit_exact, mc_hit_estimate

alpha = 1 / 3
kernel = TransitionKernel(1, 1.0, alpha)
print(f"alpha = {alpha:.3f}")
print(" n   exact      monte carlo (stderr)   solver on [-n, 60]")
for n in range(1, 7):
    # walks that drift past 60 almost never come back
    box = LatticeBox((-n,), (60,))
    est, se = mc_hit_estimate(kernel, (0,), [(-n,)], None, 50_000, RngStream(1, (n,)), box=box)
    solved = exact_hit_solver(kernel, (0,), [(-n,)], box)
    print(f"{n:2d}   {hyperplane_hit_exact(alpha, n):.6f}   {est:.6f} ({se:.6f})      {solved:.6f}")

# in two dimensions the solver handles a lateral component as well
k2 = TransitionKernel(2, 0.6, 0.3)
box = LatticeBox.cube(2, 25)
print("\nd = 2, w = 0.6, alpha = 0.3: P(hit origin from (-4, 2) before leaving the box)")
print("  solver      ", exact_hit_solver(k2, (-4, 2), [(0, 0)], box))
print("  monte carlo ", mc_hit_estimate(k2, (-4, 2), [(0, 0)], 10**6, 40_000, RngStream(2),
                                        box=box))
