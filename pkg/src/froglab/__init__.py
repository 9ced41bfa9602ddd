"""Simulation and certification tools for the frog model with drift on Z^d."""
from .lattice import (LatticeBox, TransitionKernel, exact_hit_solver, hyperplane_hit_exact,
                      kernel_probability, mc_hit_estimate, sample_step, walk_path)
from .rng import RngStream

__version__ = "0.1.0"
