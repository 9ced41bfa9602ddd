"""Splittable random streams.

Every random quantity in the package is derived from an :class:`RngStream`,
a ``(root_seed, path)`` pair.  Two kinds of generators hang off a stream:

* ``stream.generator()`` gives a :class:`numpy.random.Generator` for
  vectorised numpy work (fields, batched walks).
* ``stream.key()`` gives a 64-bit key for the compiled frog engine, which
  draws per-frog SplitMix64 sequences ``u(key, n)``.  A frog's trajectory is
  a pure function of its key, so it does not depend on the order in which
  frogs are processed, on the arena, or on how many steps are requested.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0


@dataclass(frozen=True)
class RngStream:
    """A named position in the stream tree.

    Parameters
    ----------
    root_seed : int
        64-bit experiment seed.
    path : tuple of int
        Non-negative integer path, e.g. ``(grid_index, trial)``.
    """

    root_seed: int
    path: tuple = field(default=())

    def __post_init__(self):
        if not 0 <= int(self.root_seed) < 2**64:
            raise ValueError("root_seed must fit in 64 unsigned bits")
        path = tuple(int(p) for p in self.path)
        if any(p < 0 for p in path):
            raise ValueError("stream path entries must be non-negative")
        object.__setattr__(self, "path", path)

    def child(self, *ids: int) -> "RngStream":
        return RngStream(self.root_seed, self.path + tuple(ids))

    def seed_sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(int(self.root_seed), spawn_key=self.path)

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.seed_sequence()))

    def key(self) -> int:
        return int(self.seed_sequence().generate_state(1, np.uint64)[0])


def as_generator(rng) -> np.random.Generator:
    """Accept an RngStream, a Generator or an int seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng)).generator()
    raise TypeError(f"cannot build a generator from {type(rng).__name__}")


def as_stream(rng) -> RngStream:
    if isinstance(rng, RngStream):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng))
    if isinstance(rng, np.random.Generator):
        # one draw from the generator seeds a fresh stream tree
        return RngStream(int(rng.integers(0, 2**63)))
    raise TypeError(f"cannot build a stream from {type(rng).__name__}")


@numba.njit(cache=True, inline="always")
def mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True, inline="always")
def counter_uniform(key, n):
    """n-th uniform in [0, 1) of the SplitMix64 sequence seeded by ``key``."""
    z = mix64(key + np.uint64(n + 1) * GOLDEN)
    return np.float64(z >> np.uint64(11)) * _INV53


@numba.njit(cache=True)
def site_key(run_key, coords, k):
    """Key of the k-th frog initially at ``coords``."""
    h = mix64(run_key ^ np.uint64(0x5851F42D4C957F2D))
    for c in coords:
        h = mix64(h ^ (np.uint64(np.int64(c) & np.int64(0x7FFFFFFFFFFFFFFF)) + GOLDEN))
    return mix64(h + np.uint64(k) * _M2)


def frog_key(run_key: int, site, k: int = 0) -> int:
    return int(site_key(np.uint64(run_key), np.asarray(site, dtype=np.int64), k))
