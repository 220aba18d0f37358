"""Random instances shared by the test modules."""

import numpy as np

from bbmspace import oscillation as osc
from bbmspace.atoms import AtomicFunctional, make_atom
from bbmspace.grid import GridFunction


def random_grid(rng, d, n, scale=1.0):
    return GridFunction(scale * rng.normal(size=(n,) * d))


def random_family(rng, d, n, s=2):
    """A valid capped family at a random lattice side, anchors on the ``eps/s`` lattice."""
    m = int(rng.integers(1, n + 1))
    level = osc.make_level(GridFunction(rng.random((n,) * d)), m, s)
    k = int(rng.integers(1, level.cap + 1))
    return level.family(osc.packing.greedy(level.weights, level.spp, k))


def random_atom(rng, d, n):
    F = random_family(rng, d, n)
    return make_atom(F, random_grid(rng, d, n, scale=float(rng.uniform(0.1, 50))))


def random_functional(rng, d, n, terms=None):
    terms = int(rng.integers(1, 5)) if terms is None else terms
    return AtomicFunctional(tuple((float(rng.normal()), random_atom(rng, d, n))
                                  for _ in range(terms)))
