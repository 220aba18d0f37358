"""Atoms of the predual and finite atomic functionals.

An atom at side ``eps`` is a function ``g`` carried by a capped cube family
``F``: it vanishes off ``UF``, is bounded by ``eps**(d-1)/|Q| = 1/eps`` on
every cube and has zero mean on every cube.  Because of the zero means,
``int f g = sum_Q int_Q (f - f_Q) g``, so a single atom never pairs to more
than the family value of ``f`` on its own family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import oscillation
from .errors import ArgumentError, FamilyError, ShapeError
from .grid import GridFunction
from .oscillation import CubeFamily, lattice_refinement


def _blocks(F: CubeFamily, n: int):
    """Index slices of every cube of ``F`` on the ``n``-grid (cubes must be cell unions)."""
    out = []
    for Q in F.cubes:
        form = Q.lattice_form(n)
        if form is None:
            raise ShapeError(f"cube {Q.anchor} (side {Q.side}) is not a union of cells of the {n}-grid")
        m, off = form
        out.append(tuple(slice(o, o + m) for o in off))
    return out


def atom_bound(F: CubeFamily) -> float:
    """Pointwise bound ``eps**(d-1)/|Q|`` shared by all cubes of ``F``."""
    return F.side ** (F.d - 1) / F.cubes[0].volume


@dataclass(frozen=True, eq=False)
class Atom:
    """A cube family and a grid function on a grid where every cube is a cell union."""

    family: CubeFamily
    values: GridFunction

    def __post_init__(self):
        if not self.family.constrained:
            raise FamilyError("atoms need a family that respects the cardinality cap")
        if self.family.cubes:
            if self.family.d != self.values.d:
                raise ShapeError("family and values differ in dimension")
            _blocks(self.family, self.values.n)

    @property
    def epsilon(self) -> float:
        return self.family.side


@dataclass(frozen=True)
class AtomReport:
    """Outcome of :func:`validate_atom`; violations are excesses over the allowed values."""

    valid: bool
    support_violation: float
    bound_violation: float
    mean_violation: float
    worst_cube: int | None
    messages: tuple = ()


def validate_atom(a: Atom, tol: float = 1e-12) -> AtomReport:
    """Check support, the pointwise bound and the per-cube means of ``a``.

    The bound may be exceeded by ``tol``; ``|int_Q g|`` may reach ``tol * |Q|``.
    ``worst_cube`` indexes the cube with the largest bound or mean excess.
    """
    g = a.values.values
    F = a.family
    if not F.cubes:
        off = float(np.max(np.abs(g)))
        ok = off <= tol
        msgs = () if ok else (f"empty family but max |g| = {off:.3e}",)
        return AtomReport(ok, off, 0.0, 0.0, None, msgs)
    blocks = _blocks(F, a.values.n)
    inside = np.zeros(g.shape, dtype=bool)
    for sl in blocks:
        inside[sl] = True
    outside = np.abs(g[~inside])
    support = float(outside.max()) if outside.size else 0.0

    bound = atom_bound(F)
    cell = a.values.cell_volume
    worst, worst_excess = None, 0.0
    bound_excess, mean_excess = 0.0, 0.0
    for j, sl in enumerate(blocks):
        block = g[sl]
        b = float(np.max(np.abs(block))) - bound
        # |int_Q g| / |Q| against tol
        mu = abs(math.fsum(block.reshape(-1))) * cell / F.cubes[j].volume
        bound_excess = max(bound_excess, b)
        mean_excess = max(mean_excess, mu)
        excess = max(b - tol, mu - tol)
        if excess > worst_excess:
            worst, worst_excess = j, excess

    msgs = []
    if support > tol:
        msgs.append(f"support: max |g| off the family = {support:.3e}")
    if bound_excess > tol:
        msgs.append(f"bound: max |g| exceeds {bound:.6g} by {bound_excess:.3e}")
    if mean_excess > tol:
        msgs.append(f"mean: largest |int_Q g|/|Q| = {mean_excess:.3e}")
    return AtomReport(not msgs, support, max(bound_excess, 0.0), mean_excess, worst, tuple(msgs))


def make_atom(F: CubeFamily, raw: GridFunction) -> Atom:
    """Project ``raw`` onto the atoms of ``F``.

    ``raw`` is restricted to ``UF``, made mean-zero on every cube, and the
    whole result is scaled by the largest ``sigma <= 1`` that respects the
    pointwise bound.  Cubes on which ``raw`` already has zero mean are left
    untouched, so valid input comes back unchanged.  ``raw`` is refined when
    a cube does not follow its cell lines.
    """
    if not F.constrained:
        raise FamilyError("atoms need a family that respects the cardinality cap")
    if F.cubes and F.d != raw.d:
        raise ShapeError(f"family dimension {F.d} does not match grid dimension {raw.d}")
    if not F.cubes:
        return Atom(F, GridFunction(np.zeros_like(raw.values)))
    fine = raw.upsample(lattice_refinement(F, raw.n))
    src = fine.values
    g = np.zeros_like(src)
    for sl in _blocks(F, fine.n):
        block = src[sl]
        mean = math.fsum(block.reshape(-1)) / block.size
        g[sl] = block if mean == 0.0 else block - mean
    top = float(np.max(np.abs(g)))
    bound = atom_bound(F)
    if top > bound:
        g = g * (bound / top)
    return Atom(F, GridFunction(g))


def _common_grid(f: GridFunction, a: Atom):
    """``f`` and the atom values on one grid (the finer, which must refine the coarser)."""
    g = a.values
    if f.d != g.d:
        raise ShapeError(f"dimension mismatch: f has d={f.d}, atom has d={g.d}")
    if g.n % f.n == 0:
        return f.upsample(g.n // f.n), g
    if f.n % g.n == 0:
        return f, g.upsample(f.n // g.n)
    raise ShapeError(f"grids n={f.n} and n={g.n} do not refine one another")


def pair(f: GridFunction, a: Atom) -> float:
    """``int f g`` for the atom ``a = (F, g)``, evaluated as ``sum_Q int_Q (f - f_Q) g``.

    Centring ``f`` on each cube removes constants before any product is
    formed, so adding a constant to ``f`` changes the result only at the
    round-off level.
    """
    fv, gv = _common_grid(f, a)
    if not a.family.cubes:
        return 0.0
    cell = fv.cell_volume
    terms = []
    for sl in _blocks(a.family, fv.n):
        fb = fv.values[sl]
        dev = fb - fb.flat[0]
        dev = dev - dev.mean()
        terms.append(math.fsum((dev * gv.values[sl]).reshape(-1)))
    return math.fsum(terms) * cell


@dataclass(frozen=True)
class AtomicFunctional:
    """Finite combination ``sum lambda_j g_j``.

    ``tail_l1`` is the l1 mass of coefficients dropped when a longer series
    was truncated; it bounds the norm of the omitted part.
    """

    terms: tuple = ()
    tail_l1: float = 0.0

    def __post_init__(self):
        terms = tuple((float(lam), atom) for lam, atom in self.terms)
        for _, atom in terms:
            if not isinstance(atom, Atom):
                raise ArgumentError("functional terms must be (lambda, Atom) pairs")
        object.__setattr__(self, "terms", terms)

    @property
    def l1(self) -> float:
        return math.fsum(abs(lam) for lam, _ in self.terms)

    def __add__(self, other: "AtomicFunctional") -> "AtomicFunctional":
        return AtomicFunctional(self.terms + other.terms, self.tail_l1 + other.tail_l1)

    def scaled(self, c: float) -> "AtomicFunctional":
        return AtomicFunctional(tuple((c * lam, a) for lam, a in self.terms), abs(c) * self.tail_l1)

    def truncate(self, k: int) -> "AtomicFunctional":
        """Keep the first ``k`` terms and move the rest into ``tail_l1``."""
        dropped = math.fsum(abs(lam) for lam, _ in self.terms[k:])
        return AtomicFunctional(self.terms[:k], self.tail_l1 + dropped)


def functional_value(f: GridFunction, phi: AtomicFunctional) -> float:
    """``sum lambda_j pair(f, g_j)`` in term order."""
    return math.fsum(lam * pair(f, a) for lam, a in phi.terms)


def _functional_grid(phi: AtomicFunctional) -> tuple:
    d = phi.terms[0][1].values.d
    n = math.lcm(*(a.values.n for _, a in phi.terms))
    return d, n


def default_probes(phi: AtomicFunctional, seed: int = 0, n_random: int = 4) -> list:
    """Sign patterns of every atom and of the whole combination, random grids, indicators.

    All probes live on the finest grid among the atoms.
    """
    if not phi.terms:
        raise ArgumentError("cannot build probes for an empty functional")
    d, n = _functional_grid(phi)
    probes = []
    total = np.zeros((n,) * d)
    for lam, a in phi.terms:
        g = a.values.upsample(n // a.values.n).values
        total += lam * g
        if np.any(g):
            probes.append(GridFunction(np.sign(g)))
    if np.any(total):
        probes.append(GridFunction(np.sign(total)))
    rng = np.random.default_rng(seed)
    probes.extend(GridFunction(rng.random((n,) * d)) for _ in range(n_random))
    for _, a in phi.terms:
        for Q in a.family.cubes[:1]:
            m, off = Q.lattice_form(n)
            v = np.zeros((n,) * d)
            v[tuple(slice(o, o + m) for o in off)] = 1.0
            probes.append(GridFunction(v))
    return probes


def empirical_functional_norm(phi: AtomicFunctional, probes=None, mode: str = "exact",
                              s: int = oscillation.DEFAULT_S, threads: int | None = None) -> float:
    """``max |phi(f)| / ||f||_B`` over the probes with nonzero B-norm.

    A lower bound for the dual norm of ``phi``; probes with vanishing norm
    are skipped.  ``probes=None`` uses :func:`default_probes`.
    """
    if probes is None:
        if not phi.terms:
            return 0.0
        probes = default_probes(phi)
    probes = list(probes)
    if not probes:
        raise ArgumentError("empirical_functional_norm needs at least one probe")
    best = 0.0
    for f in probes:
        if not phi.terms:
            break
        norm, _ = oscillation.b_norm(f, mode, s, threads)
        if norm > 0:
            best = max(best, abs(functional_value(f, phi)) / norm)
    return best
