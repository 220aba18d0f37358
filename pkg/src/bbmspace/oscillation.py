"""The bracket ``[f]_eps``, the B-norm, and the related BMO/BV functionals.

For a side ``eps = m/n`` the candidate cubes have anchors on the lattice of
step ``eps/s`` (``s`` = anchor refinement).  Refining the grid by ``s`` makes
every candidate a union of fine cells, so the candidate mean oscillations are
computed exactly from sliding windows of the refined grid.  Selecting a
family is then a packing problem solved by :mod:`bbmspace.packing`.

All values are lower bounds of the continuum quantities (the continuum sup
runs over every anchor and every side); for the modes ``"exact"`` and
``"bnb"`` they are optimal over the candidate set.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from itertools import product

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import packing
from .errors import ArgumentError, DomainError, FamilyError, ShapeError
from .grid import GEOM_TOL, Cube, GridFunction, as_fraction, mean_oscillation

MODES = ("exact", "bnb", "greedy")
DEFAULT_S = 2
# elements per chunk when materialising window deviations
_CHUNK_ELEMS = 1 << 22


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("BBM_THREADS", "1") or 1)
    if threads < 1:
        raise DomainError(f"threads must be >= 1, got {threads}")
    return threads


def _parallel_map(fn, items, threads):
    threads = resolve_threads(threads)
    if threads == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def max_family_cardinality(eps, d: int) -> int:
    """``floor(eps**(1-d))``: the largest admissible family size at side ``eps``."""
    q = as_fraction(eps)
    if not (0 < q <= 1):
        raise DomainError(f"eps must lie in (0, 1], got {eps}")
    if d < 1:
        raise DomainError(f"d must be >= 1, got {d}")
    return math.floor((1 / q) ** (d - 1))


def _check_disjoint(anchors: np.ndarray, side: float) -> None:
    k = anchors.shape[0]
    if k < 2:
        return
    order = np.argsort(anchors[:, 0], kind="stable")
    a = anchors[order]
    tol = GEOM_TOL
    for i in range(k - 1):
        j_end = np.searchsorted(a[:, 0], a[i, 0] + side - tol, side="left")
        if j_end <= i + 1:
            continue
        gap = np.abs(a[i + 1:j_end] - a[i])
        if np.any(np.all(gap < side - tol, axis=1)):
            raise FamilyError("cubes in a family must have pairwise disjoint interiors")


@dataclass(frozen=True)
class CubeFamily:
    """Equal-side cubes with pairwise disjoint interiors.

    When ``constrained`` the family also respects the cardinality cap
    ``floor(side**(1-d))``.
    """

    side: float
    cubes: tuple
    constrained: bool = True

    def __post_init__(self):
        cubes = tuple(self.cubes)
        object.__setattr__(self, "cubes", cubes)
        object.__setattr__(self, "side", float(self.side))
        if not cubes:
            return
        d = cubes[0].d
        for Q in cubes:
            if not isinstance(Q, Cube):
                raise FamilyError("family members must be Cube instances")
            if Q.d != d:
                raise FamilyError("all cubes in a family must share the dimension")
            if abs(Q.side - self.side) > GEOM_TOL:
                raise FamilyError(f"cube side {Q.side} differs from family side {self.side}")
        if self.constrained and len(cubes) > max_family_cardinality(self.side, d):
            raise FamilyError(
                f"{len(cubes)} cubes exceed the cap {max_family_cardinality(self.side, d)} "
                f"at side {self.side}, d={d}"
            )
        _check_disjoint(np.array([Q.anchor for Q in cubes]), self.side)

    @property
    def d(self):
        return self.cubes[0].d if self.cubes else None

    def __len__(self):
        return len(self.cubes)

    def anchors(self) -> list:
        return [list(Q.anchor) for Q in self.cubes]


def family_value(f: GridFunction, F: CubeFamily) -> float:
    """``eps**(d-1) * sum_{Q in F} M(f, Q)``."""
    if not F.cubes:
        return 0.0
    if F.d != f.d:
        raise ShapeError(f"family dimension {F.d} does not match grid dimension {f.d}")
    return F.side ** (f.d - 1) * math.fsum(mean_oscillation(f, Q) for Q in F.cubes)


def lattice_refinement(F: CubeFamily, n: int, max_factor: int = 64) -> int:
    """Smallest ``r`` such that every cube of ``F`` is a union of cells of the ``n*r`` grid."""
    for r in range(1, max_factor + 1):
        if all(Q.lattice_form(n * r) is not None for Q in F.cubes):
            return r
    raise FamilyError(f"family is not aligned with any refinement (<= {max_factor}) of the {n}-grid")


def family_operator(f: GridFunction, F: CubeFamily) -> GridFunction:
    """``eps**(d-1) / |Q| * sum_Q chi_Q (f - f_Q)`` as a grid function.

    The result lives on the coarsest refinement of ``f``'s grid on which every
    cube of ``F`` is a union of cells; its L1 norm equals ``family_value(f, F)``.
    """
    if not F.cubes:
        return GridFunction(np.zeros_like(f.values))
    if F.d != f.d:
        raise ShapeError(f"family dimension {F.d} does not match grid dimension {f.d}")
    r = lattice_refinement(F, f.n)
    fine = f.upsample(r)
    out = np.zeros_like(fine.values)
    scale = F.side ** (f.d - 1) / F.cubes[0].volume
    for Q in F.cubes:
        m, off = Q.lattice_form(fine.n)
        sl = tuple(slice(o, o + m) for o in off)
        block = fine.values[sl]
        out[sl] = scale * (block - block.mean())
    return GridFunction(out)


# --- candidate levels -------------------------------------------------------

def lattice_side(f: GridFunction, eps) -> int:
    """``m`` with ``eps = m/n``; raises if ``eps`` is not a grid side."""
    q = as_fraction(eps)
    if not (0 < q <= 1):
        raise DomainError(f"eps must lie in (0, 1], got {eps}")
    m = q * f.n
    if m.denominator != 1:
        raise ArgumentError(f"eps={eps} is not a multiple of 1/n for n={f.n}")
    return int(m)


LATTICES = ("relative", "absolute")


def anchor_layout(n: int, m: int, s: int, lattice: str = "relative"):
    """``(step, spp)``: anchor step in cells of the ``s``-refined grid and steps per side.

    ``"relative"`` anchors sit on the lattice of step ``eps/s``; ``"absolute"``
    anchors sit on every node of the ``s``-refined grid (step ``1/(n s)``),
    the same lattice for every side.
    """
    if lattice == "relative":
        return m, s
    if lattice == "absolute":
        return 1, m * s
    raise DomainError(f"unknown lattice {lattice!r}; expected one of {LATTICES}")


def candidate_count(n: int, m: int, s: int, lattice: str = "relative") -> int:
    """Anchor positions per axis for side ``m/n``."""
    step, _ = anchor_layout(n, m, s, lattice)
    return (n - m) * s // step + 1


def candidate_weights(fine: np.ndarray, m: int, s: int, step: int | None = None) -> np.ndarray:
    """Mean oscillation of every candidate cube on the ``s``-refined grid ``fine``.

    Candidates have side ``m*s`` fine cells and anchors every ``step`` fine
    cells (default ``m``, i.e. ``s`` anchors per side).
    """
    d = fine.ndim
    L = m * s
    step = m if step is None else step
    view = sliding_window_view(fine, (L,) * d)[(slice(None, None, step),) * d]
    R = view.shape[0]
    tail = tuple(range(d, 2 * d))
    per_row = max(1, _CHUNK_ELEMS // max(1, R ** (d - 1) * L**d))
    out = np.empty((R,) * d)
    for start in range(0, R, per_row):
        blk = view[start:start + per_row]
        # shift by the first window value: constant windows give exactly zero
        dev = blk - blk[(Ellipsis,) + (slice(0, 1),) * d]
        mean = dev.mean(axis=tail, keepdims=True)
        out[start:start + per_row] = np.abs(dev - mean).mean(axis=tail)
    return out


@dataclass
class Level:
    """Candidate set at one side ``eps = m/n``.

    Candidate ``i`` is the cube of side ``m/n`` anchored at ``i * step / (n s)``;
    ``spp`` anchor steps make up one side, so two candidates conflict iff
    ``|i_k - j_k| < spp`` on every axis.
    """

    m: int
    n: int
    s: int
    step: int
    d: int
    weights: np.ndarray
    cap: int | None

    @property
    def spp(self) -> int:
        return self.m * self.s // self.step

    @property
    def eps(self) -> float:
        return self.m / self.n

    @property
    def scale(self) -> float:
        return self.eps ** (self.d - 1)

    def cube(self, idx) -> Cube:
        unit = self.step / (self.n * self.s)
        return Cube(self.eps, tuple(i * unit for i in idx))

    def family(self, indices, constrained=True) -> CubeFamily:
        if not indices:
            # all weights vanish: any single cube is optimal
            indices = [(0,) * self.d]
        return CubeFamily(self.eps, tuple(self.cube(i) for i in indices), constrained)

    def value_of(self, indices) -> float:
        return self.scale * packing.selection_value(self.weights, indices)

    def upper_bound(self) -> float:
        return self.scale * packing.block_upper_bound(self.weights, self.spp, self.cap)


def make_level(f: GridFunction, m: int, s: int = DEFAULT_S, constrained=True,
               fine: np.ndarray | None = None, lattice: str = "relative") -> Level:
    if s < 1:
        raise DomainError(f"anchor refinement s must be >= 1, got {s}")
    if not 1 <= m <= f.n:
        raise DomainError(f"side index m must lie in 1..{f.n}, got m={m}")
    step, _ = anchor_layout(f.n, m, s, lattice)
    if fine is None:
        fine = f.upsample(s).values
    cap = max_family_cardinality(Fraction(m, f.n), f.d) if constrained else None
    return Level(m, f.n, s, step, f.d, candidate_weights(fine, m, s, step), cap)


def solve_level(level: Level, mode: str, bnb_limit: int = packing.DEFAULT_BNB_LIMIT) -> list:
    if mode == "greedy":
        return packing.greedy(level.weights, level.spp, level.cap)
    if mode == "bnb":
        return packing.branch_and_bound(level.weights, level.spp, level.cap, bnb_limit)
    if mode == "exact":
        if level.d == 1:
            return packing.interval_dp(level.weights, level.spp, level.cap)
        return packing.milp_packing(level.weights, level.spp, level.cap)
    raise DomainError(f"unknown mode {mode!r}; expected one of {MODES}")


def select_family(f: GridFunction, eps, mode: str = "exact", s: int = DEFAULT_S,
                  constrained: bool = True,
                  bnb_limit: int = packing.DEFAULT_BNB_LIMIT,
                  lattice: str = "relative") -> CubeFamily:
    """Best family of side ``eps`` over the candidate set (a lower bound in greedy mode)."""
    level = make_level(f, lattice_side(f, eps), s, constrained, lattice=lattice)
    return level.family(solve_level(level, mode, bnb_limit), constrained)


def bracket_epsilon(f: GridFunction, eps, mode: str = "exact", s: int = DEFAULT_S,
                    bnb_limit: int = packing.DEFAULT_BNB_LIMIT, lattice: str = "relative"):
    """``([f]_eps, witness)``; a certified lower bound of the continuum bracket."""
    F = select_family(f, eps, mode, s, bnb_limit=bnb_limit, lattice=lattice)
    return family_value(f, F), F


# --- sweeps over eps --------------------------------------------------------

@dataclass(frozen=True)
class CurveEntry:
    epsilon: float
    m: int
    value: float
    k: int | None
    witness: CubeFamily
    exact: bool


@dataclass(frozen=True)
class OscillationCurve:
    """Sampled map ``eps -> [f]_eps`` with witness families, ``eps`` descending.

    ``exact`` marks entries whose value is optimal over the candidate set;
    other entries are lower bounds that were proven not to affect the maximum.
    """

    entries: tuple

    @property
    def epsilons(self) -> np.ndarray:
        return np.array([e.epsilon for e in self.entries])

    @property
    def values(self) -> np.ndarray:
        return np.array([e.value for e in self.entries])

    def argmax(self) -> CurveEntry:
        """Entry with the largest value; ties go to the largest ``eps``."""
        best = self.entries[0]
        for e in self.entries[1:]:
            if e.value > best.value:
                best = e
        return best

    def max(self) -> float:
        return self.argmax().value if self.entries else 0.0


def sweep(f: GridFunction, ms, mode: str = "exact", s: int = DEFAULT_S,
          constrained: bool = True, threads: int | None = None,
          bnb_limit: int = packing.DEFAULT_BNB_LIMIT) -> OscillationCurve:
    """Brackets for every side ``m/n`` in ``ms`` with a certified maximum.

    Every level gets a greedy packing and a clique-partition upper bound.  In
    the modes ``"exact"`` and ``"bnb"`` levels are then solved optimally in
    order of decreasing upper bound until no remaining bound exceeds the best
    value found, so the curve maximum is optimal over the whole candidate set
    while levels that cannot matter keep their greedy value.
    """
    if mode not in MODES:
        raise DomainError(f"unknown mode {mode!r}; expected one of {MODES}")
    ms = sorted(set(int(m) for m in ms), reverse=True)
    if not ms:
        raise ArgumentError("no sides to sweep")
    fine = f.upsample(s).values

    def prepare(m):
        level = make_level(f, m, s, constrained, fine=fine)
        sel = packing.greedy(level.weights, level.spp, level.cap)
        return level, sel, level.value_of(sel), level.upper_bound()

    prepared = _parallel_map(prepare, ms, threads)
    selections = [p[1] for p in prepared]
    exact = [p[2] >= p[3] for p in prepared]
    if mode != "greedy":
        best = max(p[2] for p in prepared)
        order = sorted(range(len(ms)), key=lambda i: (-prepared[i][3], -ms[i]))
        for i in order:
            level, _, lower, upper = prepared[i]
            if upper <= best:
                break
            if exact[i]:
                continue
            selections[i] = solve_level(level, mode, bnb_limit)
            exact[i] = True
            best = max(best, level.value_of(selections[i]))

    entries = []
    for (level, *_), sel, ex in zip(prepared, selections, exact):
        F = level.family(sel, constrained)
        entries.append(CurveEntry(level.eps, level.m, family_value(f, F), level.cap, F, ex))
    return OscillationCurve(tuple(entries))


def b_norm(f: GridFunction, mode: str = "exact", s: int = DEFAULT_S,
           threads: int | None = None, bnb_limit: int = packing.DEFAULT_BNB_LIMIT):
    """``(||f||_B, curve)`` with the sup taken over the sides ``m/n``, ``1 <= m <= n``."""
    curve = sweep(f, range(1, f.n + 1), mode, s, True, threads, bnb_limit)
    return curve.max(), curve


def bmo_norm(f: GridFunction, s: int = DEFAULT_S, threads: int | None = None) -> float:
    """Largest mean oscillation over all candidate cubes of all sides ``m/n``."""
    fine = f.upsample(s).values
    tops = _parallel_map(lambda m: float(candidate_weights(fine, m, s).max()),
                         list(range(f.n, 0, -1)), threads)
    return max(tops)


def discrete_tv(f: GridFunction) -> float:
    """Anisotropic total variation: ``sum |jump| * face area`` over interior faces."""
    face = float(f.n) ** (1 - f.d)
    return face * math.fsum(
        math.fsum(np.abs(np.diff(f.values, axis=axis)).reshape(-1)) for axis in range(f.d)
    )


def bv_functional(f: GridFunction, s: int = DEFAULT_S, mode: str = "tiling",
                  threads: int | None = None) -> float:
    """Uncapped counterpart of the B-norm.

    ``mode="tiling"`` takes, for every side and every anchor shift on the
    ``eps/s`` lattice, the full tiling of the domain by candidate cubes.
    ``mode="exact"``/``"greedy"`` solve the uncapped packing over the whole
    candidate set instead.
    """
    if mode in MODES:
        return sweep(f, range(1, f.n + 1), mode, s, False, threads).max()
    if mode != "tiling":
        raise DomainError(f"unknown bv mode {mode!r}")
    fine = f.upsample(s).values

    def level_value(m):
        w = candidate_weights(fine, m, s)
        best = 0.0
        for off in product(range(s), repeat=f.d):
            tile = w[tuple(slice(o, None, s) for o in off)]
            best = max(best, math.fsum(tile.reshape(-1)))
        return (m / f.n) ** (f.d - 1) * best

    return max(_parallel_map(level_value, list(range(f.n, 0, -1)), threads))


# --- reference oracle -------------------------------------------------------

def oracle_family_value(f: GridFunction, eps, constrained: bool = True, s: int = DEFAULT_S,
                        limit: int = packing.DEFAULT_ORACLE_LIMIT, return_family: bool = False):
    """Exhaustive maximum over every disjoint subset of the lattice candidates.

    Independent of the solvers: cube weights come from the cell-intersection
    route of :func:`mean_oscillation` and conflicts from geometric overlap.
    """
    m = lattice_side(f, eps)
    R = candidate_count(f.n, m, s)
    if R**f.d > limit:
        raise packing.CapacityError(f"oracle limited to {limit} candidates, got {R ** f.d}")
    side = m / f.n
    step = m / (f.n * s)
    cubes = [Cube(side, tuple(i * step for i in idx)) for idx in np.ndindex((R,) * f.d)]
    weights = [mean_oscillation(f, Q) for Q in cubes]
    conflict = np.array([[P.interiors_overlap(Q) for Q in cubes] for P in cubes])
    cap = max_family_cardinality(Fraction(m, f.n), f.d) if constrained else None
    chosen = packing.exhaustive(weights, conflict, cap, limit)
    if not chosen:
        chosen = [0]
    F = CubeFamily(side, tuple(cubes[i] for i in sorted(chosen)), constrained)
    value = family_value(f, F)
    return (value, F) if return_family else value
