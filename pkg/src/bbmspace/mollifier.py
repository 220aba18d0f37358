"""Shrink-then-mollify approximation of grid functions.

For ``0 < t < 1/2`` the pullback ``g(x) = f((1-2t)x + t*1)`` is defined on
``(-t, 1+t)^d``; it is smoothed with ``phi_t(y) = t**-d * psi(y/t)`` for the
tensor tent ``psi(y) = prod (1 - |y_k|)_+`` and rescaled by ``(1-2t)**(d-1)``.
The result is smooth at scale ``t`` and its brackets are controlled by those
of ``f`` at the shrunken side ``(1-2t)*eps``.

Everything here is separable: the affine map, the kernel, and the grid cells
are products over axes, so each operator is a 1-D ``n x n`` matrix applied
along every axis.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import oscillation
from .errors import ArgumentError, DomainError
from .grid import GridFunction, as_fraction

KERNELS = ("tent",)
QUADRATURES = ("exact", "midpoint")


@dataclass(frozen=True)
class MollifierParams:
    """``t`` in (0, 1/2), the kernel profile, and the midpoint-rule oversampling."""

    t: float
    kernel: str = "tent"
    supersample: int = 4
    quadrature: str = "exact"

    def __post_init__(self):
        if not (0.0 < self.t < 0.5):
            raise DomainError(f"t must lie in (0, 1/2), got {self.t}")
        if self.kernel not in KERNELS:
            raise DomainError(f"unknown kernel {self.kernel!r}; available: {KERNELS}")
        if self.supersample < 1:
            raise DomainError("supersample must be >= 1")
        if self.quadrature not in QUADRATURES:
            raise DomainError(f"unknown quadrature {self.quadrature!r}")


@dataclass(frozen=True, eq=False)
class RescaledGrid(GridFunction):
    """Cell averages of ``f((1-2t)x + t)`` that remember ``f`` and ``t``.

    The grid values cover ``(0, 1)^d`` only; :func:`mollify` needs the
    pullback on ``(-t, 1+t)^d`` and rebuilds it from ``source``.
    """

    source: GridFunction = None
    t: float = 0.0


# --- 1-D tent profile -------------------------------------------------------

def tent(u):
    return np.clip(1.0 - np.abs(u), 0.0, None)


def tent_cdf(u):
    u = np.asarray(u, dtype=np.float64)
    return np.where(u <= -1, 0.0,
           np.where(u <= 0, 0.5 * (1 + u) ** 2,
           np.where(u <= 1, 1 - 0.5 * (1 - u) ** 2, 1.0)))


def tent_cdf_antiderivative(u):
    """``int_{-inf}^u P`` where ``P`` is :func:`tent_cdf`."""
    u = np.asarray(u, dtype=np.float64)
    return np.where(u <= -1, 0.0,
           np.where(u <= 0, (1 + u) ** 3 / 6,
           np.where(u <= 1, u + (1 - u) ** 3 / 6, u)))


# --- 1-D operators ----------------------------------------------------------

def _check_t(t):
    if not (0.0 < t < 0.5):
        raise DomainError(f"t must lie in (0, 1/2), got {t}")


def rescale_matrix(n: int, t: float) -> np.ndarray:
    """``A[i, c]``: fraction of the image of cell ``i`` under ``x -> (1-2t)x + t`` in cell ``c``."""
    r = 1.0 - 2.0 * t
    i = np.arange(n)
    lo = r * i / n + t
    hi = r * (i + 1) / n + t
    edges = np.arange(n + 1) / n
    ov = np.minimum(hi[:, None], edges[None, 1:]) - np.maximum(lo[:, None], edges[None, :-1])
    return np.clip(ov, 0.0, None) / (r / n)


def _pullback_edges(n: int, t: float):
    # source cell c pulls back to [alpha_c, beta_c] in the shrunken variable
    r = 1.0 - 2.0 * t
    c = np.arange(n)
    return (c / n - t) / r, ((c + 1) / n - t) / r


def mollify_matrix(n: int, t: float) -> np.ndarray:
    """``K[i, c]``: exact cell-``i`` average of ``phi_t * g`` when ``f`` is the indicator of cell ``c``.

    With ``Phi`` the kernel CDF and ``Phi2`` its antiderivative,
    ``(phi_t * 1_[a,b])(x) = Phi(x - a) - Phi(x - b)``, whose average over a
    cell is a second difference of ``Phi2``.
    """
    h = 1.0 / n
    alpha, beta = _pullback_edges(n, t)
    x0 = np.arange(n)[:, None] * h
    x1 = x0 + h

    def Phi2(z):
        return t * tent_cdf_antiderivative(z / t)

    K = (Phi2(x1 - alpha) - Phi2(x0 - alpha) - Phi2(x1 - beta) + Phi2(x0 - beta)) / h
    # second differences can leave -1e-17 residue where the exact value is 0
    K[np.abs(K) < 1e-15] = 0.0
    return K


def mollify_matrix_midpoint(n: int, t: float, supersample: int) -> np.ndarray:
    """Midpoint-rule counterpart of :func:`mollify_matrix`.

    ``supersample`` nodes per cell in ``x`` and a lattice of spacing
    ``1/(n * supersample)`` (refined to put at least 8 nodes on each side of
    the kernel) in ``y``; each pulled-back point ``(1-2t)(x-y)+t`` is binned
    into its source cell.
    """
    S = supersample
    h = 1.0 / n
    q = max(int(np.ceil(2 * t * n * S)), 16)
    q += q % 2
    dy = 2 * t / q
    y = -t + (np.arange(q) + 0.5) * dy
    wy = tent(y / t) / t * dy
    xs = (np.arange(n)[:, None] + (np.arange(S)[None, :] + 0.5) / S) * h
    u = (1 - 2 * t) * (xs[:, :, None] - y[None, None, :]) + t
    cell = np.clip(np.floor(u * n).astype(np.int64), 0, n - 1)
    K = np.zeros((n, n))
    rows = np.broadcast_to(np.arange(n)[:, None, None], cell.shape)
    np.add.at(K, (rows.reshape(-1), cell.reshape(-1)),
              np.broadcast_to(wy / S, cell.shape).reshape(-1))
    return K


def kernel_mass(params: MollifierParams, n: int) -> float:
    """Discrete mass of ``phi_t`` along one axis as seen by the chosen quadrature."""
    if params.quadrature == "exact":
        K = mollify_matrix(n, params.t)
    else:
        K = mollify_matrix_midpoint(n, params.t, params.supersample)
    return float(K.sum(axis=1).mean())


def apply_separable(values: np.ndarray, M: np.ndarray) -> np.ndarray:
    out = values
    for axis in range(values.ndim):
        out = np.moveaxis(np.tensordot(M, out, axes=(1, axis)), 0, axis)
    return out


# --- public operations ------------------------------------------------------

def rescale(f: GridFunction, t: float) -> RescaledGrid:
    """Exact cell averages of ``x -> f((1-2t)x + t*1)`` on the same grid."""
    _check_t(t)
    vals = apply_separable(f.values, rescale_matrix(f.n, t))
    return RescaledGrid(vals, source=f, t=float(t))


def mollify(g: GridFunction, params: MollifierParams) -> GridFunction:
    """Cell averages of ``phi_t * g`` for a pullback ``g`` produced by :func:`rescale`."""
    if not isinstance(g, RescaledGrid):
        raise ArgumentError("mollify needs the pullback on (-t, 1+t)^d; pass rescale(f, t)")
    if g.t != params.t:
        raise ArgumentError(f"g was rescaled with t={g.t} but params.t={params.t}")
    f = g.source
    if params.quadrature == "exact":
        K = mollify_matrix(f.n, params.t)
    else:
        K = mollify_matrix_midpoint(f.n, params.t, params.supersample)
    return GridFunction(apply_separable(f.values, K))


def approximant(f: GridFunction, params: MollifierParams) -> GridFunction:
    """``(1-2t)**(d-1) * mollify(rescale(f, t))``."""
    h = mollify(rescale(f, params.t), params)
    return h * (1.0 - 2.0 * params.t) ** (f.d - 1)


def admissible_t(f: GridFunction, eps) -> list:
    """Every ``t`` in (0, 1/2) with ``(1-2t)*eps`` a positive multiple of ``1/n``."""
    m = oscillation.lattice_side(f, eps)
    return [Fraction(m - mp, 2 * m) for mp in range(m - 1, 0, -1)]


def bracket_transfer_check(f: GridFunction, t: float, eps, mode: str = "exact",
                           s: int = oscillation.DEFAULT_S, params: MollifierParams | None = None):
    """``([f_t]_eps, [f]_{(1-2t) eps})`` computed over matching candidate lattices.

    Both brackets use the same absolute anchor lattice (every node of the
    ``s``-refined grid), so the shrunken side is not penalised by a coarser
    anchor set.  The first value should not exceed the second beyond
    discretisation error.
    """
    _check_t(t)
    m = oscillation.lattice_side(f, eps)
    m_shrunk = (1 - 2 * as_fraction(t)) * m
    if m_shrunk.denominator != 1 or m_shrunk < 1:
        options = ", ".join(str(a) for a in admissible_t(f, eps)) or "none"
        raise ArgumentError(
            f"(1-2t)*eps is not a multiple of 1/{f.n} for t={t}, eps={eps}; admissible t: {options}"
        )
    if params is None:
        params = MollifierParams(float(t))
    elif params.t != float(t):
        raise ArgumentError(f"params.t={params.t} differs from t={t}")
    ft = approximant(f, params)
    lhs, _ = oscillation.bracket_epsilon(ft, Fraction(m, f.n), mode, s, lattice="absolute")
    rhs, _ = oscillation.bracket_epsilon(f, Fraction(int(m_shrunk), f.n), mode, s,
                                         lattice="absolute")
    return lhs, rhs
