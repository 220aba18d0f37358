"""Two-sided estimates of the distance from ``f`` to the vanishing subspace.

The distance equals the small-scale limit of the brackets.  On a grid the
limit is represented by the largest bracket over the sides ``eps <= eps_cut``
(a lower proxy), and it is bounded above by the B-norm of ``f`` minus its
mollified approximants, which all belong to the subspace.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from . import oscillation
from .errors import ArgumentError, DomainError
from .grid import GridFunction, as_fraction
from .mollifier import MollifierParams, approximant

DEFAULT_EPS_CUT = 0.25
DEFAULT_T_GRID = (0.125, 0.0625, 0.03125)
DEFAULT_TOLERANCE = 0.05


def tail_curve(f: GridFunction, eps_cut=DEFAULT_EPS_CUT, mode: str = "exact",
               s: int = oscillation.DEFAULT_S, threads: int | None = None):
    """Bracket curve over the sides ``m/n <= eps_cut``."""
    q = as_fraction(eps_cut)
    if not (0 < q <= 1):
        raise DomainError(f"eps_cut must lie in (0, 1], got {eps_cut}")
    top = int(q * f.n)
    if top < 1:
        raise ArgumentError(f"eps_cut={eps_cut} is below the grid side 1/{f.n}")
    return oscillation.sweep(f, range(1, top + 1), mode, s, threads=threads)


def tail_functional(f: GridFunction, eps_cut=DEFAULT_EPS_CUT, mode: str = "exact",
                    s: int = oscillation.DEFAULT_S, threads: int | None = None) -> float:
    """``max [f]_eps`` over the lattice sides ``eps <= eps_cut``."""
    return tail_curve(f, eps_cut, mode, s, threads).max()


def _params_for(t, params: MollifierParams | None) -> MollifierParams:
    if params is None:
        return MollifierParams(float(t))
    return replace(params, t=float(t))


def upper_profile(f: GridFunction, t_grid, params: MollifierParams | None = None,
                  mode: str = "exact", s: int = oscillation.DEFAULT_S,
                  threads: int | None = None) -> dict:
    """``{t: ||f - f_t||_B}``; ``params`` supplies everything except ``t``."""
    t_grid = list(t_grid)
    if not t_grid:
        raise ArgumentError("t_grid must contain at least one value")
    out = {}
    for t in t_grid:
        ft = approximant(f, _params_for(t, params))
        out[float(t)] = oscillation.b_norm(f - ft, mode, s, threads)[0]
    return out


def distance_upper(f: GridFunction, t_grid=DEFAULT_T_GRID, params: MollifierParams | None = None,
                   mode: str = "exact", s: int = oscillation.DEFAULT_S,
                   threads: int | None = None) -> float:
    """``min_t ||f - f_t||_B`` over the approximants ``f_t``."""
    return min(upper_profile(f, t_grid, params, mode, s, threads).values())


@dataclass(frozen=True)
class DistanceReport:
    """Lower proxy, upper bound and the curve behind them.

    ``inconsistent`` is set when ``tail_lower > (1 + tolerance) * upper``; it
    signals an under-resolved grid rather than a failure of the estimate.
    """

    tail_lower: float
    upper: float
    curve: oscillation.OscillationCurve
    epsilon_cut: float
    t_grid: tuple
    tolerance: float = DEFAULT_TOLERANCE
    upper_by_t: dict = field(default_factory=dict)

    @property
    def inconsistent(self) -> bool:
        return self.tail_lower > (1.0 + self.tolerance) * self.upper + 1e-12


def distance_report(f: GridFunction, eps_cut=DEFAULT_EPS_CUT, t_grid=DEFAULT_T_GRID,
                    params: MollifierParams | None = None, mode: str = "exact",
                    s: int = oscillation.DEFAULT_S, tolerance: float = DEFAULT_TOLERANCE,
                    threads: int | None = None) -> DistanceReport:
    if tolerance < 0:
        raise DomainError("tolerance must be >= 0")
    curve = tail_curve(f, eps_cut, mode, s, threads)
    profile = upper_profile(f, t_grid, params, mode, s, threads)
    return DistanceReport(
        tail_lower=curve.max(),
        upper=min(profile.values()),
        curve=curve,
        epsilon_cut=float(as_fraction(eps_cut)),
        t_grid=tuple(float(t) for t in t_grid),
        tolerance=float(tolerance),
        upper_by_t=profile,
    )
