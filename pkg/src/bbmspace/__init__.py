"""Mean-oscillation seminorms on piecewise-constant grid functions over the unit cube."""

from .errors import (ArgumentError, BBMError, CapacityError, DomainError, FamilyError,
                     ShapeError)
from .grid import Cube, GridFunction, cube_average, mean_oscillation, prefix_sum
from .oscillation import (CubeFamily, OscillationCurve, b_norm, bmo_norm, bracket_epsilon,
                          bv_functional, discrete_tv, family_value, select_family)

__all__ = [
    "ArgumentError", "BBMError", "CapacityError", "DomainError", "FamilyError", "ShapeError",
    "Cube", "GridFunction", "cube_average", "mean_oscillation", "prefix_sum",
    "CubeFamily", "OscillationCurve", "b_norm", "bmo_norm", "bracket_epsilon",
    "bv_functional", "discrete_tv", "family_value", "select_family",
]
