import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bbmspace import oscillation as osc
from bbmspace.distance import (DistanceReport, distance_report, distance_upper, tail_curve,
                               tail_functional, upper_profile)
from bbmspace.errors import ArgumentError, DomainError
from bbmspace.generators import generate
from bbmspace.grid import GridFunction
from bbmspace.mollifier import MollifierParams

seeds = st.integers(0, 2**32 - 1)


class TestTail:
    @pytest.mark.parametrize("cut", [1 / 8, 1 / 4, 1.0])
    def test_constant(self, cut):
        assert tail_functional(GridFunction.constant(2, 8, 3.0), cut) == 0.0

    def test_below_grid_side(self):
        with pytest.raises(ArgumentError):
            tail_functional(GridFunction.constant(1, 8), 1 / 16)
        with pytest.raises(DomainError):
            tail_functional(GridFunction.constant(1, 8), 1.5)

    @pytest.mark.parametrize("cut", [1 / 64, 1 / 8, 1 / 4, 1 / 2, 1.0])
    def test_step_never_resolves(self, cut):
        assert tail_functional(generate("step", 1, 64), cut) == 0.5

    @given(seeds, st.floats(-50, 50), st.floats(-4, 4))
    def test_invariances(self, seed, c, alpha):
        f = GridFunction(np.random.default_rng(seed).random((8, 8)))
        tail = tail_functional(f, 0.5)
        assert tail <= osc.b_norm(f)[0]
        assert tail_functional(f + c, 0.5) == pytest.approx(tail, abs=1e-12 * (1 + abs(c)) * 10)
        assert tail_functional(f * alpha, 0.5) == pytest.approx(abs(alpha) * tail, abs=1e-12)

    def test_curve_covers_small_sides_only(self):
        curve = tail_curve(GridFunction(np.random.default_rng(0).random(16)), 0.25)
        assert curve.epsilons.max() == 0.25 and curve.epsilons.min() == 1 / 16

    def test_smooth_shrinks_with_cut(self):
        f = generate("smooth", 2, 64)
        vals = [tail_functional(f, cut) for cut in (1 / 4, 1 / 8, 1 / 16)]
        assert vals[0] > vals[1] > vals[2] > 0


class TestUpper:
    def test_constant(self):
        assert distance_upper(GridFunction.constant(2, 16, 2.0)) <= 1e-13

    def test_empty_grid(self):
        with pytest.raises(ArgumentError):
            distance_upper(GridFunction.constant(1, 8), [])

    def test_superset_never_larger(self, rng):
        f = GridFunction(rng.random((16, 16)))
        small = distance_upper(f, [0.125])
        big = distance_upper(f, [0.125, 0.0625, 0.25])
        assert big <= small

    def test_smooth_shrinks(self):
        prof = upper_profile(generate("smooth", 2, 64), (1 / 8, 1 / 16, 1 / 32))
        vals = [prof[t] for t in (1 / 8, 1 / 16, 1 / 32)]
        assert vals[0] > vals[1] > vals[2]
        assert vals[2] < 0.05

    def test_params_template(self):
        f = generate("step", 1, 64)
        mid = distance_upper(f, [0.125], MollifierParams(0.25, quadrature="midpoint", supersample=8))
        ex = distance_upper(f, [0.125])
        assert mid == pytest.approx(ex, abs=0.02)


class TestReport:
    def test_constant(self):
        r = distance_report(GridFunction.constant(2, 16, 1.0))
        assert r.tail_lower == 0.0 and r.upper <= 1e-13
        assert not np.any(r.curve.values)
        assert not r.inconsistent

    def test_cascade_tail_persists(self):
        tails = [distance_report(generate("cascade", 2, n), t_grid=[0.125]).tail_lower
                 for n in (16, 32)]
        assert min(tails) > 0.3

    def test_step_fine_grid(self):
        r = distance_report(generate("step", 1, 1024))
        assert r.tail_lower == 0.5
        assert abs(r.upper - 0.5) <= 0.05 * 0.5
        assert not r.inconsistent

    def test_flag(self):
        curve = osc.OscillationCurve(())
        assert DistanceReport(0.5, 0.45, curve, 0.25, (0.125,)).inconsistent
        assert not DistanceReport(0.5, 0.48, curve, 0.25, (0.125,)).inconsistent

    def test_negative_tolerance(self):
        with pytest.raises(DomainError):
            distance_report(GridFunction.constant(1, 8), tolerance=-1)
