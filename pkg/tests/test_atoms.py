import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bbmspace import oscillation as osc
from bbmspace.atoms import (Atom, AtomicFunctional, default_probes, empirical_functional_norm,
                            functional_value, make_atom, pair, validate_atom)
from bbmspace.errors import ArgumentError, FamilyError, ShapeError
from bbmspace.grid import Cube, GridFunction

from helpers import random_atom, random_functional, random_grid

seeds = st.integers(0, 2**32 - 1)
dims = st.sampled_from([(1, 8), (2, 4), (2, 8), (3, 4)])


def quarter_family():
    return osc.CubeFamily(0.5, (Cube(0.5, (0.0, 0.0)),))


def split_atom():
    g = np.zeros((4, 4))
    g[0:2, 0] = 2.0
    g[0:2, 1] = -2.0
    return Atom(quarter_family(), GridFunction(g))


class TestValidate:
    def test_zero_is_valid(self):
        r = validate_atom(Atom(quarter_family(), GridFunction.constant(2, 4)))
        assert r.valid and not r.messages

    def test_symmetric_at_bound(self):
        assert validate_atom(split_atom()).valid

    def test_mean_violation(self):
        g = split_atom().values.values.copy()
        # add 0.01 on the cube: int_Q g = 0.01 |Q|
        g[0:2, 0:2] += 0.01
        r = validate_atom(Atom(quarter_family(), GridFunction(g)), tol=1e-9)
        assert not r.valid
        assert r.mean_violation == pytest.approx(0.01, rel=1e-12)
        assert r.worst_cube == 0
        assert any("mean" in m for m in r.messages)

    def test_support_and_bound_violations(self):
        g = split_atom().values.values.copy()
        g[3, 3] = 0.5
        r = validate_atom(Atom(quarter_family(), GridFunction(g)))
        assert not r.valid and r.support_violation == 0.5
        g = split_atom().values.values * 1.5
        r = validate_atom(Atom(quarter_family(), GridFunction(g)))
        assert not r.valid and r.bound_violation == pytest.approx(1.0)

    def test_atom_needs_capped_family(self):
        F = osc.CubeFamily(0.5, (Cube(0.5, (0.0,)),), constrained=False)
        with pytest.raises(FamilyError):
            Atom(F, GridFunction.constant(1, 4))

    def test_values_must_resolve_the_cubes(self):
        F = osc.CubeFamily(0.5, (Cube(0.5, (0.125,)),))
        with pytest.raises(ShapeError):
            Atom(F, GridFunction.constant(1, 4))


class TestMakeAtom:
    def test_constant_gives_zero(self):
        a = make_atom(quarter_family(), GridFunction.constant(2, 4, 3.0))
        assert not np.any(a.values.values)

    def test_valid_input_unchanged(self):
        a = split_atom()
        b = make_atom(a.family, a.values)
        np.testing.assert_array_equal(a.values.values, b.values.values)

    @given(seeds, dims)
    def test_output_always_valid(self, seed, dn):
        rng = np.random.default_rng(seed)
        a = random_atom(rng, *dn)
        assert validate_atom(a, 1e-12).valid

    def test_refines_raw_for_half_cell_anchors(self):
        F = osc.CubeFamily(0.5, (Cube(0.5, (0.125,)),))
        a = make_atom(F, GridFunction(np.arange(4.0)))
        assert a.values.n == 8 and validate_atom(a).valid

    def test_rejects_uncapped_family(self):
        F = osc.CubeFamily(0.5, (Cube(0.5, (0.0,)),), constrained=False)
        with pytest.raises(FamilyError):
            make_atom(F, GridFunction.constant(1, 4))


class TestPair:
    def test_constant_pairs_to_zero(self, rng):
        a = random_atom(rng, 2, 8)
        assert pair(GridFunction.constant(2, 8, 5.0), a) == 0.0

    def test_matched_sign_pattern(self):
        a = split_atom()
        f = GridFunction(np.sign(a.values.values))
        value = pair(f, a)
        bracket, _ = osc.bracket_epsilon(f, 0.5)
        # direct integration: |g| = 2 on the cube of volume 1/4
        assert value == pytest.approx(0.5, abs=1e-15)
        assert 0 < value <= bracket + 1e-12

    def test_matches_plain_integral(self, rng):
        for _ in range(20):
            a = random_atom(rng, 2, 8)
            f = random_grid(rng, 2, 8)
            fv = f.upsample(a.values.n // 8).values
            plain = np.sum(fv * a.values.values) / a.values.n**2
            assert pair(f, a) == pytest.approx(plain, abs=1e-12)

    @given(seeds, dims, st.floats(-1e3, 1e3))
    def test_bounded_by_family_value_and_shift_invariant(self, seed, dn, c):
        rng = np.random.default_rng(seed)
        a = random_atom(rng, *dn)
        f = random_grid(rng, *dn)
        p = pair(f, a)
        assert abs(p) <= osc.family_value(f, a.family) + 1e-12
        assert pair(f + c, a) == pytest.approx(p, abs=1e-12 * (1 + abs(c)) * 10)

    def test_grid_mismatch(self, rng):
        a = random_atom(rng, 2, 4)
        with pytest.raises(ShapeError):
            pair(random_grid(rng, 2, 6), a)
        with pytest.raises(ShapeError):
            pair(random_grid(rng, 1, 4), a)

    def test_coarse_atom_on_fine_function(self, rng):
        a = random_atom(rng, 2, 4)
        f = random_grid(rng, 2, 4)
        assert pair(f.upsample(4), a) == pytest.approx(pair(f, a), abs=1e-12)


class TestFunctionals:
    def test_empty(self, rng):
        assert functional_value(random_grid(rng, 2, 4), AtomicFunctional()) == 0.0

    def test_single_term(self, rng):
        a = random_atom(rng, 2, 8)
        f = random_grid(rng, 2, 8)
        assert functional_value(f, AtomicFunctional(((2.5, a),))) == pytest.approx(2.5 * pair(f, a))

    @given(seeds)
    def test_linear(self, seed):
        rng = np.random.default_rng(seed)
        p1, p2 = random_functional(rng, 2, 4), random_functional(rng, 2, 4)
        f = random_grid(rng, 2, 4)
        lhs = functional_value(f, p1 + p2)
        assert lhs == pytest.approx(functional_value(f, p1) + functional_value(f, p2), abs=1e-12)
        assert functional_value(f, p1.scaled(-3)) == pytest.approx(-3 * functional_value(f, p1), abs=1e-12)

    def test_bounded_by_l1_times_norm(self, rng):
        for _ in range(10):
            phi = random_functional(rng, 2, 4)
            f = random_grid(rng, 2, 4)
            assert abs(functional_value(f, phi)) <= phi.l1 * osc.b_norm(f)[0] + 1e-12

    def test_truncation_tracks_tail(self, rng):
        phi = random_functional(rng, 1, 8, terms=4)
        t = phi.truncate(1)
        assert len(t.terms) == 1
        assert t.tail_l1 + t.l1 == pytest.approx(phi.l1)

    def test_terms_must_be_atoms(self):
        with pytest.raises(ArgumentError):
            AtomicFunctional(((1.0, "atom"),))


class TestEmpiricalNorm:
    def test_zero_functional(self, rng):
        assert empirical_functional_norm(AtomicFunctional(), [random_grid(rng, 2, 4)]) == 0.0

    def test_empty_probes(self, rng):
        with pytest.raises(ArgumentError):
            empirical_functional_norm(random_functional(rng, 2, 4), [])

    def test_matched_probe_is_positive(self):
        phi = AtomicFunctional(((1.0, split_atom()),))
        probe = GridFunction(np.sign(split_atom().values.values))
        assert empirical_functional_norm(phi, [probe]) > 0.0

    def test_never_exceeds_l1(self, rng):
        for _ in range(4):
            phi = random_functional(rng, 2, 4)
            value = empirical_functional_norm(phi)
            assert 0 < value <= phi.l1 + 1e-9

    def test_constant_probes_are_skipped(self, rng):
        phi = random_functional(rng, 1, 8)
        assert empirical_functional_norm(phi, [GridFunction.constant(1, 8, 1.0)]) == 0.0

    def test_default_probes_share_one_grid(self, rng):
        phi = random_functional(rng, 2, 4, terms=3)
        probes = default_probes(phi)
        assert len({(p.d, p.n) for p in probes}) == 1
