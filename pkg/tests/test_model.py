import math
from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from cavitysoliton.model import (
    LatticeState,
    ModelParams,
    OrderOverflowError,
    energy,
    eom_rhs,
    eom_rhs_first_order,
    hp_coefficient,
    hp_series,
    total_norm,
)

from conftest import fd_gradient_rhs, random_state


def taylor_sqrt_one_minus_x(order):
    x = sympy.symbols("x")
    poly = sympy.series(sympy.sqrt(1 - x), x, 0, order + 1).removeO()
    return [Fraction(str(poly.coeff(x, l))) for l in range(order + 1)]


class TestHPSeries:
    def test_leading_terms(self):
        assert hp_coefficient(0) == 1
        assert hp_coefficient(1) == Fraction(-1, 2)

    @pytest.mark.parametrize("l, expected", [(2, Fraction(-1, 8)), (3, Fraction(-1, 16)), (4, Fraction(-5, 128))])
    def test_low_orders(self, l, expected):
        assert hp_coefficient(l) == expected

    def test_matches_taylor_through_max_order(self):
        assert list(hp_series(12).coeffs) == taylor_sqrt_one_minus_x(12)

    def test_float_evaluation_tracks_sqrt(self):
        x = np.linspace(0, 0.2, 11)
        assert np.allclose(hp_series(12)(x), np.sqrt(1 - x), atol=1e-10, rtol=0)

    def test_overflow(self):
        with pytest.raises(OrderOverflowError):
            hp_coefficient(13)

    def test_derivative(self):
        s = hp_series(4)
        x = np.array([0.05, 0.3])
        h = 1e-6
        assert np.allclose(s.derivative(x), (s(x + h) - s(x - h)) / (2 * h), atol=1e-8)


class TestParams:
    @pytest.mark.parametrize(
        "kw", [dict(M=0, N=1), dict(M=2, N=0), dict(M=2, N=1, J=-1), dict(M=2, N=1, d=0),
               dict(M=2, N=1, hp_order=0), dict(M=2, N=1, hp_order=13), dict(M=2, N=1, boundary="twisted")]
    )
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            ModelParams(**kw)

    def test_state_shape_mismatch(self):
        with pytest.raises(ValueError):
            energy(LatticeState.zeros(3), ModelParams(M=4, N=2))


class TestEnergy:
    def test_vacuum(self):
        assert energy(LatticeState.zeros(5), ModelParams(M=5, N=3)) == 0

    def test_no_hopping_no_atoms(self, rng):
        p = ModelParams(M=6, N=4, J=0.0, Omega=2.0)
        s = random_state(rng, 6)
        s.beta[:] = 0
        assert energy(s, p) == 0

    def test_hand_values(self):
        p = ModelParams(M=2, N=10, J=1.0, Omega=1.0, hp_order=1)
        assert energy(LatticeState(0, [1, 0], [0, 1]), p) == 0
        # hopping -J*(2+2+2+2); site 0 exchange 2*sqrt(10)*0.5*(1 - 0.025/2)
        assert energy(LatticeState(0, [1, 2], [0.5, 0]), p) == pytest.approx(-4.877250810583725, abs=1e-13)

    def test_open_chain_drops_wrap_bond(self):
        a = np.array([1.0, 0, 0, 1.0])
        s = LatticeState(0, a, np.zeros(4))
        assert energy(s, ModelParams(M=4, N=1, boundary="open")) == 0
        assert energy(s, ModelParams(M=4, N=1)) == pytest.approx(-2.0)

    @given(theta=st.floats(0, 2 * math.pi), seed=st.integers(0, 2**16))
    @settings(max_examples=40, deadline=None)
    def test_global_phase_invariance(self, theta, seed):
        rng = np.random.default_rng(seed)
        p = ModelParams(M=5, N=7, J=1.0, Omega=1.3, hp_order=3)
        s = random_state(rng, 5)
        r = LatticeState(0, np.exp(1j * theta) * s.alpha, np.exp(1j * theta) * s.beta)
        assert energy(r, p) == pytest.approx(energy(s, p), abs=1e-12)


class TestRHS:
    def test_vacuum_fixed_point(self):
        da, db = eom_rhs(LatticeState.zeros(4), ModelParams(M=4, N=2))
        assert not da.any() and not db.any()

    def test_pure_hopping(self):
        M, m = 6, 2
        p = ModelParams(M=M, N=3, J=0.7, Omega=0.0)
        a = np.zeros(M, complex)
        a[m] = 1
        da, db = eom_rhs(LatticeState(0, a, np.zeros(M)), p)
        expected = np.zeros(M, complex)
        expected[m - 1] = expected[m + 1] = 1j * 0.7
        assert np.allclose(da, expected) and not db.any()

    def test_single_site_first_order(self):
        p = ModelParams(M=1, N=10, J=0.0, Omega=1.0, hp_order=1)
        _, db = eom_rhs(LatticeState(0, [1.0], [0.3]), p)
        assert db[0] == pytest.approx(-1j * 3.1195869117561066, abs=1e-14)

    @pytest.mark.parametrize("order", [1, 2, 4])
    @pytest.mark.parametrize("boundary", ["periodic", "open"])
    def test_gradient_of_energy(self, rng, order, boundary):
        p = ModelParams(M=5, N=6, J=0.8, Omega=1.7, hp_order=order, boundary=boundary)
        s = random_state(rng, 5)
        da, db = eom_rhs(s, p)
        fa, fb = fd_gradient_rhs(s, p)
        assert np.allclose(da, fa, rtol=1e-6, atol=1e-8)
        assert np.allclose(db, fb, rtol=1e-6, atol=1e-8)

    def test_linear_mode_is_gradient_of_linear_energy(self, rng):
        p = ModelParams(M=4, N=3, J=1.0, Omega=0.9)
        s = random_state(rng, 4)
        da, db = eom_rhs(s, p, linear=True)
        fa, fb = fd_gradient_rhs(s, p, linear=True)
        assert np.allclose(da, fa, atol=1e-8) and np.allclose(db, fb, atol=1e-8)

    def test_first_order_closed_form(self, rng):
        for _ in range(20):
            M = int(rng.integers(2, 9))
            p = ModelParams(M=M, N=int(rng.integers(1, 30)), J=rng.uniform(0, 2),
                            Omega=rng.uniform(0, 5), hp_order=1)
            s = random_state(rng, M, scale=1.0)
            for u, v in zip(eom_rhs(s, p), eom_rhs_first_order(s, p)):
                assert np.allclose(u, v, rtol=1e-14, atol=1e-13)


def test_total_norm():
    assert total_norm(LatticeState.zeros(3)) == 0
    assert total_norm(LatticeState(0, [1, 0, 0], [0, 0, 0])) == 1
    assert total_norm(LatticeState(0, [1j, 0], [0, 2])) == pytest.approx(5)
