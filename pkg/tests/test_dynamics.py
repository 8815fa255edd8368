import numpy as np
import pytest

from cavitysoliton.analysis import packet_width
from cavitysoliton.dynamics import (
    ConservationDrift,
    HPViolation,
    IntegratorConfig,
    NonFiniteState,
    integrate,
    linearized_integrate,
    stable_dt,
)
from cavitysoliton.initcond import gaussian_packet
from cavitysoliton.model import LatticeState, ModelParams

from conftest import random_state


def hopping_ring_exact(M, m, J, t):
    """alpha_l(t) for a unit excitation at site m of a free periodic ring."""
    q = 2 * np.pi * np.arange(M) / M
    l = np.arange(M)[:, None]
    return (np.exp(1j * q * (l - m)) * np.exp(2j * J * t * np.cos(q))).sum(axis=1) / M


class TestConfig:
    @pytest.mark.parametrize(
        "kw", [dict(method="euler"), dict(dt=0.0), dict(dt=-1.0), dict(sample_stride=0),
               dict(hp_guard=0.0), dict(hp_guard=3.0), dict(conservation_alarm=0.0),
               dict(t_end=float("inf")), dict(method="rk45_adaptive", tol=0.0)]
    )
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            IntegratorConfig(**kw)

    def test_stable_dt_scales_with_ratio(self):
        p = ModelParams(M=4, N=10, J=1.0, Omega=10.0)
        assert stable_dt(p, 0.02) == pytest.approx(0.4 * stable_dt(p, 0.05))
        assert stable_dt(p, 0.05) * (2 + 10 * np.sqrt(10)) == pytest.approx(0.05)


class TestIntegrate:
    def test_zero_state(self):
        p = ModelParams(M=5, N=3)
        traj = integrate(LatticeState.zeros(5), p, IntegratorConfig(dt=0.01, t_end=1.0))
        assert not traj.alpha.any() and not traj.beta.any()
        assert np.all(traj.energy == 0)

    def test_sampling_layout(self, rng):
        p = ModelParams(M=4, N=6, J=1.0, Omega=0.5)
        traj = integrate(random_state(rng, 4, 0.3), p,
                         IntegratorConfig(dt=0.01, t_end=1.05, sample_stride=10))
        assert np.all(np.diff(traj.t) > 0)
        assert traj.t[0] == 0 and traj.t[-1] == pytest.approx(1.05)
        assert len(traj) == traj.energy.size == traj.norm.size == traj.hp_load.size == 12
        assert traj.alpha.shape == traj.beta.shape == (12, 4)

    def test_pure_hopping_ring(self):
        M, m, J = 16, 5, 1.0
        p = ModelParams(M=M, N=4, J=J, Omega=0.0)
        a = np.zeros(M, complex)
        a[m] = 1
        traj = integrate(LatticeState(0, a, np.zeros(M)), p,
                         IntegratorConfig(dt=1e-3, t_end=5.0, sample_stride=500))
        for t, alpha in zip(traj.t, traj.alpha):
            exact = hopping_ring_exact(M, m, J, t)
            assert np.max(np.abs(np.abs(alpha) ** 2 - np.abs(exact) ** 2)) <= 1e-6
            assert np.allclose(alpha, exact, atol=1e-6)

    def test_linearized_without_coupling_is_hopping_ring(self):
        M, m = 12, 0
        p = ModelParams(M=M, N=4, J=0.5, Omega=0.0)
        a = np.zeros(M, complex)
        a[m] = 1
        traj = linearized_integrate(LatticeState(0, a, np.zeros(M)), p,
                                    IntegratorConfig(dt=1e-3, t_end=5.0))
        assert np.allclose(traj.final.alpha, hopping_ring_exact(M, m, 0.5, 5.0), atol=1e-6)

    def test_single_site_self_convergence(self):
        p = ModelParams(M=1, N=10, J=0.0, Omega=1.0, hp_order=1)
        s0 = LatticeState(0, [0.3 + 0.1j], [0.05])
        rk4 = integrate(s0, p, IntegratorConfig(dt=1e-3, t_end=10.0))
        ref = integrate(s0, p, IntegratorConfig(method="rk45_adaptive", tol=1e-12, t_end=10.0))
        assert ref.t[-1] == pytest.approx(10.0)
        assert np.max(np.abs(rk4.final.alpha - ref.final.alpha)) <= 1e-8
        assert np.max(np.abs(rk4.final.beta - ref.final.beta)) <= 1e-8

    def test_fourth_order_convergence(self, rng):
        p = ModelParams(M=6, N=4, J=1.0, Omega=1.0, hp_order=2)
        s0 = random_state(rng, 6, 0.6)
        ref = integrate(s0, p, IntegratorConfig(dt=0.0025, t_end=2.0)).final
        errs = []
        for dt in (0.04, 0.02):
            fin = integrate(s0, p, IntegratorConfig(dt=dt, t_end=2.0, conservation_alarm=1.0)).final
            errs.append(np.max(np.abs(np.r_[fin.alpha - ref.alpha, fin.beta - ref.beta])))
        order = np.log2(errs[0] / errs[1])
        assert 3.7 <= order <= 4.3

    def test_time_reversal(self, rng):
        p = ModelParams(M=6, N=5, J=1.0, Omega=1.2, hp_order=3)
        s0 = random_state(rng, 6, 0.5)
        fwd = integrate(s0, p, IntegratorConfig(dt=2e-3, t_end=3.0)).final
        back = integrate(fwd, p, IntegratorConfig(dt=2e-3, t_end=0.0)).final
        assert back.t == pytest.approx(0.0, abs=1e-12)
        assert np.allclose(back.alpha, s0.alpha, atol=1e-9)
        assert np.allclose(back.beta, s0.beta, atol=1e-9)

    def test_rotating_frame_is_exact(self, rng):
        p = ModelParams(M=5, N=6, J=1.0, Omega=1.0, hp_order=2)
        s0 = random_state(rng, 5, 0.4)
        lab = integrate(s0, p, IntegratorConfig(dt=1e-3, t_end=2.0, sample_stride=100))
        rot = integrate(s0, p, IntegratorConfig(dt=1e-3, t_end=2.0, sample_stride=100, frame_omega=2.5))
        assert np.allclose(lab.t, rot.t)
        assert np.allclose(lab.alpha, rot.alpha, atol=1e-9)
        assert np.allclose(lab.energy, rot.energy, atol=1e-9)

    def test_conservation_short_run(self, rng):
        p = ModelParams(M=6, N=4, J=1.0, Omega=0.5, hp_order=2)
        s0 = random_state(rng, 6, 0.5)
        traj = integrate(s0, p, IntegratorConfig(dt=stable_dt(p, 0.02), t_end=10.0, sample_stride=50))
        assert traj.energy_drift() <= 1e-9
        assert traj.norm_drift() <= 1e-10

    def test_small_amplitude_matches_linear(self):
        p = ModelParams(M=64, N=10, J=1.0, Omega=10.0)
        s0 = gaussian_packet(0.3, 1e-4, 5.0, 32.0, p, "optical")
        cfg = IntegratorConfig(dt=stable_dt(p, 0.02), t_end=2.0, sample_stride=100)
        nl = integrate(s0, p, cfg)
        lin = linearized_integrate(s0, p, cfg)
        rel = np.max(np.abs(nl.alpha - lin.alpha)) / np.max(np.abs(s0.alpha))
        assert rel <= 1e-6


class TestAlarms:
    def test_initial_hp_guard(self):
        p = ModelParams(M=2, N=2)
        with pytest.raises(HPViolation):
            integrate(LatticeState(0, [0, 0], [1.5, 0]), p, IntegratorConfig())

    def test_linearized_skips_hp_guard(self):
        p = ModelParams(M=2, N=2)
        traj = linearized_integrate(LatticeState(0, [0, 0], [1.5, 0]), p,
                                    IntegratorConfig(dt=1e-3, t_end=0.1))
        assert traj.hp_load[0] > 0.5

    def test_hp_growth_during_run(self):
        # photons pump the spin ladder until the guard trips
        p = ModelParams(M=1, N=1, J=0.0, Omega=1.0)
        with pytest.raises(HPViolation):
            integrate(LatticeState(0, [0.9], [0]), p, IntegratorConfig(dt=1e-3, t_end=3.0))

    def test_conservation_alarm(self, rng):
        p = ModelParams(M=6, N=10, J=1.0, Omega=10.0)
        with pytest.raises(ConservationDrift):
            integrate(random_state(rng, 6, 0.3), p, IntegratorConfig(dt=0.05, t_end=5.0))

    def test_blow_up(self):
        p = ModelParams(M=4, N=10, J=1.0, Omega=10.0)
        with pytest.raises(NonFiniteState):
            linearized_integrate(LatticeState(0, [1, 0, 0, 0], [0] * 4), p,
                                 IntegratorConfig(dt=5.0, t_end=5000.0, conservation_alarm=1e300))

    def test_state_params_mismatch(self):
        with pytest.raises(ValueError):
            integrate(LatticeState.zeros(3), ModelParams(M=4, N=1), IntegratorConfig())


def test_linear_gaussian_spreads_monotonically():
    p = ModelParams(M=128, N=10, J=1.0, Omega=10.0)
    s0 = gaussian_packet(0.3, 0.01, 3.0, 64.0, p, "optical")
    stride = int(np.ceil(4.0 / stable_dt(p, 0.02)))
    traj = linearized_integrate(s0, p, IntegratorConfig(dt=4.0 / stride, t_end=40.0,
                                                        sample_stride=stride, frame_omega=3.0))
    widths = np.array([packet_width(a) for a in traj.alpha])
    assert len(widths) == 11
    assert np.all(np.diff(widths) > 0)
    # ballistic spreading at late times: width grows linearly, so increments level off
    late = np.diff(widths[5:])
    assert np.ptp(late) <= 0.15 * np.mean(late)
