"""Time integration of the lattice equations with conservation and HP-validity monitors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import RK45

from .model import LatticeState, ModelParams, energy, rhs_arrays

RK4_FIXED = "rk4_fixed"
RK45_ADAPTIVE = "rk45_adaptive"


class NumericalAlarm(RuntimeError):
    """Base class for aborts raised while integrating."""


class HPViolation(NumericalAlarm):
    pass


class ConservationDrift(NumericalAlarm):
    pass


class NonFiniteState(NumericalAlarm):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    """Stepper settings.

    ``frame_omega`` integrates in a frame rotating at that angular frequency. The
    global phase is a symmetry of the equations, so the transformation is exact;
    it only removes the fast common carrier oscillation from the error budget of
    the fixed-step scheme. Samples are always returned in the lab frame.
    """

    method: str = RK4_FIXED
    dt: float = 1e-3
    tol: float = 1e-9
    t_end: float = 1.0
    sample_stride: int = 1
    hp_guard: float = 0.5
    conservation_alarm: float = 1e-6
    frame_omega: float = 0.0

    def __post_init__(self):
        if self.method not in (RK4_FIXED, RK45_ADAPTIVE):
            raise ValueError(f"unknown method {self.method!r}")
        if self.method == RK4_FIXED and not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.method == RK45_ADAPTIVE and not self.tol > 0:
            raise ValueError("tol must be positive")
        if not math.isfinite(self.t_end):
            raise ValueError("t_end must be finite")
        if int(self.sample_stride) != self.sample_stride or self.sample_stride < 1:
            raise ValueError("sample_stride must be a positive integer")
        if not 0 < self.hp_guard <= 2:
            raise ValueError("hp_guard must lie in (0, 2]")
        if not self.conservation_alarm > 0:
            raise ValueError("conservation_alarm must be positive")


@dataclass
class Trajectory:
    params: ModelParams
    t: np.ndarray
    alpha: np.ndarray  # (samples, M)
    beta: np.ndarray
    energy: np.ndarray
    norm: np.ndarray
    hp_load: np.ndarray
    linear: bool = False
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.t.size

    def state(self, i: int) -> LatticeState:
        return LatticeState(float(self.t[i]), self.alpha[i].copy(), self.beta[i].copy())

    @property
    def states(self) -> list[LatticeState]:
        return [self.state(i) for i in range(len(self))]

    @property
    def final(self) -> LatticeState:
        return self.state(-1)

    def energy_drift(self) -> float:
        return _rel_drift(self.energy, floor=1.0)

    def norm_drift(self) -> float:
        return _rel_drift(self.norm)


def _rel_drift(series: np.ndarray, floor: float = 0.0) -> float:
    ref = series[0]
    scale = max(abs(ref), floor)
    if scale == 0:
        return float(np.max(np.abs(series - ref)))
    return float(np.max(np.abs(series - ref)) / scale)


def stable_dt(params: ModelParams, ratio: float = 0.05, x_max: float = 0.5) -> float:
    """Step with dt * omega_max == ratio, omega_max = 2J + Omega sqrt(N) max|A|."""
    w = 2 * params.J + params.coupling * max(1.0, _max_dressing(params, x_max))
    return ratio / w


def _max_dressing(params: ModelParams, x_max: float) -> float:
    from .model import hp_series

    x = np.linspace(0.0, x_max, 201)
    return float(np.max(np.abs(hp_series(params.hp_order)(x))))


class _Monitor:
    def __init__(self, params: ModelParams, config: IntegratorConfig, linear: bool):
        self.params = params
        self.config = config
        self.linear = linear
        self.rows = []

    def record(self, t, a, b, phase):
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise NonFiniteState(f"non-finite amplitude at t={t:.6g}")
        if phase != 1.0:
            a = a * phase
            b = b * phase
        st = LatticeState(t, a, b)
        with np.errstate(over="ignore"):
            load = st.hp_load(self.params.N)
        if not self.linear and load > self.config.hp_guard:
            raise HPViolation(
                f"max|beta|^2/N = {load:.4g} exceeds guard {self.config.hp_guard} at t={t:.6g}"
            )
        with np.errstate(over="ignore", invalid="ignore"):
            e = energy(st, self.params, linear=self.linear)
            n = float(np.sum(np.abs(a) ** 2 + np.abs(b) ** 2))
        if not (math.isfinite(e) and math.isfinite(n)):
            raise NonFiniteState(f"non-finite diagnostics at t={t:.6g}")
        self.rows.append((t, a.copy(), b.copy(), e, n, load))
        if len(self.rows) > 1:
            e0, n0 = self.rows[0][3], self.rows[0][4]
            de = abs(e - e0) / max(abs(e0), 1.0)
            dn = abs(n - n0) / n0 if n0 > 0 else abs(n)
            alarm = self.config.conservation_alarm
            if de > alarm or dn > alarm:
                raise ConservationDrift(
                    f"drift at t={t:.6g}: energy {de:.3g}, norm {dn:.3g} (alarm {alarm:g}); "
                    "reduce the step"
                )

    def trajectory(self) -> Trajectory:
        t, a, b, e, n, load = zip(*self.rows)
        return Trajectory(
            params=self.params,
            t=np.array(t),
            alpha=np.array(a),
            beta=np.array(b),
            energy=np.array(e),
            norm=np.array(n),
            hp_load=np.array(load),
            linear=self.linear,
        )


def _rk4_step(f, a, b, h):
    k1a, k1b = f(a, b)
    k2a, k2b = f(a + 0.5 * h * k1a, b + 0.5 * h * k1b)
    k3a, k3b = f(a + 0.5 * h * k2a, b + 0.5 * h * k2b)
    k4a, k4b = f(a + h * k3a, b + h * k3b)
    a = a + (h / 6.0) * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
    b = b + (h / 6.0) * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
    return a, b


def _run(state0: LatticeState, params: ModelParams, config: IntegratorConfig, linear: bool):
    # a runaway step overflows before the next sample; the monitor reports it as NonFiniteState
    with np.errstate(over="ignore", invalid="ignore"):
        return _run_unchecked(state0, params, config, linear)


def _run_unchecked(state0: LatticeState, params: ModelParams, config: IntegratorConfig, linear: bool):
    if state0.M != params.M:
        raise ValueError(f"state has {state0.M} sites, params declare M={params.M}")
    t0 = float(state0.t)
    span = config.t_end - t0
    if span == 0:
        raise ValueError("t_end equals the initial time")
    w0 = config.frame_omega

    if w0:
        def f(a, b):
            da, db = rhs_arrays(a, b, params, linear)
            da += 1j * w0 * a
            db += 1j * w0 * b
            return da, db
    else:
        def f(a, b):
            return rhs_arrays(a, b, params, linear)

    def lab_phase(t):
        return np.exp(-1j * w0 * (t - t0)) if w0 else 1.0

    mon = _Monitor(params, config, linear)
    a, b = state0.alpha.copy(), state0.beta.copy()
    mon.record(t0, a, b, 1.0)
    stride = config.sample_stride

    if config.method == RK4_FIXED:
        n = max(1, int(math.ceil(abs(span) / config.dt - 1e-9)))
        h = span / n
        for i in range(1, n + 1):
            a, b = _rk4_step(f, a, b, h)
            if i % stride == 0 or i == n:
                t = t0 + i * h
                mon.record(t, a, b, lab_phase(t))
    else:
        M = params.M

        def fun(t, y):
            da, db = f(y[:M], y[M:])
            return np.concatenate([da, db])

        solver = RK45(
            fun, t0, np.concatenate([a, b]), config.t_end,
            rtol=config.tol, atol=config.tol * 1e-3,
        )
        i = 0
        while solver.status == "running":
            solver.step()
            if solver.status == "failed":
                raise NonFiniteState("adaptive step size collapsed")
            i += 1
            if i % stride == 0 or solver.status == "finished":
                y = solver.y
                mon.record(solver.t, y[:M], y[M:], lab_phase(solver.t))
    traj = mon.trajectory()
    traj.meta.update(method=config.method, frame_omega=w0)
    return traj


def integrate(state0: LatticeState, params: ModelParams, config: IntegratorConfig) -> Trajectory:
    """Advance the nonlinear lattice equations from ``state0.t`` to ``config.t_end``."""
    load = state0.hp_load(params.N)
    if load > config.hp_guard:
        raise HPViolation(f"initial max|beta|^2/N = {load:.4g} exceeds guard {config.hp_guard}")
    return _run(state0, params, config, linear=False)


def linearized_integrate(
    state0: LatticeState, params: ModelParams, config: IntegratorConfig
) -> Trajectory:
    """Same as :func:`integrate` with the HP dressing switched off (A = 1)."""
    return _run(state0, params, config, linear=True)
