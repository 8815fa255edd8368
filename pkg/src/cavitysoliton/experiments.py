"""Experiment runners behind the ``sim`` commands.

Each ``cmd_*`` takes a resolved config dict (see :mod:`cavitysoliton.config`) and
returns a :class:`Report`: a JSON-ready summary plus named tables for CSV output.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import spearmanr

from . import analysis as an
from .config import ConfigError
from .dynamics import IntegratorConfig, integrate, linearized_integrate
from .initcond import branch_ratio, lattice_wavenumber, plane_wave, soliton_state, superpose
from .model import LatticeState, ModelParams, hp_series
from .oracle import (
    QuantumBasis,
    build_hamiltonian,
    coherent_spin_coherent_state,
    evolve_series,
    expectation,
)

CUTOFF_ALARM = 1e-6


@dataclass
class Table:
    columns: list
    units: list
    rows: list = field(default_factory=list)


@dataclass
class Report:
    summary: dict
    tables: dict = field(default_factory=dict)


def model_params(cfg: dict, **changes) -> ModelParams:
    m = dict(cfg["model"])
    m.update(changes)
    try:
        return ModelParams(**m)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def carrier_frequency(k: float, params: ModelParams) -> float:
    """Frequency of the band that carries a photonic packet at wavenumber k."""
    if params.coupling == 0:
        return -2 * params.J * math.cos(k * params.d)
    return float(an.omega_discrete(k, params, +1))


def integrator_config(
    cfg: dict, params: ModelParams, t_end: float, sample_every: float, carrier: float = 0.0
) -> IntegratorConfig:
    """Build the stepper from the ``[integrator]`` section.

    In the carrier frame the fastest frame frequency is about |carrier| plus the
    band extent; the default step ratio there is 1, against 0.02 in the lab frame.
    The carrier-frame step is also kept below 0.1/J so the hopping band itself
    stays resolved when the coupling is weak or absent.
    """
    ic = cfg["integrator"]
    if ic["frame"] not in ("carrier", "lab"):
        raise ConfigError("integrator.frame must be 'carrier' or 'lab'")
    frame = carrier if ic["frame"] == "carrier" else 0.0
    x_max = ic["hp_guard"]
    dress = float(np.max(np.abs(hp_series(params.hp_order)(np.linspace(0, x_max, 101)))))
    w_max = 2 * params.J + params.coupling * max(dress, 1.0) + abs(frame)
    ratio = ic["step_ratio"] or (1.0 if frame else 0.02)
    dt = ic["dt"] or ratio / w_max
    if frame and not ic["dt"] and params.J > 0:
        dt = min(dt, 0.1 / params.J)
    stride = max(1, int(round(sample_every / dt)))
    dt = sample_every / stride
    try:
        return IntegratorConfig(
            method=ic["method"],
            dt=dt,
            tol=ic["tol"],
            t_end=t_end,
            sample_stride=stride,
            hp_guard=ic["hp_guard"],
            conservation_alarm=ic["conservation_alarm"],
            frame_omega=frame,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# -- dispersion ------------------------------------------------------------


def measure_branch_frequency(k, params, branch, amplitude, duration, sample_every, cfg, site=0):
    state = plane_wave(k, amplitude, branch, params)
    # lab frame: the spectrum must see absolute frequencies
    ic = replace(integrator_config(cfg, params, duration, sample_every), frame_omega=0.0)
    traj = linearized_integrate(state, params, ic)
    spec = an.measure_spectrum(traj, site)
    return spec.peaks[0][0], spec.resolution


def cmd_dispersion(cfg: dict) -> Report:
    params = model_params(cfg)
    ex = cfg["experiment"]
    if not ex["kd_values"]:
        raise ConfigError("experiment.kd_values is empty")
    branches = ex["branches"]
    if branches not in ("optical", "acoustic", "both"):
        raise ConfigError("experiment.branches must be optical, acoustic or both")
    table = Table(
        ["k", "omega_plus_discrete", "omega_minus_discrete", "omega_plus_cont", "omega_minus_cont",
         "omega_measured", "rel_err", "omega_measured_minus", "rel_err_minus"],
        ["1/d", "J", "J", "J", "J", "J", "1", "J", "1"],
    )
    worst = 0.0
    for kd in ex["kd_values"]:
        k = kd / params.d
        if ex["measure"] and params.boundary == "periodic":
            k = lattice_wavenumber(k, params)
        wp = float(an.omega_discrete(k, params, +1))
        wm = float(an.omega_discrete(k, params, -1))
        row = [k, wp, wm, float(an.omega_continuous(k, params, +1)),
               float(an.omega_continuous(k, params, -1))]
        meas = [math.nan] * 4
        if ex["measure"] and params.coupling == 0:
            # uncoupled photons live on the free-chain band alone
            ref = carrier_frequency(k, params)
            w, _ = measure_branch_frequency(
                k, params, "optical", ex["amplitude"], ex["duration"], ex["sample_every"], cfg,
                ex["probe_site"],
            )
            err = abs(w - ref) / abs(ref) if ref else abs(w)
            meas[:2] = [w, err]
            worst = max(worst, err)
        elif ex["measure"]:
            for slot, (name, ref) in enumerate((("optical", wp), ("acoustic", wm))):
                if branches not in (name, "both"):
                    continue
                w, _ = measure_branch_frequency(
                    k, params, name, ex["amplitude"], ex["duration"], ex["sample_every"], cfg,
                    ex["probe_site"],
                )
                err = abs(w - ref) / abs(ref) if ref else abs(w)
                meas[2 * slot: 2 * slot + 2] = [w, err]
                worst = max(worst, err)
        table.rows.append(row + meas)
    summary = {
        "command": "dispersion",
        "points": len(table.rows),
        "band_gap": an.band_gap(params),
        "max_rel_err": worst if ex["measure"] else None,
    }
    return Report(summary, {"dispersion": table})


# -- soliton tracking --------------------------------------------------------


def local_metrics(alpha: np.ndarray, guess: float, k: float, d: float, half_window: float):
    """Fit and moments of the packet nearest ``guess`` on a ring, unwrapped near guess."""
    M = alpha.size
    shift = M // 2 - int(round(guess / d))
    a = np.roll(alpha, shift)
    hw = int(min(M // 2 - 1, math.ceil(half_window / d)))
    lo, hi = M // 2 - hw, M // 2 + hw + 1
    fit = an.fit_sech(a, k, d, window=(lo, hi))
    seg = np.zeros_like(a)
    seg[lo:hi] = a[lo:hi]
    rms = an.packet_width(seg, d)
    center = fit.center - shift * d
    com = an.packet_center(seg, d) - shift * d
    return {
        "amp": fit.amplitude,
        "fit_width": fit.width,
        "center": center,
        "com": com,
        "rms_width": rms,
        "fit_error": fit.fit_error,
    }


def _track(traj, k, d, start, half_window):
    rows, guess = [], start
    for i in range(len(traj)):
        m = local_metrics(traj.alpha[i], guess, k, d, half_window)
        guess = m["com"]
        rows.append(m)
    return rows


def _drift(values) -> float:
    v = np.asarray(values)
    return float(np.max(np.abs(v / v[0] - 1)))


def soliton_launch(params: ModelParams, k: float, width: float, center: float, hp_guard: float,
                   scale: float = 1.0, sigma: float = 0.0) -> tuple[LatticeState, an.NLSCoefficients]:
    coeffs = an.nls_coefficients(k, params)
    spec = an.SolitonSpec(eta=1.0, coeffs=coeffs, sigma=sigma)
    state = soliton_state(spec, params, center, width, hp_guard=hp_guard)
    return LatticeState(0.0, scale * state.alpha, scale * state.beta), coeffs


def cmd_soliton(cfg: dict) -> Report:
    params = model_params(cfg)
    ex = cfg["experiment"]
    k, w = ex["k"], ex["width"]
    L = params.M * params.d
    x0 = ex["center_fraction"] * L
    if ex["amplitude_scale"] == 0:
        return Report({"command": "soliton", "status": "empty-field", "amp_drift": None,
                       "width_drift": None, "measured_velocity": None, "v_g_predicted": None})
    try:
        state, coeffs = soliton_launch(params, k, w, x0, cfg["integrator"]["hp_guard"],
                                       ex["amplitude_scale"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    ic = integrator_config(cfg, params, ex["horizon"], ex["sample_every"],
                           carrier_frequency(k, params))
    traj = integrate(state, params, ic)
    half = min(L / 2 - params.d, 8 * w)
    track = _track(traj, k, params.d, x0, half)
    table = Table(
        ["t", "peak_amp", "width", "center", "energy", "norm", "rms_width", "fit_error"],
        ["1/J", "1", "d", "d", "J", "1", "d", "1"],
    )
    for i, m in enumerate(track):
        table.rows.append([traj.t[i], m["amp"], m["fit_width"], m["center"], traj.energy[i],
                           traj.norm[i], m["rms_width"], m["fit_error"]])
    t = traj.t
    velocity = float(np.polyfit(t, [m["com"] for m in track], 1)[0])
    summary = {
        "command": "soliton",
        "status": "ok",
        "c1": coeffs.c1,
        "c2": coeffs.c2,
        "amplitude": float(np.max(np.abs(state.alpha))),
        "amp_drift": _drift([m["amp"] for m in track]),
        "width_drift": _drift([m["rms_width"] for m in track]),
        "fit_width_drift": _drift([m["fit_width"] for m in track]),
        "measured_velocity": velocity,
        "v_g_predicted": coeffs.v_g,
        "velocity_rel_err": abs(velocity - coeffs.v_g) / abs(coeffs.v_g),
        "energy_drift": traj.energy_drift(),
        "norm_drift": traj.norm_drift(),
        "horizon": float(t[-1]),
    }
    tables = {"timeseries": table}
    if ex["linear_control"]:
        lin = linearized_integrate(state, params, ic)
        lin_track = _track(lin, k, params.d, x0, L / 2 - params.d)
        growth = lin_track[-1]["rms_width"] / lin_track[0]["rms_width"]
        summary["linear_width_growth"] = growth
        ctrl = Table(["t", "rms_width", "center"], ["1/J", "d", "d"])
        for i, m in enumerate(lin_track):
            ctrl.rows.append([lin.t[i], m["rms_width"], m["com"]])
        tables["linear_control"] = ctrl
    return Report(summary, tables)


# -- collisions --------------------------------------------------------------


def cmd_collide(cfg: dict) -> Report:
    params = model_params(cfg)
    ex = cfg["experiment"]
    k, w, sep = ex["k"], ex["width"], ex["separation"]
    L = params.M * params.d
    if sep >= L / 2:
        raise ConfigError("separation must be below half the ring length")
    guard = cfg["integrator"]["hp_guard"]
    xa, xb = L / 2 - sep / 2, L / 2 + sep / 2
    kb = k if ex["co_moving"] else -k
    try:
        sa, ca = soliton_launch(params, k, w, xa, guard)
        sb, cb = soliton_launch(params, kb, w, xb, guard)
    except an.SingularCarrierError as exc:
        raise ConfigError(str(exc)) from exc
    state = superpose(sa, sb)
    v = ca.v_g
    horizon = ex["horizon"] or (sep / v if not ex["co_moving"] else sep / (2 * v))
    ic = integrator_config(cfg, params, horizon, ex["sample_every"], carrier_frequency(k, params))
    traj = integrate(state, params, ic)
    half = min(sep / 2, 6 * w)
    T = float(traj.t[-1])
    v_lat = an.group_velocity_fd(k, params, discrete=True)
    ends = {"a": (xa, k, xa + v_lat * T), "b": (xb, kb, xb + np.sign(kb) * v_lat * T)}
    result = {}
    table = Table(["soliton", "phase", "amplitude", "width", "center", "fit_error"],
                  ["-", "-", "1", "d", "d", "1"])
    for name, (x_start, kk, x_end) in ends.items():
        pre = local_metrics(traj.alpha[0], x_start, kk, params.d, half)
        post = local_metrics(traj.alpha[-1], x_end % L, kk, params.d, half)
        for phase, m in (("pre", pre), ("post", post)):
            table.rows.append([name, phase, m["amp"], m["fit_width"], m["center"], m["fit_error"]])
        result[name] = {
            "pre_amp": pre["amp"], "post_amp": post["amp"],
            "pre_width": pre["fit_width"], "post_width": post["fit_width"],
            "amp_change": post["amp"] / pre["amp"] - 1,
            "width_change": post["fit_width"] / pre["fit_width"] - 1,
        }
    ts = Table(["t", "energy", "norm", "hp_load"], ["1/J", "J", "1", "1"])
    for i in range(len(traj)):
        ts.rows.append([traj.t[i], traj.energy[i], traj.norm[i], traj.hp_load[i]])
    summary = {
        "command": "collide",
        "head_on": not ex["co_moving"],
        "horizon": T,
        "solitons": result,
        "max_amp_change": max(abs(r["amp_change"]) for r in result.values()),
        "energy_drift": traj.energy_drift(),
        "norm_drift": traj.norm_drift(),
    }
    return Report(summary, {"fits": table, "timeseries": ts})


# -- transition sweep --------------------------------------------------------


def _transition_point(args):
    cfg, N, amplitude = args
    ex = cfg["experiment"]
    J = cfg["model"]["J"]
    params = model_params(cfg, N=N, Omega=ex["Omega_over_J"] * J)
    k, w = ex["k"], ex["width"]
    L = params.M * params.d
    x0 = 0.3 * L
    x = np.arange(params.M) * params.d
    alpha = amplitude / np.cosh((x - x0) / w) * np.exp(1j * k * x)
    ratio = branch_ratio(k, params) if params.coupling else 0.0
    state = LatticeState(0.0, alpha, ratio * alpha)
    ic = integrator_config(cfg, params, ex["horizon"], ex["sample_every"],
                           carrier_frequency(k, params))
    half = L / 2 - params.d
    traj = integrate(state, params, ic)
    lin = linearized_integrate(state, params, ic)
    tr = _track(traj, k, params.d, x0, half)
    lt = _track(lin, k, params.d, x0, half)
    if params.coupling:
        c = an.nls_coefficients(k, params)
        ratio_c = c.c1 / c.c2
    else:
        ratio_c = math.inf
    core = [m["fit_width"] / tr[0]["fit_width"] for m in tr]
    return {
        "N": N,
        "c1_over_c2": ratio_c,
        "score": core[-1],
        "mean_score": float(np.mean(core)),
        "rms_score": tr[-1]["rms_width"] / tr[0]["rms_width"],
        "linear_score": lt[-1]["fit_width"] / lt[0]["fit_width"],
        "amp_ratio": tr[-1]["amp"] / tr[0]["amp"],
        "sqrtN_times_J_over_Omega": math.sqrt(N) * J / params.Omega if params.Omega else math.inf,
        "energy_drift": traj.energy_drift(),
        "norm_drift": traj.norm_drift(),
    }


def cmd_transition(cfg: dict) -> Report:
    ex = cfg["experiment"]
    Ns = ex["N_values"]
    if not Ns or any((not isinstance(n, int)) or n < 1 for n in Ns):
        raise ConfigError("experiment.N_values must be positive integers")
    J = cfg["model"]["J"]
    ref = model_params(cfg, N=ex["reference_N"], Omega=ex["Omega_over_J"] * J)
    try:
        c = an.nls_coefficients(ex["k"], ref)
    except an.SingularCarrierError as exc:
        raise ConfigError(f"reference point: {exc}") from exc
    amplitude = math.sqrt(2 * c.c1 / c.c2) / ex["width"]
    jobs = [(cfg, N, amplitude) for N in Ns]
    workers = max(1, int(ex["workers"]))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(_transition_point, jobs))
    else:
        points = [_transition_point(j) for j in jobs]
    cols = ["N", "c1_over_c2", "score", "mean_score", "rms_score", "linear_score", "amp_ratio",
            "sqrtN_times_J_over_Omega", "energy_drift", "norm_drift"]
    table = Table(cols, ["1", "d^2", "1", "1", "1", "1", "1", "1", "1", "1"])
    for p in points:
        table.rows.append([p[c] for c in cols])
    ratios = [p["c1_over_c2"] for p in points]
    scores = [p["score"] for p in points]
    rho = float(spearmanr(ratios, scores)[0]) if len(points) > 2 else math.nan
    summary = {
        "command": "transition",
        "reference_amplitude": amplitude,
        "spearman": rho,
        "c1_over_c2_monotone_in_N": bool(np.all(np.diff([r for _, r in sorted(zip(Ns, ratios))]) > 0)),
        "points": points,
    }
    return Report(summary, {"sweep": table})


# -- quantum oracle comparison -------------------------------------------------


def _complex_list(values, M, name):
    out = []
    for v in values:
        if isinstance(v, list):
            if len(v) != 2:
                raise ConfigError(f"{name} entries must be numbers or [re, im] pairs")
            out.append(complex(v[0], v[1]))
        else:
            out.append(complex(v))
    if len(out) != M:
        raise ConfigError(f"{name} needs {M} entries")
    return np.array(out)


def cmd_oracle_compare(cfg: dict) -> Report:
    params = model_params(cfg)
    ex = cfg["experiment"]
    if params.M > 3:
        raise ConfigError("oracle comparison supports M <= 3")
    basis = QuantumBasis(params.M, ex["n_max"], params.N)
    a0 = _complex_list(ex["alpha0"], params.M, "alpha0")
    b0 = _complex_list(ex["beta0"], params.M, "beta0")
    H = build_hamiltonian(params, basis)
    psi0 = coherent_spin_coherent_state(a0, b0, basis)
    rate = params.Omega if params.Omega else 1.0
    n = ex["samples"]
    times = np.linspace(0.0, ex["t_max"] / rate, n)
    states = evolve_series(psi0, H, times)
    quantum = np.array([[expectation(basis.a(j), s) for j in range(params.M)] for s in states])
    cutoff = max(basis.cutoff_population(s.psi) for s in states)

    steps = ex["steps_per_sample"]
    ic = IntegratorConfig(dt=(times[1] - times[0]) / steps, t_end=times[-1], sample_stride=steps,
                          hp_guard=2.0, conservation_alarm=1e-6)
    traj = integrate(LatticeState(0.0, a0, b0), params, ic)
    mf = traj.alpha
    dev = np.abs(quantum - mf)
    scale = float(np.max(np.abs(mf)))
    bound = 0.1 * scale
    in_window = times * rate <= ex["window"] + 1e-12
    max_window = float(dev[in_window].max())
    over = np.flatnonzero(dev.max(axis=1) > bound)
    first_violation = float(times[over[0]] * rate) if over.size else None
    table = Table(
        ["t", "Omega_t"] + [f"{p}{j}" for j in range(params.M)
                            for p in ("dev_", "q_re_", "q_im_", "mf_re_", "mf_im_")],
        ["1/J", "1"] + ["1"] * 5 * params.M,
    )
    for i, t in enumerate(times):
        row = [t, t * rate]
        for j in range(params.M):
            row += [dev[i, j], quantum[i, j].real, quantum[i, j].imag, mf[i, j].real, mf[i, j].imag]
        table.rows.append(row)
    summary = {
        "command": "oracle-compare",
        "dimension": basis.dim,
        "max_dev_window": max_window,
        "bound": bound,
        "within_bound": max_window <= bound,
        "max_dev_total": float(dev.max()),
        "meanfield_valid_full_run": bool(dev.max() <= bound),
        "first_violation_Omega_t": first_violation,
        "cutoff_population": cutoff,
        "cutoff_alarm": cutoff > CUTOFF_ALARM,
        "quantum_norm_error": float(max(abs(s.norm - 1) for s in states)),
    }
    return Report(summary, {"timeseries": table})


COMMANDS = {
    "dispersion": cmd_dispersion,
    "soliton": cmd_soliton,
    "collide": cmd_collide,
    "transition": cmd_transition,
    "oracle-compare": cmd_oracle_compare,
}
