"""Builders turning analytic waves into lattice states.

The HP field is always seeded on the linear eigenvector of the chosen branch,
``beta = Omega sqrt(N) / omega(k) * alpha``, so a launched packet starts (to
leading order) on a single polariton band.
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from .analysis import Branch, SingularCarrierError, SolitonSpec, omega_discrete, soliton_envelope
from .dynamics import HPViolation
from .model import LatticeState, ModelParams

MIN_WIDTH_SITES = 5.0


def branch_ratio(k: float, params: ModelParams, branch="optical") -> float:
    """beta/alpha of the linear lattice eigenmode at wavenumber ``k``."""
    br = Branch.parse(branch)
    w = float(omega_discrete(k, params, br.sign))
    if params.coupling == 0:
        return 0.0
    if abs(w) <= 1e-14 * (params.J + params.coupling):
        raise SingularCarrierError(f"{br.value} frequency vanishes at k={k}")
    return params.coupling / w


def lattice_wavenumber(k: float, params: ModelParams) -> float:
    """Nearest wavenumber compatible with the periodic ring, 2 pi n / (M d)."""
    n = round(k * params.M * params.d / (2 * math.pi))
    return 2 * math.pi * n / (params.M * params.d)


def positions(params: ModelParams) -> np.ndarray:
    return np.arange(params.M) * params.d


def plane_wave(k: float, amplitude: float, branch, params: ModelParams) -> LatticeState:
    if not amplitude > 0:
        raise ValueError("amplitude must be positive")
    alpha = amplitude * np.exp(1j * k * positions(params))
    return LatticeState(0.0, alpha, branch_ratio(k, params, branch) * alpha)


def gaussian_packet(
    k: float, amplitude: float, width: float, center: float, params: ModelParams, branch="optical"
) -> LatticeState:
    x = positions(params)
    alpha = amplitude * np.exp(-((x - center) ** 2) / (2 * width**2) + 1j * k * x)
    return LatticeState(0.0, alpha, branch_ratio(k, params, branch) * alpha)


def soliton_amplitude(spec: SolitonSpec, width: float) -> float:
    """Physical peak amplitude of a soliton of physical width ``width``."""
    c = spec.coeffs
    return math.sqrt(2 * c.c1 / c.c2) / width


def soliton_state(
    spec: SolitonSpec,
    params: ModelParams,
    center: float,
    width: float,
    hp_guard: float = 0.5,
) -> LatticeState:
    """Launch the envelope soliton on the optical branch.

    The scaled solution is mapped with ``mu = eta * width`` so that its sech
    argument becomes ``(x - center)/width`` and its amplitude
    ``sqrt(2 c1/c2)/width``; the eta dependence drops out. A nonzero ``sigma``
    shifts the carrier by ``sigma/mu``.
    """
    if width < MIN_WIDTH_SITES * params.d:
        raise ValueError(f"width {width} below {MIN_WIDTH_SITES} sites")
    mu = spec.eta * width
    spec = replace(spec, mu=mu)
    x = positions(params)
    k = spec.coeffs.k
    env = soliton_envelope((x - center) / mu, 0.0, spec) / mu
    alpha = env * np.exp(1j * k * x)
    beta = branch_ratio(k + spec.sigma / mu, params, Branch.OPTICAL) * alpha
    state = LatticeState(0.0, alpha, beta)
    load = state.hp_load(params.N)
    if load > hp_guard:
        raise HPViolation(f"soliton needs max|beta|^2/N = {load:.3g} > guard {hp_guard}")
    return state


def superpose(*states: LatticeState) -> LatticeState:
    return LatticeState(
        states[0].t, sum(s.alpha for s in states), sum(s.beta for s in states)
    )
