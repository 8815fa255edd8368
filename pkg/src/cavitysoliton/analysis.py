"""Dispersion, envelope-equation coefficients and numerical estimators.

Closed forms cover the polariton bands of the linearized lattice, the group
velocity of the optical branch and the coefficients of the cubic envelope
equation ``i e_t + c1 e_xx + c2 |e|^2 e = 0``. The estimators (spectral peaks,
packet moments, sech fits) measure the same quantities on simulated fields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import curve_fit

from .model import LatticeState, ModelParams


class Branch(str, Enum):
    OPTICAL = "optical"
    ACOUSTIC = "acoustic"

    @property
    def sign(self) -> int:
        return 1 if self is Branch.OPTICAL else -1

    @classmethod
    def parse(cls, value) -> "Branch":
        if isinstance(value, Branch):
            return value
        aliases = {"+": cls.OPTICAL, "plus": cls.OPTICAL, "-": cls.ACOUSTIC, "minus": cls.ACOUSTIC}
        if value in aliases:
            return aliases[value]
        return cls(value)


class SingularCarrierError(ValueError):
    """The optical-branch frequency vanishes at the requested carrier."""


class DegenerateFieldError(ValueError):
    pass


class ShortTrajectoryError(ValueError):
    pass


@dataclass(frozen=True)
class DispersionPoint:
    k: float
    branch: Branch
    omega: float


@dataclass(frozen=True)
class NLSCoefficients:
    c1: float
    c2: float
    k: float
    omega_plus: float
    v_g: float


@dataclass(frozen=True)
class SolitonSpec:
    eta: float
    coeffs: NLSCoefficients
    sigma: float = 0.0
    nu: float = 0.0
    phi0: float = 0.0
    mu: float = 1.0

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if not self.coeffs.c1 * self.coeffs.c2 > 0:
            raise ValueError("bright solitons need c1*c2 > 0")

    @property
    def amplitude(self) -> float:
        c = self.coeffs
        return self.eta * math.sqrt(2 * c.c1 / c.c2)


# -- dispersion ------------------------------------------------------------


def omega_continuous(k, params: ModelParams, sign: int = 1):
    """Long-wavelength bands, vectorized over ``k``."""
    u = params.J * (1 - (params.d * np.asarray(k)) ** 2 / 2)
    return -u + sign * np.sqrt(u * u + params.coupling**2)


def omega_discrete(k, params: ModelParams, sign: int = 1):
    """Exact bands of the linearized lattice, vectorized over ``k``."""
    u = params.J * np.cos(params.d * np.asarray(k))
    return -u + sign * np.sqrt(u * u + params.coupling**2)


def dispersion_continuous(k: float, params: ModelParams, branch="optical") -> DispersionPoint:
    br = Branch.parse(branch)
    return DispersionPoint(float(k), br, float(omega_continuous(k, params, br.sign)))


def dispersion_discrete(k: float, params: ModelParams, branch="optical") -> DispersionPoint:
    br = Branch.parse(branch)
    return DispersionPoint(float(k), br, float(omega_discrete(k, params, br.sign)))


def band_gap(params: ModelParams) -> float:
    """Bottom of the optical band minus top of the acoustic band.

    The optical band is lowest and the acoustic band highest where ``cos(kd)``
    is extremal, so the two zone points kd = 0 and kd = pi suffice.
    """
    edges = np.array([0.0, math.pi]) / params.d
    lo_plus = np.min(omega_discrete(edges, params, +1))
    hi_minus = np.max(omega_discrete(edges, params, -1))
    return float(lo_plus - hi_minus)


def group_velocity(k: float, params: ModelParams) -> float:
    """Closed-form optical-branch group velocity 2kJd^2 w^2 / (w^2 + Omega^2 N)."""
    w = float(omega_continuous(k, params, +1))
    P = params.coupling**2
    if w == 0 and P == 0:
        return 0.0
    return 2 * k * params.J * params.d**2 * w * w / (w * w + P)


def group_velocity_fd(k: float, params: ModelParams, h: float = 1e-5, discrete: bool = False) -> float:
    """Central difference of the optical band; ``discrete`` selects the lattice band."""
    f = omega_discrete if discrete else omega_continuous
    return float((f(k + h, params, +1) - f(k - h, params, +1)) / (2 * h))


def nls_coefficients(k: float, params: ModelParams) -> NLSCoefficients:
    w = float(omega_continuous(k, params, +1))
    scale = params.J + params.coupling
    if w <= 1e-14 * scale:
        raise SingularCarrierError(f"optical frequency {w:.3g} vanishes at k={k}")
    P = params.coupling**2
    vg = group_velocity(k, params)
    denom = w * (w * w + P)
    c1 = (params.J * params.d**2 * w**3 + P * vg * vg) / denom
    c2 = 2 * params.Omega**4 * params.N / denom
    return NLSCoefficients(c1=c1, c2=c2, k=float(k), omega_plus=w, v_g=vg)


def soliton_envelope(chi, t, spec: SolitonSpec):
    """Bright soliton of the envelope equation, vectorized over ``chi`` and ``t``."""
    c1 = spec.coeffs.c1
    eta, sigma = spec.eta, spec.sigma
    chi = np.asarray(chi, dtype=float)
    t = np.asarray(t, dtype=float)
    arg = eta * (chi - 2 * c1 * sigma * t) - spec.nu
    phase = sigma * chi - c1 * (sigma**2 - eta**2) * t + spec.phi0
    return spec.amplitude / np.cosh(arg) * np.exp(1j * phase)


# -- spectral estimation ---------------------------------------------------


@dataclass(frozen=True)
class Spectrum:
    peaks: list  # (omega, power), strongest first
    resolution: float  # bin spacing 2*pi/T before zero padding


def _uniform_prefix(t: np.ndarray) -> int:
    """Length of the leading uniformly spaced run of sample times."""
    if t.size < 3:
        return t.size
    step = t[1] - t[0]
    ok = np.abs(np.diff(t) - step) <= 1e-9 * max(abs(step), 1.0)
    bad = np.flatnonzero(~ok)
    return t.size if bad.size == 0 else int(bad[0]) + 1


def measure_spectrum(
    trajectory,
    site: int,
    field: str = "alpha",
    pad: int = 8,
    min_rel_power: float = 1e-3,
    max_peaks: int = 4,
) -> Spectrum:
    """Dominant angular frequencies of one site's amplitude.

    Frequencies follow the ``exp(-i omega t)`` convention of the lattice bands.
    The signal is Hann-windowed and zero-padded; each local maximum of the power
    spectrum above ``min_rel_power`` of the strongest is refined by a parabola
    through the log-power of its three neighbouring bins.
    """
    t = np.asarray(trajectory.t)
    n = _uniform_prefix(t)
    if n < 16:
        raise ShortTrajectoryError(f"need at least 16 uniform samples, got {n}")
    t = t[:n]
    x = np.asarray(getattr(trajectory, field))[:n, site]
    dt = t[1] - t[0]
    win = np.hanning(n)
    nfft = int(pad) * n
    spec = np.fft.fft(x * win, nfft)
    power = np.abs(spec) ** 2
    omega_grid = -2 * np.pi * np.fft.fftfreq(nfft, dt)
    top = power.max()
    if top == 0:
        return Spectrum([], 2 * np.pi / (n * dt))
    left = np.roll(power, 1)
    right = np.roll(power, -1)
    cand = np.flatnonzero((power > left) & (power >= right) & (power >= min_rel_power * top))
    cand = cand[np.argsort(power[cand])[::-1]][:max_peaks]
    step = -2 * np.pi / (nfft * dt)  # d(omega)/d(bin); omega falls with bin index
    peaks = []
    for i in cand:
        lp, cp, rp = (np.log(power[(i + s) % nfft]) for s in (-1, 0, 1))
        den = lp - 2 * cp + rp
        off = 0.5 * (lp - rp) / den if den != 0 else 0.0
        peaks.append((float(omega_grid[i] + off * step), float(power[i])))
    return Spectrum(peaks, 2 * np.pi / (n * dt))


# -- packet statistics -----------------------------------------------------


def _intensity(state_or_alpha):
    a = state_or_alpha.alpha if isinstance(state_or_alpha, LatticeState) else state_or_alpha
    inten = np.abs(np.asarray(a)) ** 2
    tot = inten.sum()
    if tot == 0:
        raise DegenerateFieldError("all-zero field")
    return inten, tot


def packet_center(state, d: float = 1.0) -> float:
    """Intensity-weighted mean position of the cavity field (length units)."""
    inten, tot = _intensity(state)
    x = np.arange(inten.size) * d
    return float(np.dot(x, inten) / tot)


def packet_width(state, d: float = 1.0) -> float:
    """RMS extent of the cavity intensity about its center."""
    inten, tot = _intensity(state)
    x = np.arange(inten.size) * d
    c = np.dot(x, inten) / tot
    return float(math.sqrt(np.dot((x - c) ** 2, inten) / tot))


@dataclass(frozen=True)
class SechFit:
    amplitude: float
    width: float
    center: float
    fit_error: float

    def __iter__(self):
        return iter((self.amplitude, self.width, self.center, self.fit_error))


def _sech_model(x, A, x0, w):
    return A / np.cosh((x - x0) / w)


def fit_sech(state, carrier_k: float = 0.0, d: float = 1.0, window=None) -> SechFit:
    """Least-squares fit of ``A sech((x - x0)/w)`` to the demodulated cavity envelope.

    ``window`` restricts the fit to a site slice ``(lo, hi)``. ``fit_error`` is the
    residual norm relative to the norm of the fitted samples.
    """
    a = state.alpha if isinstance(state, LatticeState) else np.asarray(state)
    x = np.arange(a.size) * d
    env = np.abs(a * np.exp(-1j * carrier_k * x))
    if window is not None:
        lo, hi = window
        x, env = x[lo:hi], env[lo:hi]
    norm = np.linalg.norm(env)
    if norm == 0:
        raise DegenerateFieldError("all-zero field")
    i = int(np.argmax(env))
    inten = env**2
    c = np.dot(x, inten) / inten.sum()
    rms = math.sqrt(np.dot((x - c) ** 2, inten) / inten.sum())
    p0 = (env[i], x[i], max(rms * math.sqrt(12) / math.pi, 0.5 * d))
    popt, _ = curve_fit(_sech_model, x, env, p0=p0, maxfev=20000)
    A, x0, w = popt
    err = np.linalg.norm(_sech_model(x, *popt) - env) / norm
    return SechFit(float(A), float(abs(w)), float(x0), float(err))
