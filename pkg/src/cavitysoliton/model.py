"""Lattice model: parameters, Holstein-Primakoff series, energy and equations of motion.

The semiclassical array is described by one cavity amplitude ``alpha[l]`` and one
Holstein-Primakoff (HP) boson amplitude ``beta[l]`` per site. The atomic nonlinearity
enters through the truncated series

    A(x) = sum_{l=0}^{L} c_l x**l,    x = |beta|**2 / N,

which approximates sqrt(1 - x). The equations of motion are the complex gradient
flow of the classical energy, ``i d(alpha, beta)/dt = dE/d(alpha*, beta*)``, so
energy and total norm are conserved at every truncation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import lru_cache

import numpy as np

MAX_HP_ORDER = 12

PERIODIC = "periodic"
OPEN = "open"
BOUNDARIES = (PERIODIC, OPEN)


class OrderOverflowError(ValueError):
    """Requested HP order beyond the exactly tabulated range."""


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of a homogeneous cavity array.

    Rates are in units of the hopping ``J`` by convention (``J = 1``), time in ``1/J``.
    ``M = 1`` is accepted as the single-cavity limit and has no hopping.
    """

    M: int
    N: int
    J: float = 1.0
    Omega: float = 10.0
    d: float = 1.0
    hp_order: int = 1
    boundary: str = PERIODIC

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"M must be a positive integer, got {self.M!r}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N!r}")
        if not (self.J >= 0 and self.Omega >= 0):
            raise ValueError("J and Omega must be non-negative")
        if not self.d > 0:
            raise ValueError("d must be positive")
        if not 1 <= self.hp_order <= MAX_HP_ORDER:
            raise ValueError(f"hp_order must lie in [1, {MAX_HP_ORDER}]")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}")

    @property
    def coupling(self) -> float:
        """Collective atom-cavity rate Omega*sqrt(N)."""
        return self.Omega * math.sqrt(self.N)

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


def hp_coefficient(l: int) -> Fraction:
    """Exact coefficient of x**l in the series of sqrt(1 - x)."""
    if l < 0:
        raise ValueError("order must be non-negative")
    if l > MAX_HP_ORDER:
        raise OrderOverflowError(f"HP order {l} exceeds {MAX_HP_ORDER}")
    num = math.factorial(2 * l)
    den = (1 - 2 * l) * (2**l * math.factorial(l)) ** 2
    return Fraction(num, den)


@dataclass(frozen=True)
class HPSeries:
    order: int
    coeffs: tuple[Fraction, ...]

    def __post_init__(self):
        c = np.array([float(q) for q in self.coeffs])
        object.__setattr__(self, "_c", c)
        object.__setattr__(self, "_dc", c[1:] * np.arange(1, len(c)))
        object.__setattr__(self, "_exponents", np.arange(len(c)))

    @property
    def float_coeffs(self) -> np.ndarray:
        return self._c.copy()

    def __call__(self, x):
        """Evaluate A(x) by Horner's rule."""
        return _horner(self._c, x)

    def derivative(self, x):
        return _horner(self._dc, x)

    def value_and_derivative(self, x):
        """A(x) and A'(x) for a 1-d array, sharing one table of powers of x."""
        powers = np.power.outer(x, self._exponents)
        return powers @ self._c, powers[:, :-1] @ self._dc


def _horner(c, x):
    x = np.asarray(x, dtype=float)
    out = np.full(x.shape, c[-1])
    for ci in c[-2::-1]:
        out *= x
        out += ci
    return out


@lru_cache(maxsize=None)
def hp_series(order: int) -> HPSeries:
    return HPSeries(order, tuple(hp_coefficient(l) for l in range(order + 1)))


@dataclass
class LatticeState:
    t: float
    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=complex)
        self.beta = np.asarray(self.beta, dtype=complex)
        if self.alpha.shape != self.beta.shape or self.alpha.ndim != 1:
            raise ValueError("alpha and beta must be 1-d arrays of equal length")

    @property
    def M(self) -> int:
        return self.alpha.size

    def copy(self) -> "LatticeState":
        return LatticeState(self.t, self.alpha.copy(), self.beta.copy())

    @classmethod
    def zeros(cls, M: int, t: float = 0.0) -> "LatticeState":
        return cls(t, np.zeros(M, complex), np.zeros(M, complex))

    def hp_load(self, N: int) -> float:
        """Largest |beta|^2/N over the array (HP validity indicator)."""
        return float(np.max(np.abs(self.beta) ** 2) / N)


def _check(state: LatticeState, params: ModelParams):
    if state.M != params.M:
        raise ValueError(f"state has {state.M} sites, params declare M={params.M}")


def neighbour_sum(alpha: np.ndarray, boundary: str) -> np.ndarray:
    """alpha[l+1] + alpha[l-1] under the boundary rule."""
    if alpha.size == 1:
        return np.zeros_like(alpha)
    if boundary == PERIODIC:
        nxt, prv = _ring_neighbours(alpha.size)
        return alpha[nxt] + alpha[prv]
    out = np.zeros_like(alpha)
    out[:-1] += alpha[1:]
    out[1:] += alpha[:-1]
    return out


@lru_cache(maxsize=64)
def _ring_neighbours(M: int):
    idx = np.arange(M)
    return (idx + 1) % M, (idx - 1) % M


def hopping_energy(alpha: np.ndarray, J: float, boundary: str) -> float:
    if alpha.size == 1:
        return 0.0
    if boundary == PERIODIC:
        bond = np.vdot(alpha, np.roll(alpha, -1))
    else:
        bond = np.vdot(alpha[:-1], alpha[1:])
    return float(-2.0 * J * bond.real)


def energy(state: LatticeState, params: ModelParams, linear: bool = False) -> float:
    """Classical energy: hopping plus the HP-dressed atom-cavity exchange.

    With ``linear=True`` the dressing factor A is replaced by 1.
    """
    _check(state, params)
    a, b = state.alpha, state.beta
    e = hopping_energy(a, params.J, params.boundary)
    if linear:
        dressed = b
    else:
        x = np.abs(b) ** 2 / params.N
        dressed = hp_series(params.hp_order)(x) * b
    e += 2.0 * params.coupling * float(np.vdot(dressed, a).real)
    return e


def total_norm(state: LatticeState) -> float:
    return float(np.sum(np.abs(state.alpha) ** 2) + np.sum(np.abs(state.beta) ** 2))


def eom_rhs(state: LatticeState, params: ModelParams, linear: bool = False):
    """Time derivatives (dalpha/dt, dbeta/dt) of the semiclassical lattice equations."""
    _check(state, params)
    return rhs_arrays(state.alpha, state.beta, params, linear)


def rhs_arrays(a, b, params: ModelParams, linear: bool = False):
    g = params.coupling
    hop = -params.J * neighbour_sum(a, params.boundary)
    if linear:
        return -1j * (hop + g * b), -1j * (g * a)
    N = params.N
    x = (b * b.conj()).real / N
    A, dA = hp_series(params.hp_order).value_and_derivative(x)
    da = -1j * (hop + g * A * b)
    db = (-1j * g) * ((A + x * dA) * a + (dA / N) * (b * b) * a.conj())
    return da, db


def eom_rhs_first_order(state: LatticeState, params: ModelParams):
    """Closed form of the O(1/N) equations, kept as an independent check of eom_rhs."""
    a, b = state.alpha, state.beta
    N, Om, J = params.N, params.Omega, params.J
    sq = math.sqrt(N)
    hop = -J * neighbour_sum(a, params.boundary)
    da = -1j * (hop + Om * sq * (b - np.abs(b) ** 2 * b / (2 * N)))
    db = -1j * (Om * sq * a - Om / (2 * sq) * (b**2 * np.conj(a) + 2 * a * np.abs(b) ** 2))
    return da, db
