"""Exact quantum dynamics of small cavity arrays with collective Dicke ensembles.

Each site carries a photon mode truncated at ``n_max`` and the symmetric Dicke
multiplet of ``N`` atoms (spin S = N/2, local excitation number e = m + S in
``0..N``). The atom-cavity coupling only involves collective operators, so the
dynamics never leaves the symmetric sector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .model import PERIODIC, ModelParams

MAX_DIM = 20000
DENSE_DIM = 2000


class OracleOverflow(ValueError):
    """Hilbert space larger than the desk-scale bound."""


class TruncationError(ValueError):
    pass


class PropagationError(RuntimeError):
    pass


def dicke_ladder_elements(N: int, m, sign: int = +1) -> float:
    """<S, m+sign| S^sign |S, m> for spin S = N/2."""
    S = Fraction(N, 2)
    m = Fraction(m)
    if abs(m) > S or (m + S).denominator != 1:
        raise ValueError(f"m={m} is not a weight of spin {S}")
    val = S * (S + 1) - m * (m + sign)
    return math.sqrt(max(val, 0))


def _lowering(dim: int) -> sp.csr_matrix:
    return sp.diags(np.sqrt(np.arange(1, dim, dtype=float)), 1, format="csr")


def _dicke_minus(N: int) -> sp.csr_matrix:
    e = np.arange(1, N + 1)
    return sp.diags(np.sqrt(e * (N - e + 1.0)), 1, format="csr")


@dataclass(frozen=True)
class QuantumBasis:
    M: int
    n_max: int
    N: int

    def __post_init__(self):
        if self.M < 1 or self.n_max < 0 or self.N < 1:
            raise ValueError("need M >= 1, n_max >= 0, N >= 1")
        if self.dim > MAX_DIM:
            raise OracleOverflow(f"dimension {self.dim} exceeds {MAX_DIM}")

    @property
    def local_dim(self) -> int:
        return (self.n_max + 1) * (self.N + 1)

    @property
    def dim(self) -> int:
        return self.local_dim**self.M

    def index(self, occupations) -> int:
        """Global index of ``[(n_0, e_0), (n_1, e_1), ...]``; site 0 is most significant."""
        idx = 0
        for n, e in occupations:
            if not (0 <= n <= self.n_max and 0 <= e <= self.N):
                raise IndexError(f"({n}, {e}) outside the local basis")
            idx = idx * self.local_dim + n * (self.N + 1) + e
        return idx

    def occupations(self, idx: int):
        out = []
        for _ in range(self.M):
            idx, loc = divmod(idx, self.local_dim)
            out.append(divmod(loc, self.N + 1))
        return out[::-1]

    def _embed(self, local: sp.spmatrix, site: int) -> sp.csr_matrix:
        left = sp.identity(self.local_dim**site, format="csr")
        right = sp.identity(self.local_dim ** (self.M - site - 1), format="csr")
        return sp.kron(sp.kron(left, local), right, format="csr")

    @cached_property
    def _photon_ops(self):
        a = sp.kron(_lowering(self.n_max + 1), sp.identity(self.N + 1), format="csr")
        return [self._embed(a, j) for j in range(self.M)]

    @cached_property
    def _spin_ops(self):
        sm = sp.kron(sp.identity(self.n_max + 1), _dicke_minus(self.N), format="csr")
        sz = sp.kron(
            sp.identity(self.n_max + 1), sp.diags(np.arange(self.N + 1) - self.N / 2), format="csr"
        )
        return [(self._embed(sm, j), self._embed(sz, j)) for j in range(self.M)]

    def a(self, j: int) -> sp.csr_matrix:
        return self._photon_ops[j]

    def number(self, j: int) -> sp.csr_matrix:
        a = self.a(j)
        return (a.T @ a).tocsr()

    def s_minus(self, j: int) -> sp.csr_matrix:
        return self._spin_ops[j][0]

    def s_plus(self, j: int) -> sp.csr_matrix:
        return self._spin_ops[j][0].T.tocsr()

    def s_z(self, j: int) -> sp.csr_matrix:
        return self._spin_ops[j][1]

    def total_excitation(self) -> sp.csr_matrix:
        """Sum over sites of photons plus atomic excitations, a^+a + S_z + N/2."""
        ident = sp.identity(self.dim, format="csr")
        out = sp.csr_matrix((self.dim, self.dim))
        for j in range(self.M):
            out = out + self.number(j) + self.s_z(j) + (self.N / 2) * ident
        return out.tocsr()

    def cutoff_population(self, psi: np.ndarray) -> float:
        """Largest probability, over sites, of the photon cutoff level n_max."""
        probs = np.abs(psi) ** 2
        worst = 0.0
        for j in range(self.M):
            n = np.rint(self.number(j).diagonal())
            worst = max(worst, float(probs[n == self.n_max].sum()))
        return worst


@dataclass
class QuantumState:
    psi: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.psi = np.asarray(self.psi, dtype=complex)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.psi))


def _bonds(params: ModelParams):
    M = params.M
    if M == 1:
        return []
    if params.boundary == PERIODIC:
        return [(j, (j + 1) % M) for j in range(M)]
    return [(j, j + 1) for j in range(M - 1)]


def build_hamiltonian(params: ModelParams, basis: QuantumBasis) -> sp.csr_matrix:
    """Sparse H = sum_j [-J a_j a^+_{j+1} + Omega a^+_j S^-_j] + h.c.

    Photon creation past ``n_max`` is dropped by the truncated ladder matrices.
    """
    if (basis.M, basis.N) != (params.M, params.N):
        raise ValueError("basis and params disagree on M or N")
    half = sp.csr_matrix((basis.dim, basis.dim), dtype=float)
    for j, k in _bonds(params):
        half = half - params.J * (basis.a(j) @ basis.a(k).T)
    for j in range(params.M):
        half = half + params.Omega * (basis.a(j).T @ basis.s_minus(j))
    H = half + half.T.conj()
    H.eliminate_zeros()
    return H.tocsr()


def _lanczos_expm(H, v, t, m_max=40, tol=1e-12):
    """exp(-iHt) v for Hermitian H by Lanczos projection with adaptive substeps."""
    psi = np.asarray(v, dtype=complex)
    sign = 1.0 if t > 0 else -1.0
    left = h = abs(t)
    while left > 1e-15 * abs(t):
        h = min(h, left)
        nrm = np.linalg.norm(psi)
        V = [psi / nrm]
        diag, off = [], []
        for j in range(m_max):
            w = H @ V[j]
            diag.append(np.vdot(V[j], w).real)
            w = w - diag[j] * V[j]
            if j:
                w = w - off[j - 1] * V[j - 1]
            for u in V:  # full reorthogonalization, cheap at this subspace size
                w = w - np.vdot(u, w) * u
            off.append(np.linalg.norm(w))
            if off[j] < 1e-12 * (abs(diag[j]) + 1):
                break
            if j < m_max - 1:
                V.append(w / off[j])
        m = len(diag)
        T = np.diag(diag) + np.diag(off[: m - 1], 1) + np.diag(off[: m - 1], -1)
        evals, U = np.linalg.eigh(T)
        while True:
            coef = U @ (np.exp(-1j * sign * evals * h) * U[0])
            if off[m - 1] * abs(coef[-1]) <= tol:
                break
            h /= 2
            if h < 1e-14 * abs(t):
                raise PropagationError("Lanczos propagation failed to converge")
        psi = nrm * (np.array(V[:m]).T @ coef)
        left -= h
    return psi


def evolve_quantum(psi0: QuantumState, H, t: float, method: str = "auto") -> QuantumState:
    """Schrodinger propagation exp(-iHt) psi0 (dense eigensolver or Lanczos)."""
    if abs(psi0.norm - 1) > 1e-10:
        raise ValueError("initial state must be normalized")
    if t == 0:
        return QuantumState(psi0.psi.copy(), psi0.t)
    dim = H.shape[0]
    if method == "auto":
        method = "dense" if dim <= DENSE_DIM else "krylov"
    if method == "dense":
        evals, evecs = _eigh(H)
        psi = evecs @ (np.exp(-1j * evals * t) * (evecs.conj().T @ psi0.psi))
    elif method == "krylov":
        psi = _lanczos_expm(H, psi0.psi, t)
    else:
        raise ValueError(f"unknown method {method!r}")
    if abs(np.linalg.norm(psi) - 1) > 1e-10:
        raise PropagationError("norm not preserved")
    return QuantumState(psi, psi0.t + t)


def _eigh(H):
    dense = H.toarray() if sp.issparse(H) else np.asarray(H)
    return np.linalg.eigh(dense)


def evolve_series(psi0: QuantumState, H, times) -> list[QuantumState]:
    """States at each of ``times`` (relative to psi0.t), one eigendecomposition."""
    evals, evecs = _eigh(H)
    c0 = evecs.conj().T @ psi0.psi
    return [QuantumState(evecs @ (np.exp(-1j * evals * t) * c0), psi0.t + t) for t in times]


def expectation(operator, state) -> complex:
    psi = state.psi if isinstance(state, QuantumState) else np.asarray(state)
    return complex(np.vdot(psi, operator @ psi))


def glauber_amplitudes(alpha: complex, n_max: int, trunc_tol: float = 1e-8) -> np.ndarray:
    n = np.arange(n_max + 1)
    if alpha == 0:
        return (n == 0).astype(complex)
    logfact = np.array([math.lgamma(k + 1) for k in n])
    mag = np.exp(-abs(alpha) ** 2 / 2 + n * math.log(abs(alpha)) - logfact / 2)
    c = mag * np.exp(1j * n * np.angle(alpha))
    lost = 1.0 - float(np.sum(np.abs(c) ** 2))
    if lost > trunc_tol:
        raise TruncationError(f"coherent state |{alpha}> loses {lost:.2e} above n_max={n_max}")
    return c / np.linalg.norm(c)


def spin_coherent_amplitudes(beta: complex, N: int) -> np.ndarray:
    """Dicke amplitudes (index e = m + S) of the spin-coherent state matching HP amplitude beta.

    The excitation fraction sin^2(theta/2) equals |beta|^2/N, so that
    <S^-> = sqrt(N) sqrt(1 - |beta|^2/N) beta.
    """
    x = abs(beta) ** 2 / N
    if x > 1:
        raise ValueError("|beta|^2 exceeds N")
    e = np.arange(N + 1)
    if x == 0:
        return (e == 0).astype(complex)
    if x == 1:
        return (e == N).astype(complex) * np.exp(1j * N * np.angle(beta))
    log_binom = np.array([math.lgamma(N + 1) - math.lgamma(k + 1) - math.lgamma(N - k + 1) for k in e])
    mag = np.exp(0.5 * log_binom + 0.5 * e * math.log(x) + 0.5 * (N - e) * math.log1p(-x))
    return mag * np.exp(1j * e * np.angle(beta))


def coherent_spin_coherent_state(alpha0, beta0, basis: QuantumBasis, trunc_tol: float = 1e-8) -> QuantumState:
    """Product of truncated Glauber states and spin-coherent states, one pair per site."""
    alpha0 = np.broadcast_to(np.asarray(alpha0, dtype=complex), (basis.M,))
    beta0 = np.broadcast_to(np.asarray(beta0, dtype=complex), (basis.M,))
    psi = np.ones(1, dtype=complex)
    for a, b in zip(alpha0, beta0):
        local = np.kron(glauber_amplitudes(a, basis.n_max, trunc_tol), spin_coherent_amplitudes(b, basis.N))
        psi = np.kron(psi, local)
    return QuantumState(psi / np.linalg.norm(psi))
