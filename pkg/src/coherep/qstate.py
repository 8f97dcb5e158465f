"""Density matrices and the entropic functionals built on them.

All entropies are in nats.  Eigenvalues at or below ``EPS_SUPP`` are treated
as exact zeros, so ``0 ln 0 = 0``.  A relative entropy or KL divergence with
a support violation is ``math.inf``, never NaN and never an exception.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from . import linalg
from .errors import DimensionMismatch, InvalidState, NonFiniteBeta
from .linalg import SpectralHamiltonian, dagger, hermitian_eigendecomposition

EPS_SUPP = 1e-14
STATE_TOL = 1e-10
POP_TOL = 1e-12
# Weight of rho outside supp(sigma) above which S(rho||sigma) is infinite.
SUPPORT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Unit-trace positive semidefinite Hermitian matrix.

    Eigenvalues in ``[-1e-10, 0)`` are clamped to zero and the state is
    renormalised; anything more negative is rejected.
    """

    matrix: np.ndarray

    def __post_init__(self):
        M = self.matrix.matrix if isinstance(self.matrix, DensityMatrix) else self.matrix
        M = np.array(M, dtype=complex)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise InvalidState(f"density matrix must be square, got shape {M.shape}")
        if not np.all(np.isfinite(M)):
            raise InvalidState("density matrix has non-finite entries")
        herm = linalg.max_norm(M - dagger(M))
        if herm > STATE_TOL:
            raise InvalidState(f"not Hermitian (residual {herm:.2e})")
        M = (M + dagger(M)) / 2
        tr = np.trace(M).real
        if abs(tr - 1.0) > STATE_TOL:
            raise InvalidState(f"trace is {tr!r}, expected 1")
        w, v = np.linalg.eigh(M)
        if w[0] < -STATE_TOL:
            raise InvalidState(f"negative eigenvalue {w[0]:.3e}")
        if w[0] < 0:
            w = np.clip(w, 0.0, None)
            w /= w.sum()
            M = (v * w) @ dagger(v)
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


def as_state(rho) -> DensityMatrix:
    return rho if isinstance(rho, DensityMatrix) else DensityMatrix(rho)


def pure_state(psi) -> DensityMatrix:
    psi = np.asarray(psi, dtype=complex).ravel()
    psi = psi / np.linalg.norm(psi)
    return DensityMatrix(np.outer(psi, psi.conj()))


def basis_state(d: int, n: int) -> DensityMatrix:
    psi = np.zeros(d)
    psi[n] = 1.0
    return pure_state(psi)


def plus_state(d: int = 2) -> DensityMatrix:
    """Uniform superposition of the ``d`` computational basis states."""
    return pure_state(np.ones(d))


def random_density_matrix(d: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    """Ginibre-distributed density matrix (full rank unless ``rank`` is given)."""
    k = d if rank is None else rank
    G = rng.standard_normal((d, k)) + 1j * rng.standard_normal((d, k))
    M = G @ dagger(G)
    return DensityMatrix(M / np.trace(M).real)


def population_vector(p) -> np.ndarray:
    """Validate a probability vector; entries in ``[-1e-12, 0)`` become 0."""
    p = np.asarray(p, dtype=float).copy()
    if p.ndim != 1:
        raise InvalidState("population vector must be one-dimensional")
    if np.any(p < -POP_TOL):
        raise InvalidState(f"negative population {p.min():.3e}")
    p[p < 0] = 0.0
    if abs(p.sum() - 1.0) > STATE_TOL:
        raise InvalidState(f"populations sum to {p.sum()!r}")
    return p


def populations(rho, H) -> np.ndarray:
    """Diagonal of ``rho`` in the eigenbasis of ``H``."""
    H = hermitian_eigendecomposition(H)
    R = np.asarray(rho.matrix if isinstance(rho, DensityMatrix) else rho)
    if R.shape != (H.dim, H.dim):
        raise DimensionMismatch(f"state of shape {R.shape} vs Hamiltonian of dim {H.dim}")
    p = np.real(np.einsum("in,ij,jn->n", H.eigenvectors.conj(), R, H.eigenvectors))
    p[(p < 0) & (p >= -POP_TOL)] = 0.0
    return p


def _check_beta(beta) -> float:
    beta = float(beta)
    if not math.isfinite(beta) or beta <= 0:
        raise NonFiniteBeta(f"beta must be positive and finite, got {beta!r}")
    return beta


def gibbs_populations(H, beta: float) -> tuple[np.ndarray, float]:
    """Thermal populations ``exp(-beta E_n) / Z`` and ``ln Z``."""
    H = hermitian_eigendecomposition(H)
    beta = _check_beta(beta)
    x = -beta * H.eigenvalues
    shift = x.max()
    w = np.exp(x - shift)
    z = w.sum()
    return w / z, float(shift + math.log(z))


def gibbs_state(H, beta: float, return_log_z: bool = False):
    """Gibbs state ``exp(-beta H) / Z``; optionally also ``ln Z``."""
    H = hermitian_eigendecomposition(H)
    q, log_z = gibbs_populations(H, beta)
    rho = DensityMatrix(H.from_eigenbasis(np.diag(q)))
    return (rho, log_z) if return_log_z else rho


def shannon_entropy(p) -> float:
    p = np.asarray(p, dtype=float)
    p = p[p > EPS_SUPP]
    return float(-np.sum(p * np.log(p)))


def von_neumann_entropy(rho) -> float:
    return shannon_entropy(as_state(rho).eigenvalues)


def quantum_relative_entropy(rho, sigma) -> float:
    """``S(rho||sigma) = tr(rho ln rho - rho ln sigma)``, or ``inf``.

    The result is infinite when ``rho`` puts more than ``SUPPORT_TOL`` weight
    outside the support of ``sigma``.
    """
    rho, sigma = as_state(rho), as_state(sigma)
    if rho.dim != sigma.dim:
        raise DimensionMismatch(f"dimensions {rho.dim} and {sigma.dim} differ")
    w, V = np.linalg.eigh(sigma.matrix)
    diag = np.real(np.einsum("ik,ij,jk->k", V.conj(), rho.matrix, V))
    support = w > EPS_SUPP
    if diag[~support].sum() > SUPPORT_TOL:
        return math.inf
    cross = float(np.sum(diag[support] * np.log(w[support])))
    return -von_neumann_entropy(rho) - cross


def kl_divergence(p, q) -> float:
    """Kullback-Leibler divergence ``sum p ln(p/q)``, or ``inf``."""
    p, q = population_vector(p), population_vector(q)
    if p.shape != q.shape:
        raise DimensionMismatch(f"lengths {p.size} and {q.size} differ")
    mask = p > EPS_SUPP
    if np.any(q[mask] <= EPS_SUPP):
        return math.inf
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def relative_entropy_of_coherence(rho, H) -> float:
    """``C(rho) = S(Delta_H(rho)) - S(rho)`` with ``Delta_H`` the dephasing map."""
    rho = as_state(rho)
    return von_neumann_entropy(linalg.dephase(rho.matrix, H)) - von_neumann_entropy(rho)


class FreeEnergySplit(NamedTuple):
    F: float
    F_eq: float
    T_kl: float
    T_coherence: float


def free_energy(rho, H, beta: float) -> float:
    """Non-equilibrium free energy ``tr(H rho) - T S(rho)``."""
    rho = as_state(rho)
    H = hermitian_eigendecomposition(H)
    energy = float(np.real(np.trace(H.matrix @ rho.matrix)))
    return energy - von_neumann_entropy(rho) / _check_beta(beta)


def free_energy_decomposition(rho, H, beta: float) -> FreeEnergySplit:
    """Split ``F = F_eq + T KL(p||p_eq) + T C(rho)``."""
    rho = as_state(rho)
    H = hermitian_eigendecomposition(H)
    q, log_z = gibbs_populations(H, beta)
    T = 1.0 / beta
    return FreeEnergySplit(
        F=free_energy(rho, H, beta),
        F_eq=-T * log_z,
        T_kl=T * kl_divergence(populations(rho, H), q),
        T_coherence=T * relative_entropy_of_coherence(rho, H),
    )


def _check_bipartite(rho_SE: DensityMatrix, dims) -> None:
    if rho_SE.dim != dims[0] * dims[1]:
        raise DimensionMismatch(f"state of dim {rho_SE.dim} does not factor as {dims}")


def mutual_information(rho_SE, dims: tuple[int, int]) -> float:
    rho_SE = as_state(rho_SE)
    _check_bipartite(rho_SE, dims)
    rho_S = linalg.partial_trace(rho_SE.matrix, dims, keep="S")
    rho_E = linalg.partial_trace(rho_SE.matrix, dims, keep="E")
    return von_neumann_entropy(rho_S) + von_neumann_entropy(rho_E) - von_neumann_entropy(rho_SE)


def correlated_coherence(rho_SE, H_S, H_E) -> float:
    """Global coherence (w.r.t. ``H_S + H_E``) minus both local coherences."""
    rho_SE = as_state(rho_SE)
    H_S, H_E = hermitian_eigendecomposition(H_S), hermitian_eigendecomposition(H_E)
    dims = (H_S.dim, H_E.dim)
    _check_bipartite(rho_SE, dims)
    H_tot = linalg.composite_hamiltonian(H_S, H_E)
    rho_S = linalg.partial_trace(rho_SE.matrix, dims, keep="S")
    rho_E = linalg.partial_trace(rho_SE.matrix, dims, keep="E")
    return (
        relative_entropy_of_coherence(rho_SE, H_tot)
        - relative_entropy_of_coherence(rho_S, H_S)
        - relative_entropy_of_coherence(rho_E, H_E)
    )


def trace_distance(rho, sigma) -> float:
    diff = np.asarray(rho.matrix if isinstance(rho, DensityMatrix) else rho) - np.asarray(
        sigma.matrix if isinstance(sigma, DensityMatrix) else sigma
    )
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh((diff + dagger(diff)) / 2))))
