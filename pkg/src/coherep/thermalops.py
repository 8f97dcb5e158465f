"""Thermal operations: energy-conserving unitaries acting on a system and a
Gibbs environment, their reduced channels and the entropic bookkeeping.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from . import linalg, qstate
from .davies import check_bohr_frequencies
from .errors import (
    DegenerateBohrFrequencies,
    DimensionMismatch,
    NonCommutingPotential,
    TrivialOperationWarning,
)
from .linalg import SpectralHamiltonian, dagger, hermitian_eigendecomposition
from .qstate import DensityMatrix

UNITARITY_TOL = 1e-10
COMMUTATOR_RTOL = 1e-9
MAX_COMPOSITE_DIM = 64


def _product_energy_basis(H_S: SpectralHamiltonian, H_E: SpectralHamiltonian):
    """Composite energies ``E_n + E_mu`` and the product eigenvectors, in
    ``n * d_E + mu`` order, plus the degeneracy blocks of the sum."""
    energies = np.add.outer(H_S.eigenvalues, H_E.eigenvalues).ravel()
    B = np.kron(H_S.eigenvectors, H_E.eigenvectors)
    order = np.argsort(energies, kind="stable")
    blocks = tuple(tuple(int(order[i]) for i in g) for g in linalg.degeneracy_groups(energies[order]))
    return energies, B, blocks


@dataclass(frozen=True, eq=False)
class ThermalOperation:
    """Energy-conserving unitary ``U`` on system (x) environment.

    Construction checks ``||U^dag U - 1||_max <= 1e-10`` and
    ``||[U, H_S + H_E]||_max <= 1e-9 ||H_S + H_E||_max``.
    """

    H_S: SpectralHamiltonian
    H_E: SpectralHamiltonian
    beta: float
    U: np.ndarray
    rho_E_eq: DensityMatrix = field(init=False)
    H_total: SpectralHamiltonian = field(init=False)
    blocks: tuple[tuple[int, ...], ...] = field(init=False)

    def __post_init__(self):
        H_S = hermitian_eigendecomposition(self.H_S)
        H_E = hermitian_eigendecomposition(self.H_E)
        object.__setattr__(self, "H_S", H_S)
        object.__setattr__(self, "H_E", H_E)
        d = H_S.dim * H_E.dim
        if d > MAX_COMPOSITE_DIM:
            raise DimensionMismatch(f"composite dimension {d} exceeds the cap of {MAX_COMPOSITE_DIM}")
        U = np.array(self.U, dtype=complex)
        if U.shape != (d, d):
            raise DimensionMismatch(f"unitary of shape {U.shape} for composite dimension {d}")
        err = linalg.max_norm(dagger(U) @ U - np.eye(d))
        if err > UNITARITY_TOL:
            raise ValueError(f"U is not unitary (residual {err:.3e})")
        H_tot = linalg.composite_hamiltonian(H_S, H_E)
        comm = linalg.max_norm(U @ H_tot.matrix - H_tot.matrix @ U)
        if comm > COMMUTATOR_RTOL * max(linalg.max_norm(H_tot.matrix), 1e-300):
            raise ValueError(f"U does not conserve H_S + H_E (commutator {comm:.3e})")
        U.setflags(write=False)
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "H_total", H_tot)
        object.__setattr__(self, "blocks", _product_energy_basis(H_S, H_E)[2])
        object.__setattr__(self, "rho_E_eq", qstate.gibbs_state(H_E, self.beta))

    @property
    def dims(self) -> tuple[int, int]:
        return self.H_S.dim, self.H_E.dim

    @property
    def q(self) -> np.ndarray:
        """Thermal populations of the environment levels."""
        return qstate.gibbs_populations(self.H_E, self.beta)[0]

    @property
    def is_trivial(self) -> bool:
        return all(len(b) == 1 for b in self.blocks)


def _haar_unitary(k: int, rng: np.random.Generator) -> np.ndarray:
    Z = (rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))) / math.sqrt(2)
    Q, R = np.linalg.qr(Z)
    d = np.diagonal(R)
    return Q * (d / np.abs(d))


def random_energy_conserving_unitary(H_S, H_E, seed, beta: float = 1.0) -> ThermalOperation:
    """Haar-random unitary inside every degenerate block of ``H_S + H_E``.

    One-dimensional blocks get the identity.  A
    :class:`TrivialOperationWarning` is emitted when there is no block of
    dimension two or more.
    """
    H_S, H_E = hermitian_eigendecomposition(H_S), hermitian_eigendecomposition(H_E)
    _, B, blocks = _product_energy_basis(H_S, H_E)
    rng = np.random.default_rng(seed)
    D = np.eye(B.shape[0], dtype=complex)
    for blk in blocks:
        if len(blk) > 1:
            idx = np.array(blk)
            D[np.ix_(idx, idx)] = _haar_unitary(len(blk), rng)
    if all(len(b) == 1 for b in blocks):
        warnings.warn("no resonant transitions: the thermal operation is trivial", TrivialOperationWarning, stacklevel=2)
    return ThermalOperation(H_S, H_E, beta, B @ D @ dagger(B))


def from_potential(H_S, H_E, V, t: float, beta: float) -> ThermalOperation:
    """``U = exp(-i (H_S + H_E + V) t)`` for a potential commuting with ``H_S + H_E``."""
    H_S, H_E = hermitian_eigendecomposition(H_S), hermitian_eigendecomposition(H_E)
    H_tot = linalg.composite_hamiltonian(H_S, H_E)
    V = linalg.check_hermitian(V)
    if V.shape != H_tot.matrix.shape:
        raise DimensionMismatch(f"potential of shape {V.shape} for composite dimension {H_tot.dim}")
    comm = linalg.max_norm(V @ H_tot.matrix - H_tot.matrix @ V)
    tol = COMMUTATOR_RTOL * max(linalg.max_norm(H_tot.matrix), linalg.max_norm(V), 1.0)
    if comm > tol:
        raise NonCommutingPotential(comm, tol)
    return ThermalOperation(H_S, H_E, beta, linalg.unitary_from_generator(H_tot.matrix + V, t))


def identity_operation(H_S, H_E, beta: float) -> ThermalOperation:
    H_S, H_E = hermitian_eigendecomposition(H_S), hermitian_eigendecomposition(H_E)
    return ThermalOperation(H_S, H_E, beta, np.eye(H_S.dim * H_E.dim))


def _exchange_operators(H_S: SpectralHamiltonian, H_E: SpectralHamiltonian):
    if H_S.dim != H_E.dim or not np.allclose(H_S.eigenvalues, H_E.eigenvalues, rtol=0, atol=1e-9):
        raise ValueError("swap operations need system and environment with identical spectra")
    d = H_S.dim
    B = np.kron(H_S.eigenvectors, H_E.eigenvectors)
    P = np.zeros((d * d, d * d))
    for n in range(d):
        for mu in range(d):
            P[mu * d + n, n * d + mu] = 1.0
    X = P - np.diag([1.0 if i // d == i % d else 0.0 for i in range(d * d)])
    return B, P, X


def swap_operation(H_S, H_E, beta: float) -> ThermalOperation:
    """Exchange the system and environment states (identical spectra only)."""
    H_S, H_E = hermitian_eigendecomposition(H_S), hermitian_eigendecomposition(H_E)
    B, P, _ = _exchange_operators(H_S, H_E)
    return ThermalOperation(H_S, H_E, beta, B @ P @ dagger(B))


def partial_swap_operation(H_S, H_E, beta: float, theta: float) -> ThermalOperation:
    """``exp(-i theta X)`` with ``X`` the exchange of distinct energy levels.

    For two qubits ``X = |01><10| + |10><01|``, so ``theta`` is the rotation
    angle inside the resonant block.
    """
    H_S, H_E = hermitian_eigendecomposition(H_S), hermitian_eigendecomposition(H_E)
    B, _, X = _exchange_operators(H_S, H_E)
    return ThermalOperation(H_S, H_E, beta, B @ linalg.unitary_from_generator(X, theta) @ dagger(B))


class ThermalOutput(NamedTuple):
    rho_SE: DensityMatrix
    rho_S: DensityMatrix
    rho_E: DensityMatrix


def apply(op: ThermalOperation, rho_S) -> ThermalOutput:
    """``rho'_SE = U (rho_S (x) rho_E^eq) U^dag`` and its two marginals."""
    rho_S = qstate.as_state(rho_S)
    if rho_S.dim != op.H_S.dim:
        raise DimensionMismatch(f"state of dim {rho_S.dim} for a {op.H_S.dim}-level system")
    joint = op.U @ np.kron(rho_S.matrix, op.rho_E_eq.matrix) @ dagger(op.U)
    return ThermalOutput(
        DensityMatrix(joint),
        DensityMatrix(linalg.partial_trace(joint, op.dims, keep="S")),
        DensityMatrix(linalg.partial_trace(joint, op.dims, keep="E")),
    )


@dataclass(frozen=True, eq=False)
class ChannelSummary:
    """Reduced description of a thermal operation on the system.

    ``kraus[(mu, nu)]`` is ``sqrt(q_mu) <nu|U|mu>`` in the computational basis.
    ``Q[m, n]`` and ``alpha[n, m]`` are expressed in the eigenbasis of ``H_S``;
    ``alpha`` is ``None`` when ``H_S`` has degenerate Bohr frequencies.
    """

    kraus: dict
    Q: np.ndarray
    alpha: np.ndarray | None

    def completeness_residual(self) -> float:
        M = next(iter(self.kraus.values()))
        total = sum(dagger(K) @ K for K in self.kraus.values())
        return linalg.max_norm(total - np.eye(M.shape[0]))

    def coherence_bound_violations(self, tol: float = 1e-10) -> list[tuple[int, int, float]]:
        """Pairs with ``|alpha_nm|^2 > Q(n|n) Q(m|m) + tol`` and the excess."""
        if self.alpha is None:
            return []
        d = self.Q.shape[0]
        diag = np.diagonal(self.Q)
        out = []
        for n in range(d):
            for m in range(d):
                if n != m:
                    excess = abs(self.alpha[n, m]) ** 2 - diag[n] * diag[m]
                    if excess > tol:
                        out.append((n, m, float(excess)))
        return out


def _has_degenerate_bohr(H: SpectralHamiltonian) -> bool:
    try:
        check_bohr_frequencies(H)
    except DegenerateBohrFrequencies:
        return True
    return False


def channel_summary(op: ThermalOperation) -> ChannelSummary:
    """Kraus operators, population transition matrix and coherence factors."""
    dS, dE = op.dims
    q = op.q
    T = op.U.reshape(dS, dE, dS, dE)
    VE = op.H_E.eigenvectors
    # <nu|U|mu> as a system operator, nu and mu in the eigenbasis of H_E
    blocks = np.einsum("bn,ibjc,cm->nmij", VE.conj(), T, VE)
    kraus = {(mu, nu): math.sqrt(q[mu]) * blocks[nu, mu] for mu in range(dE) for nu in range(dE)}
    VS = op.H_S.eigenvectors
    Ms = np.array([dagger(VS) @ K for K in kraus.values()]) @ VS
    Q = np.sum(np.abs(Ms) ** 2, axis=0)
    alpha = None
    if not _has_degenerate_bohr(op.H_S):
        diag = np.diagonal(Ms, axis1=1, axis2=2)
        alpha = np.einsum("kn,km->nm", diag, diag.conj())
    return ChannelSummary(kraus=kraus, Q=Q, alpha=alpha)


def predict(summary: ChannelSummary, rho_S, H_S) -> np.ndarray:
    """Energy-basis output predicted by ``p' = Q p`` and ``p'_nm = alpha_nm p_nm``."""
    if summary.alpha is None:
        raise ValueError("coherence factors are undefined for degenerate Bohr frequencies")
    H = hermitian_eigendecomposition(H_S)
    R = H.to_eigenbasis(qstate.as_state(rho_S).matrix)
    out = summary.alpha * R
    np.fill_diagonal(out, summary.Q @ np.real(np.diagonal(R)))
    return out


class EntropyProduction(NamedTuple):
    Sigma: float
    Sigma_d: float
    Xi: float


def entropy_production_totals(op: ThermalOperation, rho_S) -> EntropyProduction:
    """Total entropy production and its population/coherence split."""
    rho_S = qstate.as_state(rho_S)
    out = apply(op, rho_S)
    return _totals(op, rho_S, out.rho_S)


def _totals(op: ThermalOperation, rho_S: DensityMatrix, rho_S_out: DensityMatrix) -> EntropyProduction:
    rho_eq = qstate.gibbs_state(op.H_S, op.beta)
    p_eq = qstate.populations(rho_eq, op.H_S)
    sigma = qstate.quantum_relative_entropy(rho_S, rho_eq) - qstate.quantum_relative_entropy(rho_S_out, rho_eq)
    sigma_d = qstate.kl_divergence(qstate.populations(rho_S, op.H_S), p_eq) - qstate.kl_divergence(
        qstate.populations(rho_S_out, op.H_S), p_eq
    )
    xi = qstate.relative_entropy_of_coherence(rho_S, op.H_S) - qstate.relative_entropy_of_coherence(
        rho_S_out, op.H_S
    )
    return EntropyProduction(sigma, sigma_d, xi)


def conservation_report(op: ThermalOperation, rho_S) -> dict[str, float]:
    """Values and residuals of the entropic conservation laws.

    Residual keys (all ``|lhs - rhs|``):

    ``residual_sigma_split``
        ``Sigma = Sigma_d + Xi``.
    ``residual_sigma_env_mutual_info``
        ``Sigma = S(rho'_E||rho_E^eq) + I(rho'_SE)``.
    ``residual_dephased_entropy``
        ``S(Delta_tot rho'_SE) = S(Delta_S rho_S) + S(rho_E^eq)``.
    ``residual_global_coherence``
        ``C_tot(rho'_SE) = C(rho_S)``.
    ``residual_xi_global_minus_local``
        ``Xi = C_tot(rho'_SE) - C(rho'_S)``.
    ``residual_xi_env_plus_correlated``
        ``Xi = C(rho'_E) + C_cc(rho'_SE)``.
    ``residual_unitary_entropy``
        ``S(rho'_SE) = S(rho_S (x) rho_E^eq)``.
    """
    rho_S = qstate.as_state(rho_S)
    out = apply(op, rho_S)
    tot = _totals(op, rho_S, out.rho_S)
    S = qstate.von_neumann_entropy
    C = qstate.relative_entropy_of_coherence

    env_rel = qstate.quantum_relative_entropy(out.rho_E, op.rho_E_eq)
    mutual = qstate.mutual_information(out.rho_SE, op.dims)
    dephased_global = S(linalg.dephase(out.rho_SE.matrix, op.H_total))
    dephased_initial = S(linalg.dephase(rho_S.matrix, op.H_S)) + S(op.rho_E_eq)
    c_global = C(out.rho_SE, op.H_total)
    c_initial = C(rho_S, op.H_S)
    c_sys_out = C(out.rho_S, op.H_S)
    c_env_out = C(out.rho_E, op.H_E)
    c_cc = c_global - c_sys_out - c_env_out
    s_initial_joint = S(rho_S) + S(op.rho_E_eq)

    return {
        "Sigma": tot.Sigma,
        "Sigma_d": tot.Sigma_d,
        "Xi": tot.Xi,
        "env_relative_entropy": env_rel,
        "mutual_information": mutual,
        "dephased_entropy_global": dephased_global,
        "dephased_entropy_initial": dephased_initial,
        "coherence_global": c_global,
        "coherence_initial": c_initial,
        "coherence_system_final": c_sys_out,
        "coherence_env_final": c_env_out,
        "correlated_coherence": c_cc,
        "residual_sigma_split": abs(tot.Sigma - tot.Sigma_d - tot.Xi),
        "residual_sigma_env_mutual_info": abs(tot.Sigma - env_rel - mutual),
        "residual_dephased_entropy": abs(dephased_global - dephased_initial),
        "residual_global_coherence": abs(c_global - c_initial),
        "residual_xi_global_minus_local": abs(tot.Xi - (c_global - c_sys_out)),
        "residual_xi_env_plus_correlated": abs(tot.Xi - (c_env_out + c_cc)),
        "residual_unitary_entropy": abs(S(out.rho_SE) - s_initial_joint),
    }


RESIDUAL_KEYS = (
    "residual_sigma_split",
    "residual_sigma_env_mutual_info",
    "residual_dephased_entropy",
    "residual_global_coherence",
    "residual_xi_global_minus_local",
    "residual_xi_env_plus_correlated",
    "residual_unitary_entropy",
)


class CollisionRun(NamedTuple):
    states: list[DensityMatrix]
    sigma: list[float]


def collision_sequence(
    op_builder: Callable[[int], ThermalOperation] | ThermalOperation, rho_S0, n_collisions: int
) -> CollisionRun:
    """Repeated thermal operations, each with a fresh thermal environment.

    ``op_builder(k)`` supplies the operation for collision ``k``; a plain
    :class:`ThermalOperation` is reused for every collision.  Returns the
    ``n_collisions + 1`` system states and the entropy produced per collision.
    """
    build = op_builder if callable(op_builder) else (lambda k: op_builder)
    rho = qstate.as_state(rho_S0)
    states, sigma = [rho], []
    for k in range(n_collisions):
        op = build(k)
        out = apply(op, rho)
        sigma.append(_totals(op, rho, out.rho_S).Sigma)
        rho = out.rho_S
        states.append(rho)
    return CollisionRun(states, sigma)
