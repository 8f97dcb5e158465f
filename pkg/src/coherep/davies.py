"""Weak-coupling (Davies) relaxation: populations follow a Pauli rate equation,
coherences decay independently as damped oscillations.

Everything is computed in the eigenbasis of ``H_S``; states handed back to the
caller are in the original basis.  The entropy production rate is split into
a population part (Schnakenberg form) and a coherence part ``-dC/dt``, both
evaluated analytically from the state and its time derivative.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import integrate
from scipy.sparse.csgraph import connected_components

from . import qstate
from .errors import (
    DegenerateBohrFrequencies,
    DegenerateSpectrum,
    DimensionMismatch,
    NegativeRate,
    StepTooLarge,
)
from .linalg import DEGENERACY_RTOL, SpectralHamiltonian, hermitian_eigendecomposition
from .qstate import EPS_SUPP, DensityMatrix

log = logging.getLogger(__name__)

DETAILED_BALANCE_RTOL = 1e-9
POSITIVITY_TOL = 1e-10
# Flux into an empty level above this is a divergent entropy production.
_FLUX_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class RateMatrix:
    """Classical transition rates, ``W[n, m]`` is the rate for ``m -> n``."""

    W: np.ndarray
    beta: float
    energies: np.ndarray
    irreducible: bool

    @property
    def dim(self) -> int:
        return self.W.shape[0]

    @property
    def escape_rates(self) -> np.ndarray:
        """Total rate out of each level, ``sum_k W(k|n)``."""
        return self.W.sum(axis=0)

    @property
    def generator(self) -> np.ndarray:
        """Matrix ``L`` with ``dp/dt = L p``."""
        return self.W - np.diag(self.escape_rates)

    def detailed_balance_residual(self) -> float:
        worst = 0.0
        for n, m in zip(*np.nonzero(self.W.T > 0)):
            # W[m, n] > 0 here, so the ratio W(n|m)/W(m|n) is defined.
            ratio = self.W[n, m] / self.W[m, n]
            target = math.exp(-self.beta * (self.energies[n] - self.energies[m]))
            worst = max(worst, abs(ratio - target) / target)
        return worst


def build_rate_matrix(H_S, beta: float, base_rates) -> RateMatrix:
    """Detailed-balance rates from downward rates.

    Parameters
    ----------
    H_S : SpectralHamiltonian or array_like
        Non-degenerate system Hamiltonian.  Level indices refer to its
        ascending eigenvalues.
    beta : float
        Inverse temperature; ``math.inf`` gives zero upward rates.
    base_rates : float or (d, d) array_like
        ``base_rates[m, n]`` is the downward rate ``n -> m`` for ``E_n > E_m``.
        A scalar applies the same rate to every pair.  Upward entries must
        be zero.
    """
    H = hermitian_eigendecomposition(H_S)
    if H.is_degenerate:
        raise DegenerateSpectrum(f"system spectrum {H.eigenvalues} has degenerate levels")
    beta = float(beta)
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta!r}")
    d = H.dim
    g = np.asarray(base_rates, dtype=float)
    if g.ndim == 0:
        g = np.triu(np.full((d, d), float(g)), k=1)
    if g.shape != (d, d):
        raise DimensionMismatch(f"rate table of shape {g.shape} for {d} levels")
    if np.any(g < 0):
        raise NegativeRate(f"negative downward rate {g.min()!r}")
    if np.any(np.tril(g) != 0):
        raise ValueError("base_rates[m, n] must vanish unless E_n > E_m (n > m)")

    E = H.eigenvalues
    W = np.zeros((d, d))
    for m in range(d):
        for n in range(m + 1, d):
            W[m, n] = g[m, n]
            W[n, m] = g[m, n] * math.exp(-beta * (E[n] - E[m]))
    n_comp, _ = connected_components(W > 0, directed=True, connection="strong")
    return RateMatrix(W=W, beta=beta, energies=E.copy(), irreducible=bool(n_comp == 1))


def check_bohr_frequencies(H_S) -> None:
    """Raise if two distinct level pairs share a Bohr frequency."""
    H = hermitian_eigendecomposition(H_S)
    E = H.eigenvalues
    d = H.dim
    omegas = np.sort([E[n] - E[m] for n in range(d) for m in range(d) if n != m])
    if omegas.size < 2:
        return
    eps = DEGENERACY_RTOL * max(1.0, float(E[-1] - E[0]))
    gaps = np.diff(omegas)
    if np.any(gaps <= eps):
        w = omegas[:-1][gaps <= eps][0]
        raise DegenerateBohrFrequencies(f"Bohr frequency {w:.6g} occurs for more than one level pair")


def pauli_derivative(p, W: RateMatrix) -> np.ndarray:
    """``dp_n/dt = sum_m [W(n|m) p_m - W(m|n) p_n]``."""
    p = np.asarray(p, dtype=float)
    if p.shape != (W.dim,):
        raise DimensionMismatch(f"population vector of length {p.size} for {W.dim} levels")
    return W.W @ p - W.escape_rates * p


def _decay_matrix(W: RateMatrix, H: SpectralHamiltonian) -> np.ndarray:
    """``Lambda[n, m] = i omega_nm + (Gamma_n + Gamma_m)/2`` so that
    ``dp_nm/dt = -Lambda[n, m] p_nm``."""
    out = W.escape_rates
    return 1j * H.bohr_frequencies + 0.5 * (out[:, None] + out[None, :])


def coherence_derivative(p_nm: complex, n: int, m: int, W: RateMatrix, H_S) -> complex:
    """Damped oscillation of one coherence: ``-[i w_nm + (G_n + G_m)/2] p_nm``."""
    if n == m:
        raise ValueError("coherence_derivative needs n != m")
    H = hermitian_eigendecomposition(H_S)
    check_bohr_frequencies(H)
    return complex(-_decay_matrix(W, H)[n, m] * p_nm)


def _energy_basis_derivative(R: np.ndarray, L: np.ndarray, Lam: np.ndarray) -> np.ndarray:
    """Davies generator acting on (a stack of) energy-basis matrices."""
    d = L.shape[0]
    out = -Lam * R
    diag = np.real(np.diagonal(R, axis1=-2, axis2=-1))
    idx = np.arange(d)
    out[..., idx, idx] = diag @ L.T
    return out


def davies_derivative(rho, H_S, W: RateMatrix) -> np.ndarray:
    """``d rho / dt`` of the Davies map, in the same basis as ``rho``."""
    H = hermitian_eigendecomposition(H_S)
    R = H.to_eigenbasis(np.asarray(qstate.as_state(rho).matrix))
    return H.from_eigenbasis(_energy_basis_derivative(R, W.generator, _decay_matrix(W, H)))


def _rk4_polynomial(z):
    return 1 + z + z**2 / 2 + z**3 / 6 + z**4 / 24


class _Propagator:
    """Classic RK4 step for the linear Davies generator.

    For a linear autonomous equation one RK4 step of size ``h`` equals the
    degree-4 Taylor polynomial of ``exp(h G)``, so the step can be formed once
    and reused; evaluating it at ``0 < s < h`` gives the dense output.
    """

    def __init__(self, L: np.ndarray, Lam: np.ndarray):
        self.L = L
        self.Lam = Lam

    def step(self, h: float) -> tuple[np.ndarray, np.ndarray]:
        hL = h * self.L
        A = np.eye(self.L.shape[0])
        term = np.eye(self.L.shape[0])
        for k in range(1, 5):
            term = term @ hL / k
            A = A + term
        return A, _rk4_polynomial(-h * self.Lam)

    @staticmethod
    def apply(A: np.ndarray, a: np.ndarray, R: np.ndarray) -> np.ndarray:
        out = a * R
        d = A.shape[0]
        idx = np.arange(d)
        out[..., idx, idx] = np.real(np.diagonal(R, axis1=-2, axis2=-1)) @ A.T
        return out


def _xlogx_rates(lam: np.ndarray, lam_dot: np.ndarray) -> np.ndarray:
    """``-sum_k lam_dot_k ln lam_k`` (the entropy rate), with the ``0 ln 0``
    convention; a positive flow into a zero eigenvalue gives ``+inf``."""
    zero = lam <= EPS_SUPP
    safe = np.where(zero, 1.0, lam)
    terms = np.where(zero, 0.0, -lam_dot * np.log(safe))
    rate = terms.sum(axis=-1)
    divergent = np.any(zero & (lam_dot > _FLUX_TOL), axis=-1)
    return np.where(divergent, np.inf, rate)


def _entropy(lam: np.ndarray) -> np.ndarray:
    pos = lam > EPS_SUPP
    return -np.sum(np.where(pos, lam * np.log(np.where(pos, lam, 1.0)), 0.0), axis=-1)


def _schnakenberg(p: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Population entropy production for a stack of population vectors."""
    p = np.where(p <= EPS_SUPP, 0.0, p)
    fwd = W[None, :, :] * p[:, None, :]  # W(n|m) p_m
    bwd = np.swapaxes(fwd, 1, 2)  # W(m|n) p_n
    iu = np.triu_indices(W.shape[0], k=1)
    a, b = fwd[:, iu[0], iu[1]], bwd[:, iu[0], iu[1]]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = (a - b) * np.log(a / b)
    terms = np.where((a == 0) & (b == 0), 0.0, terms)
    terms = np.where(((a == 0) ^ (b == 0)), np.inf, terms)
    return terms.sum(axis=1)


class _Rates:
    """Entropic quantities for a stack of energy-basis states."""

    def __init__(self, R: np.ndarray, Rdot: np.ndarray, W: RateMatrix, E: np.ndarray):
        R = (R + np.conj(np.swapaxes(R, -1, -2))) / 2
        p = np.real(np.diagonal(R, axis1=-2, axis2=-1))
        pdot = np.real(np.diagonal(Rdot, axis1=-2, axis2=-1))
        lam, V = np.linalg.eigh(R)
        lam_dot = np.real(np.einsum("...kn,...kl,...ln->...n", V.conj(), Rdot, V))
        beta = W.beta

        self.p = p
        self.min_eigenvalue = lam[..., 0]
        self.S = _entropy(lam)
        self.S_dephased = _entropy(p)
        self.C = self.S_dephased - self.S
        energy = p @ E
        self.F = energy - self.S / beta
        dS = _xlogx_rates(lam, lam_dot)
        dS_deph = _xlogx_rates(p, pdot)
        dE = pdot @ E
        with np.errstate(invalid="ignore"):
            self.Upsilon = dS - dS_deph
        self.Pi_d = _schnakenberg(p, W.W)
        self.Pi = self.Pi_d + self.Upsilon
        self.Phi = -beta * dE
        self.Pi_free_energy = dS - beta * dE
        self.dS = dS


def production_rates(p, W: RateMatrix, rho, rho_dot, H_S) -> tuple[float, float, float]:
    """Entropy production rate and its split, ``(Pi, Pi_d, Upsilon)``.

    ``Pi_d`` uses the populations ``p``; ``Upsilon = -dC/dt`` is evaluated
    analytically as ``tr(Delta(rho_dot) ln Delta(rho)) - tr(rho_dot ln rho)``.
    A probability flow into an empty level or a zero eigenvalue yields
    ``+inf``.
    """
    H = hermitian_eigendecomposition(H_S)
    p = qstate.population_vector(p)
    R = H.to_eigenbasis(np.asarray(qstate.as_state(rho).matrix))[None]
    Rdot = H.to_eigenbasis(np.asarray(rho_dot))[None]
    r = _Rates(R, Rdot, W, H.eigenvalues)
    Pi_d = float(_schnakenberg(p[None], W.W)[0])
    Upsilon = float(r.Upsilon[0])
    if not math.isfinite(Pi_d) or not math.isfinite(Upsilon):
        log.warning("divergent entropy production: flow into an unoccupied state")
    return Pi_d + Upsilon, Pi_d, Upsilon


def production_rate_from_free_energy(rho, rho_dot, H_S, beta: float) -> float:
    """``Pi = -(1/T) dF/dt``, independent of the population/coherence split."""
    H = hermitian_eigendecomposition(H_S)
    R = H.to_eigenbasis(np.asarray(qstate.as_state(rho).matrix))
    Rdot = H.to_eigenbasis(np.asarray(rho_dot))
    lam, V = np.linalg.eigh((R + R.conj().T) / 2)
    lam_dot = np.real(np.einsum("kn,kl,ln->n", V.conj(), Rdot, V))
    dE = float(np.real(np.trace(np.diag(H.eigenvalues) @ Rdot)))
    return float(_xlogx_rates(lam, lam_dot)) - beta * dE


def entropy_flux(p, p_dot, H_S, beta: float) -> float:
    """``Phi = -(1/T) sum_n E_n dp_n/dt``; depends on populations only."""
    H = hermitian_eigendecomposition(H_S)
    p_dot = np.asarray(p_dot, dtype=float)
    if np.shape(p) != (H.dim,) or p_dot.shape != (H.dim,):
        raise DimensionMismatch("population vectors do not match the Hamiltonian")
    return float(-beta * np.dot(H.eigenvalues, p_dot))


@dataclass(frozen=True)
class DaviesTrajectoryPoint:
    t: float
    rho: DensityMatrix
    S: float
    F: float
    Pi: float
    Pi_d: float
    Upsilon: float
    Phi: float
    C: float


class DaviesTrajectory:
    """Result of :func:`propagate`: states on a uniform grid plus rates."""

    def __init__(self, H: SpectralHamiltonian, W: RateMatrix, dt: float, t: np.ndarray, R: np.ndarray):
        self.H = H
        self.W = W
        self.dt = dt
        self.t = t
        self.energy_basis_states = R
        self._prop = _Propagator(W.generator, _decay_matrix(W, H))
        self.rates = _Rates(R, self._derivative(R), W, H.eigenvalues)

    def _derivative(self, R):
        return _energy_basis_derivative(R, self._prop.L, self._prop.Lam)

    def __len__(self) -> int:
        return self.t.size

    @property
    def states(self) -> np.ndarray:
        V = self.H.eigenvectors
        return V @ self.energy_basis_states @ V.conj().T

    @property
    def coherences(self) -> np.ndarray:
        """Energy-basis off-diagonal elements ``p_nm(t)`` (full matrices)."""
        return self.energy_basis_states

    @cached_property
    def points(self) -> list[DaviesTrajectoryPoint]:
        r = self.rates
        return [
            DaviesTrajectoryPoint(
                t=float(self.t[k]),
                rho=DensityMatrix(rho),
                S=float(r.S[k]),
                F=float(r.F[k]),
                Pi=float(r.Pi[k]),
                Pi_d=float(r.Pi_d[k]),
                Upsilon=float(r.Upsilon[k]),
                Phi=float(r.Phi[k]),
                C=float(r.C[k]),
            )
            for k, rho in enumerate(self.states)
        ]

    def columns(self) -> dict[str, np.ndarray]:
        """Time series keyed by the CSV column names."""
        r = self.rates
        cols = {
            "t": self.t,
            "S": r.S,
            "F": r.F,
            "Pi": r.Pi,
            "Pi_d": r.Pi_d,
            "Upsilon": r.Upsilon,
            "Phi": r.Phi,
            "C": r.C,
        }
        for n in range(self.H.dim):
            cols[f"p_{n}"] = r.p[:, n]
        return cols

    def energy_basis_state_at(self, t):
        """Dense output: the RK4 polynomial continued from the previous grid point."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        k = np.clip(np.floor(t / self.dt + 1e-12).astype(int), 0, len(self) - 1)
        s = t - self.t[k]
        out = np.empty((t.size,) + self.energy_basis_states.shape[1:], dtype=complex)
        for i, (ki, si) in enumerate(zip(k, s)):
            A, a = self._prop.step(si)
            out[i] = self._prop.apply(A, a, self.energy_basis_states[ki])
        return out

    def rates_at(self, t) -> _Rates:
        R = self.energy_basis_state_at(t)
        return _Rates(R, self._derivative(R), self.W, self.H.eigenvalues)

    def midpoint_balance_residuals(self) -> tuple[np.ndarray, np.ndarray]:
        """``|Delta S / Delta t - (Pi - Phi)|`` at every step midpoint.

        The rates are evaluated on the dense-output state at ``t_k + dt/2``.
        Returns ``(midpoint_times, residuals)``.
        """
        tm = self.t[:-1] + self.dt / 2
        R = self._midpoint_states()
        r = _Rates(R, self._derivative(R), self.W, self.H.eigenvalues)
        slope = np.diff(self.rates.S) / np.diff(self.t)
        return tm, np.abs(slope - (r.Pi - r.Phi))

    def _midpoint_states(self) -> np.ndarray:
        A, a = self._prop.step(self.dt / 2)
        return self._prop.apply(A, a, self.energy_basis_states[:-1])

    def integrated_production(self, nodes: int = 5) -> tuple[float, float]:
        """``(int Pi_d dt, int Upsilon dt)`` over the whole trajectory.

        Each step is integrated with Gauss-Legendre on the dense output.
        Steps that start from a rank-deficient state or a divergent rate
        carry an integrable log singularity and use adaptive quadrature.
        """
        x, w = np.polynomial.legendre.leggauss(nodes)
        s = 0.5 * self.dt * (x + 1)
        w = 0.5 * self.dt * w
        R0 = self.energy_basis_states[:-1]
        stacks = []
        for sj in s:
            A, a = self._prop.step(sj)
            stacks.append(self._prop.apply(A, a, R0))
        R = np.stack(stacks, axis=1).reshape((-1,) + R0.shape[1:])
        r = _Rates(R, self._derivative(R), self.W, self.H.eigenvalues)
        pid = r.Pi_d.reshape(-1, nodes) @ w
        ups = r.Upsilon.reshape(-1, nodes) @ w

        left = self.rates
        singular = (
            ~np.isfinite(left.Pi_d[:-1])
            | ~np.isfinite(left.Upsilon[:-1])
            | (left.min_eigenvalue[:-1] < 1e-8)
            | (left.p[:-1].min(axis=1) < 1e-8)
        )
        for k in np.nonzero(singular)[0]:
            t0 = self.t[k]
            pid[k] = integrate.quad(lambda u: float(self.rates_at(t0 + u).Pi_d[0]), 0, self.dt, limit=200)[0]
            ups[k] = integrate.quad(lambda u: float(self.rates_at(t0 + u).Upsilon[0]), 0, self.dt, limit=200)[0]
        return float(pid.sum()), float(ups.sum())


def propagate(rho0, H_S, W: RateMatrix, dt: float, t_max: float) -> DaviesTrajectory:
    """Integrate the Davies map with classic RK4 on a uniform grid.

    Raises
    ------
    StepTooLarge
        If the step is outside the RK4 stability region or a recorded state
        has an eigenvalue below ``-1e-10``.
    DegenerateBohrFrequencies
        If two level pairs share a Bohr frequency.
    """
    if not dt > 0 or not t_max >= dt:
        raise ValueError(f"need dt > 0 and t_max >= dt, got dt={dt!r}, t_max={t_max!r}")
    H = hermitian_eigendecomposition(H_S)
    if W.dim != H.dim:
        raise DimensionMismatch(f"{W.dim}-level rates for a {H.dim}-level Hamiltonian")
    check_bohr_frequencies(H)
    rho0 = qstate.as_state(rho0)

    prop = _Propagator(W.generator, _decay_matrix(W, H))
    A, a = prop.step(dt)
    growth = max(np.max(np.abs(a[~np.eye(H.dim, dtype=bool)]), initial=0.0), np.max(np.abs(np.linalg.eigvals(A))))
    if growth > 1 + 1e-12:
        raise StepTooLarge(f"dt={dt!r} is outside the RK4 stability region (amplification {growth:.6f})")

    n_steps = int(round(t_max / dt))
    R = np.empty((n_steps + 1, H.dim, H.dim), dtype=complex)
    R[0] = H.to_eigenbasis(rho0.matrix)
    for k in range(n_steps):
        R[k + 1] = prop.apply(A, a, R[k])
    lam_min = np.linalg.eigvalsh((R + np.conj(np.swapaxes(R, 1, 2))) / 2)[:, 0]
    if np.any(lam_min < -POSITIVITY_TOL):
        k = int(np.argmax(lam_min < -POSITIVITY_TOL))
        raise StepTooLarge(f"positivity lost at t={k * dt:.6g} (eigenvalue {lam_min[k]:.3e})")
    t = dt * np.arange(n_steps + 1)
    return DaviesTrajectory(H, W, dt, t, R)
