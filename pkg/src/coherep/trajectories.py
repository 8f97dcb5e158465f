"""Two-point-measurement trajectories for thermal operations.

Forward protocol: measure the system in the eigenbasis of ``rho_S`` (label
``alpha``) and the environment in its energy basis (``mu``), apply ``U``,
measure the environment again (``nu``).  The record is augmented with the
eigenbasis label ``beta`` of the final system state, and with energy labels
``n`` and ``m`` obtained by projecting the initial and final eigenvectors on
the system energy basis.  A path is the tuple ``(alpha, mu, n, beta, nu, m)``.

The backward protocol starts from an eigenstate of ``rho'_S`` and a thermal
environment and applies ``U^dag``.  The log-ratio of forward and backward path
probabilities is the stochastic entropy production ``sigma``.  It splits into
a population part ``sigma_d`` and an information-gain part ``xi``.
"""

from __future__ import annotations

import builtins
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from . import linalg, qstate
from .errors import EnumerationTooLarge, ZeroProbabilityOnSupport
from .linalg import dagger, hermitian_eigendecomposition
from .thermalops import ThermalOperation, _haar_unitary, apply

EPS_PATH = 1e-14
MAX_DROPPED_MASS = 1e-12
MAX_PATHS = 10**6
SAMPLE_CHUNK = 1 << 14


class Eigensystem(NamedTuple):
    """Orthonormal eigenvectors (columns) and probabilities, largest first."""

    states: np.ndarray
    probabilities: np.ndarray


def state_eigensystem(rho) -> Eigensystem:
    """Eigen-decomposition of a density matrix with decreasing probabilities.

    Degenerate probabilities follow the canonical block convention of
    :func:`coherep.linalg.hermitian_eigendecomposition`.
    """
    rho = qstate.as_state(rho)
    H = hermitian_eigendecomposition(-rho.matrix)
    p = -H.eigenvalues
    p = np.where(p <= qstate.EPS_SUPP, 0.0, p)
    return Eigensystem(np.array(H.eigenvectors), p / p.sum())


def final_state_eigensystem(op: ThermalOperation, rho_S) -> Eigensystem:
    """Eigenbasis ``|psi'_beta>`` and weights ``p'_beta`` of the output state."""
    return state_eigensystem(apply(op, rho_S).rho_S)


def rotate_degenerate(eig: Eigensystem, rng: np.random.Generator) -> Eigensystem:
    """Apply an independent Haar unitary inside each degenerate eigenspace."""
    order = np.arange(eig.probabilities.size)[::-1]
    groups = linalg.degeneracy_groups(eig.probabilities[order])
    states = eig.states.copy()
    for g in groups:
        if len(g) > 1:
            idx = order[list(g)]
            states[:, idx] = states[:, idx] @ _haar_unitary(len(g), rng)
    return Eigensystem(states, eig.probabilities)


def _bases(op: ThermalOperation, rho_S, initial: Eigensystem | None, final: Eigensystem | None):
    rho_S = qstate.as_state(rho_S)
    if initial is None:
        initial = state_eigensystem(rho_S)
    if final is None:
        final = final_state_eigensystem(op, rho_S)
    return rho_S, initial, final


def transition_kernel(op: ThermalOperation, initial: Eigensystem, final: Eigensystem) -> np.ndarray:
    """``K[beta, nu, alpha, mu] = |<psi'_beta, nu| U |psi_alpha, mu>|^2``."""
    dS, dE = op.dims
    VE = op.H_E.eigenvectors
    A = dagger(np.kron(final.states, VE)) @ op.U @ np.kron(initial.states, VE)
    return (np.abs(A) ** 2).reshape(dS, dE, dS, dE)


def forward_distribution(op: ThermalOperation, rho_S, initial=None, final=None) -> np.ndarray:
    """``P_F[alpha, mu, beta, nu] = |<psi'_beta,nu|U|psi_alpha,mu>|^2 p_alpha q_mu``."""
    _, initial, final = _bases(op, rho_S, initial, final)
    K = transition_kernel(op, initial, final)
    w = np.multiply.outer(initial.probabilities, op.q)
    return np.transpose(K, (2, 3, 0, 1)) * w[:, :, None, None]


def backward_distribution(op: ThermalOperation, rho_S, initial=None, final=None) -> np.ndarray:
    """``P_B[alpha, mu, beta, nu] = |<psi_alpha,mu|U^dag|psi'_beta,nu>|^2 p'_beta q_nu``.

    Evaluated with ``U^dag`` directly rather than by reusing the forward kernel.
    """
    _, initial, final = _bases(op, rho_S, initial, final)
    dS, dE = op.dims
    VE = op.H_E.eigenvectors
    A = dagger(np.kron(initial.states, VE)) @ dagger(op.U) @ np.kron(final.states, VE)
    Kb = (np.abs(A) ** 2).reshape(dS, dE, dS, dE)  # [alpha, mu, beta, nu]
    return Kb * np.multiply.outer(final.probabilities, op.q)[None, None, :, :]


def average_collapsed_state(op: ThermalOperation, rho_S, initial=None) -> np.ndarray:
    """``sum P_F(nu|alpha,mu) p_alpha q_mu |Phi_F><Phi_F|`` over ``(alpha, mu, nu)``."""
    rho_S = qstate.as_state(rho_S)
    if initial is None:
        initial = state_eigensystem(rho_S)
    dS, dE = op.dims
    VE = op.H_E.eigenvectors
    q = op.q
    out = np.zeros((dS, dS), dtype=complex)
    for a in range(dS):
        for mu in range(dE):
            vec = op.U @ np.kron(initial.states[:, a], VE[:, mu])
            blocks = vec.reshape(dS, dE) @ VE.conj()  # column nu: (1 (x) <nu|) U |psi_a, mu>
            out += initial.probabilities[a] * q[mu] * blocks @ dagger(blocks)
    return out


def stochastic_entropies(p_alpha, q_mu, p_beta, q_nu, p_n, p_m):
    """``(sigma, sigma_d, xi)`` for one path or arrays of paths.

    ``sigma = ln(p_alpha q_mu / p'_beta q_nu)``,
    ``sigma_d = ln(p_n q_mu / p'_m q_nu)``,
    ``xi = ln(p_alpha p'_m / p'_beta p_n)``.
    """
    args = [np.asarray(x, dtype=float) for x in (p_alpha, q_mu, p_beta, q_nu, p_n, p_m)]
    if any(np.any(x <= 0) for x in args):
        raise ZeroProbabilityOnSupport("a probability in a stochastic entropy vanishes on a supported path")
    pa, qm, pb, qn, pn, pm = (np.log(x) for x in args)
    sigma = pa + qm - pb - qn
    sigma_d = pn + qm - pm - qn
    xi = pa + pm - pb - pn
    if sigma.ndim == 0:
        return float(sigma), float(sigma_d), float(xi)
    return sigma, sigma_d, xi


@dataclass(frozen=True)
class TrajectoryRecord:
    alpha: int
    mu: int
    n: int
    beta: int
    nu: int
    m: int
    P_F: float
    P_B: float
    sigma: float
    sigma_d: float
    xi: float


INDEX_NAMES = ("alpha", "mu", "n", "beta", "nu", "m")


class TrajectoryEnsemble:
    """Columns of path data with the weights used for averages.

    In exact mode the weight of a path is its forward probability; in sampled
    mode every draw has weight ``1/N``.
    """

    def __init__(self, indices, P_F, P_B, sigma, sigma_d, xi, weights, mode, *, seed=None, dropped_mass=0.0):
        self.indices = np.asarray(indices, dtype=int)
        self.P_F = np.asarray(P_F, dtype=float)
        self.P_B = np.asarray(P_B, dtype=float)
        self.sigma = np.asarray(sigma, dtype=float)
        self.sigma_d = np.asarray(sigma_d, dtype=float)
        self.xi = np.asarray(xi, dtype=float)
        self.weights = np.asarray(weights, dtype=float)
        self.mode = mode
        self.seed = seed
        self.dropped_mass = float(dropped_mass)

    def __len__(self) -> int:
        return self.sigma.size

    @property
    def records(self) -> Iterator[TrajectoryRecord]:
        for k in range(len(self)):
            yield TrajectoryRecord(
                *(int(i) for i in self.indices[k]),
                P_F=float(self.P_F[k]),
                P_B=float(self.P_B[k]),
                sigma=float(self.sigma[k]),
                sigma_d=float(self.sigma_d[k]),
                xi=float(self.xi[k]),
            )

    def mean(self, values) -> float:
        return float(np.dot(self.weights, values))

    def standard_error(self, values) -> float:
        if self.mode == "exact" or len(self) < 2:
            return 0.0
        return float(np.std(values, ddof=1) / math.sqrt(len(self)))

    def summary(self) -> dict:
        quantities = {
            "sigma": self.sigma,
            "sigma_d": self.sigma_d,
            "xi": self.xi,
            "exp_minus_sigma": np.exp(-self.sigma),
            "exp_minus_sigma_d": np.exp(-self.sigma_d),
            "exp_minus_sigma_d_minus_xi": np.exp(-self.sigma_d - self.xi),
        }
        out: dict = {"mode": self.mode, "exact": self.mode == "exact", "n_records": len(self)}
        if self.seed is not None:
            out["seed"] = self.seed
        for key, vals in quantities.items():
            out[f"mean_{key}"] = self.mean(vals)
            out[f"se_{key}"] = self.standard_error(vals)
        out["ft_residual"] = abs(out["mean_exp_minus_sigma"] - 1.0)
        out["classical_ft_residual"] = abs(out["mean_exp_minus_sigma_d"] - 1.0)
        out["split_max_residual"] = float(np.max(np.abs(self.sigma - self.sigma_d - self.xi), initial=0.0))
        if self.mode == "exact":
            out["forward_mass"] = float(self.weights.sum())
            out["dropped_mass"] = self.dropped_mass
            out["backward_mass_on_support"] = float(self.P_B.sum())
        return out

    def rows(self) -> list[dict]:
        cols = {name: self.indices[:, i] for i, name in builtins.enumerate(INDEX_NAMES)}
        cols.update(P_F=self.P_F, P_B=self.P_B, sigma=self.sigma, sigma_d=self.sigma_d, xi=self.xi)
        return [{k: v[i].item() for k, v in cols.items()} for i in range(len(self))]


class _PathTables(NamedTuple):
    K: np.ndarray  # [beta, nu, alpha, mu]
    p_alpha: np.ndarray
    q: np.ndarray
    p_beta: np.ndarray
    p_n_given_alpha: np.ndarray  # [alpha, n]
    p_m_given_beta: np.ndarray  # [beta, m]
    p_n: np.ndarray
    p_m: np.ndarray


def _tables(op: ThermalOperation, rho_S, initial=None, final=None) -> _PathTables:
    rho_S, initial, final = _bases(op, rho_S, initial, final)
    rho_out = apply(op, rho_S).rho_S
    VS = op.H_S.eigenvectors
    return _PathTables(
        K=transition_kernel(op, initial, final),
        p_alpha=initial.probabilities,
        q=op.q,
        p_beta=final.probabilities,
        p_n_given_alpha=(np.abs(dagger(VS) @ initial.states) ** 2).T,
        p_m_given_beta=(np.abs(dagger(VS) @ final.states) ** 2).T,
        p_n=qstate.populations(rho_S, op.H_S),
        p_m=qstate.populations(rho_out, op.H_S),
    )


def _path_values(t: _PathTables, a, mu, n, b, nu, m):
    P_F = t.K[b, nu, a, mu] * t.p_alpha[a] * t.q[mu] * t.p_n_given_alpha[a, n] * t.p_m_given_beta[b, m]
    P_B = t.K[b, nu, a, mu] * t.p_beta[b] * t.q[nu] * t.p_n_given_alpha[a, n] * t.p_m_given_beta[b, m]
    sig = stochastic_entropies(t.p_alpha[a], t.q[mu], t.p_beta[b], t.q[nu], t.p_n[n], t.p_m[m])
    return P_F, P_B, sig


def enumerate(op: ThermalOperation, rho_S, initial: Eigensystem | None = None, final: Eigensystem | None = None) -> TrajectoryEnsemble:
    """Exact ensemble over all augmented paths with non-negligible probability.

    Paths with forward probability at or below ``1e-14`` are dropped; their
    total mass must not exceed ``1e-12``.
    """
    dS, dE = op.dims
    if dS**4 * dE**2 > MAX_PATHS:
        raise EnumerationTooLarge(f"{dS**4 * dE**2} paths exceed the limit of {MAX_PATHS}")
    t = _tables(op, rho_S, initial, final)
    grid = np.indices((dS, dE, dS, dS, dE, dS)).reshape(6, -1)
    a, mu, n, b, nu, m = grid
    full_PF = t.K[b, nu, a, mu] * t.p_alpha[a] * t.q[mu] * t.p_n_given_alpha[a, n] * t.p_m_given_beta[b, m]
    keep = full_PF > EPS_PATH
    dropped = float(full_PF[~keep].sum())
    if dropped > MAX_DROPPED_MASS:
        raise RuntimeError(f"dropped forward mass {dropped:.3e} exceeds {MAX_DROPPED_MASS:.0e}")
    a, mu, n, b, nu, m = grid[:, keep]
    P_F, P_B, (sigma, sigma_d, xi) = _path_values(t, a, mu, n, b, nu, m)
    return TrajectoryEnsemble(
        grid[:, keep].T, P_F, P_B, sigma, sigma_d, xi, weights=P_F, mode="exact", dropped_mass=dropped
    )


def _draw(cdf: np.ndarray, rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF draw from ``cdf[rows]`` (one row per sample)."""
    idx = np.sum(u[:, None] >= cdf[rows], axis=1)
    return np.minimum(idx, cdf.shape[1] - 1)


def _cdf(p: np.ndarray) -> np.ndarray:
    c = np.cumsum(p, axis=-1)
    return c / c[..., -1:]


def _sample_chunk(t: _PathTables, size: int, seed_seq: np.random.SeedSequence) -> np.ndarray:
    rng = np.random.default_rng(seed_seq)
    dS, dE = t.p_alpha.size, t.q.size
    u = rng.random((5, size))
    a = _draw(_cdf(t.p_alpha)[None], np.zeros(size, dtype=int), u[0])
    mu = _draw(_cdf(t.q)[None], np.zeros(size, dtype=int), u[1])
    # column (alpha, mu) of the kernel is a distribution over (beta, nu)
    kernel = np.transpose(t.K, (2, 3, 0, 1)).reshape(dS * dE, dS * dE)
    bn = _draw(_cdf(kernel), a * dE + mu, u[2])
    b, nu = bn // dE, bn % dE
    n = _draw(_cdf(t.p_n_given_alpha), a, u[3])
    m = _draw(_cdf(t.p_m_given_beta), b, u[4])
    return np.stack([a, mu, n, b, nu, m], axis=1)


def sample(op: ThermalOperation, rho_S, N: int, seed: int, threads: int = 1) -> TrajectoryEnsemble:
    """Monte Carlo ensemble of ``N`` forward paths.

    Paths are drawn sequentially: ``alpha`` from ``p_alpha``, ``mu`` from
    ``q``, ``(beta, nu)`` from the transition kernel, then ``n`` and ``m``
    from the basis overlaps.  Draws are made in fixed-size chunks with
    seeds spawned from ``seed``, so the output does not depend on ``threads``.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    t = _tables(op, rho_S)
    sizes = [SAMPLE_CHUNK] * (N // SAMPLE_CHUNK)
    if N % SAMPLE_CHUNK:
        sizes.append(N % SAMPLE_CHUNK)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(lambda args: _sample_chunk(t, *args), zip(sizes, seeds)))
    else:
        chunks = [_sample_chunk(t, s, ss) for s, ss in zip(sizes, seeds)]
    idx = np.concatenate(chunks)
    P_F, P_B, (sigma, sigma_d, xi) = _path_values(t, *idx.T)
    return TrajectoryEnsemble(idx, P_F, P_B, sigma, sigma_d, xi, weights=np.full(N, 1.0 / N), mode="sampled", seed=seed)
