"""Reproducible numerical experiments built from the engine modules.

Each function returns plain numbers so the same code backs the runnable
scripts in ``scripts/`` and the acceptance suite.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import davies, qstate, thermalops, trajectories
from .errors import TrivialOperationWarning

LN2 = math.log(2.0)
QUBIT = (0.0, 1.0)
# Qutrit whose lowest gap is resonant with the qubit.
QUTRIT = (0.0, 1.0, 2.5)


@dataclass(frozen=True)
class BatchConfig:
    """A family of seeded random (operation, state) pairs."""

    system: tuple[float, ...] = QUBIT
    environment: tuple[float, ...] = QUBIT
    beta: float = LN2
    n_ops: int = 20
    n_states: int = 10
    seed: int = 0


def random_pairs(cfg: BatchConfig) -> Iterator[tuple[thermalops.ThermalOperation, qstate.DensityMatrix]]:
    """Yield ``n_ops * n_states`` pairs from independent seeded streams.

    Operations are Haar-random inside every energy block; states are
    full-rank Ginibre density matrices.
    """
    H_S, H_E = np.diag(cfg.system), np.diag(cfg.environment)
    op_seeds = np.random.SeedSequence([cfg.seed, 0]).spawn(cfg.n_ops)
    state_rng = np.random.default_rng([cfg.seed, 1])
    for ss in op_seeds:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TrivialOperationWarning)
            op = thermalops.random_energy_conserving_unitary(H_S, H_E, ss, beta=cfg.beta)
        for _ in range(cfg.n_states):
            yield op, qstate.random_density_matrix(len(cfg.system), state_rng)


@dataclass(frozen=True)
class FluctuationBatchResult:
    n_pairs: int
    max_ft_residual: float
    max_sigma_residual: float
    max_sigma_d_residual: float
    max_xi_residual: float
    max_split_residual: float
    seconds: float


def fluctuation_batch(configs) -> FluctuationBatchResult:
    """Exact enumeration over every pair of every config.

    Residuals are ``|<e^-sigma> - 1|``, ``|<sigma> - Sigma|`` and so on,
    maximised over the batch; the split residual is per record.
    """
    start = time.perf_counter()
    worst = np.zeros(5)
    n = 0
    for cfg in configs:
        for op, rho in random_pairs(cfg):
            ens = trajectories.enumerate(op, rho)
            s = ens.summary()
            tot = thermalops.entropy_production_totals(op, rho)
            worst = np.maximum(
                worst,
                [
                    s["ft_residual"],
                    abs(s["mean_sigma"] - tot.Sigma),
                    abs(s["mean_sigma_d"] - tot.Sigma_d),
                    abs(s["mean_xi"] - tot.Xi),
                    s["split_max_residual"],
                ],
            )
            n += 1
    return FluctuationBatchResult(n, *map(float, worst), seconds=time.perf_counter() - start)


@dataclass(frozen=True)
class AuditBatchResult:
    n_pairs: int
    max_residuals: dict
    bound_violations: int
    max_column_sum_residual: float
    max_gibbs_fixed_point_residual: float


def audit_batch(n_pairs: int = 200, seed: int = 1) -> AuditBatchResult:
    """Conservation laws and channel properties on alternating qubit and qutrit environments."""
    half = n_pairs // 2
    configs = [
        BatchConfig(QUBIT, QUBIT, n_ops=half, n_states=1, seed=seed),
        BatchConfig(QUBIT, QUTRIT, n_ops=n_pairs - half, n_states=1, seed=seed + 1),
    ]
    worst = dict.fromkeys(thermalops.RESIDUAL_KEYS, 0.0)
    violations, col, fix = 0, 0.0, 0.0
    count = 0
    for cfg in configs:
        for op, rho in random_pairs(cfg):
            rep = thermalops.conservation_report(op, rho)
            for k in worst:
                worst[k] = max(worst[k], rep[k])
            ch = thermalops.channel_summary(op)
            violations += len(ch.coherence_bound_violations(tol=1e-10))
            q, _ = qstate.gibbs_populations(op.H_S, op.beta)
            col = max(col, float(np.max(np.abs(ch.Q.sum(axis=0) - 1.0))))
            fix = max(fix, float(np.max(np.abs(ch.Q @ q - q))))
            count += 1
    return AuditBatchResult(count, worst, violations, col, fix)


def swap_benchmark(beta: float = LN2):
    """Full swap on ``|+><+|`` with a resonant thermal qubit.

    Returns the operation, the input state and the closed-form values
    ``(Sigma, Sigma_d, Xi)``.  With ``q = (2/3, 1/3)`` at ``beta = ln 2`` the
    output system is the thermal state and the output environment is
    ``|+><+|``, so ``Sigma = S(|+><+| || rho_eq) = ln(3/sqrt 2)``,
    ``Sigma_d = KL((1/2, 1/2) || q)`` and ``Xi = ln 2``.
    """
    H = np.diag(QUBIT)
    op = thermalops.swap_operation(H, H, beta)
    q, _ = qstate.gibbs_populations(H, beta)
    sigma_d = float(0.5 * np.log(0.25 / (q[0] * q[1])))
    xi = LN2
    return op, qstate.plus_state(), (sigma_d + xi, sigma_d, xi)


def davies_qubit(dt: float = 1e-3, t_max: float = 10.0, gamma: float = 1.0, beta: float = LN2):
    """Qubit relaxation from ``|+><+|`` under the Davies map."""
    H = np.diag(QUBIT)
    W = davies.build_rate_matrix(H, beta, gamma)
    return davies.propagate(qstate.plus_state(), H, W, dt, t_max)


@dataclass(frozen=True)
class CollisionMarkovResult:
    theta: float
    n_collisions: int
    fitted_rate: float
    pauli_rate: float
    relative_error: float


def collision_markov_check(theta: float = 0.05, n_collisions: int = 2000, beta: float = LN2) -> CollisionMarkovResult:
    """Compare collision-model relaxation with the weak-coupling Pauli rate.

    The system starts in its excited state and meets a fresh thermal qubit
    through ``exp(-i theta X)`` at every collision.  The fitted rate is the
    slope of ``ln |p_1(k) - q_1|`` per collision.  The Pauli equation uses the
    leading-order rates ``W(0|1) = theta^2 q_0`` and ``W(1|0) = theta^2 q_1``
    (one collision per unit time), whose relaxation rate is the non-zero
    eigenvalue magnitude of the generator.
    """
    H = np.diag(QUBIT)
    op = thermalops.partial_swap_operation(H, H, beta, theta)
    run = thermalops.collision_sequence(op, qstate.basis_state(2, 1), n_collisions)
    q, _ = qstate.gibbs_populations(H, beta)
    dev = np.array([abs(qstate.populations(r, H)[1] - q[1]) for r in run.states])
    k = np.arange(dev.size)
    keep = dev > 1e-12
    fitted = -np.polyfit(k[keep], np.log(dev[keep]), 1)[0]
    W = davies.build_rate_matrix(H, beta, theta**2 * q[0])
    pauli = float(np.max(np.abs(np.linalg.eigvals(W.generator))))
    return CollisionMarkovResult(theta, n_collisions, float(fitted), pauli, float(abs(fitted - pauli) / pauli))


def environment_perturbation(thetas, beta: float = LN2) -> np.ndarray:
    """``S(rho'_E || rho_E^eq)`` after one partial swap with a ``|+>`` system."""
    H = np.diag(QUBIT)
    rho = qstate.plus_state()
    out = []
    for theta in thetas:
        op = thermalops.partial_swap_operation(H, H, beta, theta)
        out.append(qstate.quantum_relative_entropy(thermalops.apply(op, rho).rho_E, op.rho_E_eq))
    return np.array(out)


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])
