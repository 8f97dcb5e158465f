import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import rel_entr

from coherep import qstate
from coherep.errors import InvalidState, NonFiniteBeta

seeds = st.integers(0, 2**32 - 1)


def rand_state(d, seed, rank=None):
    return qstate.random_density_matrix(d, np.random.default_rng(seed), rank=rank)


def test_density_matrix_validation():
    with pytest.raises(InvalidState):
        qstate.DensityMatrix(np.diag([0.6, 0.6]))
    with pytest.raises(InvalidState):
        qstate.DensityMatrix(np.diag([1.1, -0.1]))
    with pytest.raises(InvalidState):
        qstate.DensityMatrix(np.array([[0.5, 0.5], [0.0, 0.5]]))
    with pytest.raises(InvalidState):
        qstate.DensityMatrix(np.ones((2, 3)) / 2)


def test_tiny_negative_eigenvalues_are_clamped():
    rho = qstate.DensityMatrix(np.diag([1.0 + 5e-11, -5e-11]))
    assert rho.eigenvalues.min() >= 0
    assert math.isclose(np.trace(rho.matrix).real, 1.0, abs_tol=1e-15)


def test_entropies_of_reference_states():
    assert qstate.von_neumann_entropy(qstate.plus_state()) == pytest.approx(0.0, abs=1e-14)
    assert qstate.von_neumann_entropy(np.eye(3) / 3) == pytest.approx(math.log(3))
    assert qstate.shannon_entropy([0.5, 0.5, 0.0]) == pytest.approx(math.log(2))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 5), seeds, seeds)
def test_relative_entropy_matches_logm(d, s1, s2):
    rho, sigma = rand_state(d, s1), rand_state(d, s2)
    R, S = rho.matrix, sigma.matrix
    oracle = np.trace(R @ (scipy.linalg.logm(R) - scipy.linalg.logm(S))).real
    assert qstate.quantum_relative_entropy(rho, sigma) == pytest.approx(oracle, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 5), seeds, seeds)
def test_klein_inequality(d, s1, s2):
    rho, sigma = rand_state(d, s1, rank=1), rand_state(d, s2)
    assert qstate.quantum_relative_entropy(rho, sigma) >= -1e-12
    assert qstate.quantum_relative_entropy(sigma, sigma) == pytest.approx(0.0, abs=1e-12)


def test_relative_entropy_support_violation_is_infinite():
    assert qstate.quantum_relative_entropy(qstate.plus_state(), qstate.basis_state(2, 0)) == math.inf
    assert qstate.kl_divergence([0.5, 0.5], [1.0, 0.0]) == math.inf
    # a full-rank reference keeps it finite
    assert qstate.quantum_relative_entropy(qstate.basis_state(2, 0), np.eye(2) / 2) == pytest.approx(math.log(2))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=6), st.floats(0.01, 1.0))
def test_kl_matches_scipy(w, x):
    p = np.array(w) / np.sum(w)
    q = np.roll(p, 1) * x + (1 - x) / p.size
    assert qstate.kl_divergence(p, q) == pytest.approx(float(np.sum(rel_entr(p, q))), abs=1e-12)


def test_gibbs_populations():
    H = np.diag([0.0, 1.0, 3.0])
    q, log_z = qstate.gibbs_populations(H, 2.0)
    z = 1 + math.exp(-2) + math.exp(-6)
    assert np.allclose(q, [1 / z, math.exp(-2) / z, math.exp(-6) / z])
    assert log_z == pytest.approx(math.log(z))
    q_cold, _ = qstate.gibbs_populations(H, 1e4)
    assert np.all(np.isfinite(q_cold)) and q_cold[0] == 1.0
    for bad in (0.0, -1.0, math.inf, math.nan):
        with pytest.raises(NonFiniteBeta):
            qstate.gibbs_populations(H, bad)


def test_coherence_of_plus_state():
    H = np.diag([0.0, 1.0])
    assert qstate.relative_entropy_of_coherence(qstate.plus_state(), H) == pytest.approx(math.log(2))
    assert qstate.relative_entropy_of_coherence(np.diag([0.3, 0.7]), H) == pytest.approx(0.0, abs=1e-14)
    # no coherence with respect to a fully degenerate Hamiltonian
    assert qstate.relative_entropy_of_coherence(qstate.plus_state(), np.eye(2)) == pytest.approx(0.0, abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 4), seeds, st.floats(0.1, 5.0))
def test_free_energy_decomposition(d, seed, beta):
    H = np.diag(np.arange(d, dtype=float) ** 1.3)
    rho = rand_state(d, seed)
    split = qstate.free_energy_decomposition(rho, H, beta)
    assert split.F == pytest.approx(split.F_eq + split.T_kl + split.T_coherence, abs=1e-10)
    assert split.T_kl >= -1e-14 and split.T_coherence >= -1e-14
    # the excess free energy is T times the relative entropy to the Gibbs state
    excess = qstate.quantum_relative_entropy(rho, qstate.gibbs_state(H, beta)) / beta
    assert split.F - split.F_eq == pytest.approx(excess, abs=1e-10)


def test_mutual_information_reference_values():
    bell = np.zeros(4)
    bell[[0, 3]] = 1 / math.sqrt(2)
    assert qstate.mutual_information(qstate.pure_state(bell), (2, 2)) == pytest.approx(2 * math.log(2))
    prod = np.kron(rand_state(2, 1).matrix, rand_state(3, 2).matrix)
    assert qstate.mutual_information(prod, (2, 3)) == pytest.approx(0.0, abs=1e-12)


def test_correlated_coherence_of_product_vanishes_without_resonance():
    H_S, H_E = np.diag([0.0, 1.0]), np.diag([0.0, 2.5])
    prod = np.kron(rand_state(2, 3).matrix, rand_state(2, 4).matrix)
    assert qstate.correlated_coherence(prod, H_S, H_E) == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 5), seeds, seeds)
def test_trace_distance_matches_nuclear_norm(d, s1, s2):
    a, b = rand_state(d, s1), rand_state(d, s2)
    oracle = 0.5 * np.linalg.norm(a.matrix - b.matrix, ord="nuc")
    assert qstate.trace_distance(a, b) == pytest.approx(oracle, abs=1e-12)
    assert 0.0 <= qstate.trace_distance(a, b) <= 1.0 + 1e-12


def test_populations_follow_the_hamiltonian_eigenbasis():
    # eigenbasis of sigma_x is |+>, |->; |+> is the higher-energy state
    X = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert np.allclose(qstate.populations(qstate.plus_state(), X), [0.0, 1.0])
