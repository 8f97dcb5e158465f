import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coherep import qstate, thermalops, trajectories
from coherep.errors import EnumerationTooLarge, ZeroProbabilityOnSupport

LN2 = math.log(2)
QUBIT = np.diag([0.0, 1.0])
QUTRIT = np.diag([0.0, 1.0, 2.5])
seeds = st.integers(0, 2**32 - 1)


def random_case(op_seed, state_seed, H_E=QUBIT, beta=LN2):
    op = thermalops.random_energy_conserving_unitary(QUBIT, H_E, op_seed, beta=beta)
    return op, qstate.random_density_matrix(2, np.random.default_rng(state_seed))


def test_state_eigensystem_orders_by_probability():
    rho = qstate.DensityMatrix(np.array([[0.3, 0.1j], [-0.1j, 0.7]]))
    eig = trajectories.state_eigensystem(rho)
    assert np.all(np.diff(eig.probabilities) <= 0)
    rebuilt = eig.states @ np.diag(eig.probabilities) @ eig.states.conj().T
    assert np.allclose(rebuilt, rho.matrix)


@settings(max_examples=30, deadline=None)
@given(seeds, seeds, st.sampled_from(["qubit", "qutrit"]))
def test_forward_marginals(op_seed, state_seed, env):
    op, rho = random_case(op_seed, state_seed, QUBIT if env == "qubit" else QUTRIT)
    P = trajectories.forward_distribution(op, rho)
    init = trajectories.state_eigensystem(rho)
    final = trajectories.final_state_eigensystem(op, rho)
    assert P.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(P.sum(axis=(2, 3)), np.multiply.outer(init.probabilities, op.q))
    assert np.allclose(P.sum(axis=(0, 1, 3)), final.probabilities)
    B = trajectories.backward_distribution(op, rho)
    assert B.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(B.sum(axis=(0, 1)), np.multiply.outer(final.probabilities, op.q))


@settings(max_examples=30, deadline=None)
@given(seeds, seeds)
def test_collapsed_states_reconstruct_output(op_seed, state_seed):
    op, rho = random_case(op_seed, state_seed, QUTRIT)
    avg = trajectories.average_collapsed_state(op, rho)
    assert np.max(np.abs(avg - thermalops.apply(op, rho).rho_S.matrix)) <= 1e-10


@settings(max_examples=40, deadline=None)
@given(seeds, seeds, st.sampled_from(["qubit", "qutrit"]), st.floats(0.1, 3.0))
def test_detailed_fluctuation_theorem_and_averages(op_seed, state_seed, env, beta):
    op, rho = random_case(op_seed, state_seed, QUBIT if env == "qubit" else QUTRIT, beta)
    ens = trajectories.enumerate(op, rho)
    s = ens.summary()
    tot = thermalops.entropy_production_totals(op, rho)
    assert s["ft_residual"] <= 1e-10
    assert s["mean_exp_minus_sigma_d_minus_xi"] == pytest.approx(1.0, abs=1e-10)
    assert s["mean_sigma"] == pytest.approx(tot.Sigma, abs=1e-9)
    assert s["mean_sigma_d"] == pytest.approx(tot.Sigma_d, abs=1e-9)
    assert s["mean_xi"] == pytest.approx(tot.Xi, abs=1e-9)
    assert s["split_max_residual"] <= 1e-10
    assert s["dropped_mass"] <= trajectories.MAX_DROPPED_MASS
    # P_B / P_F = e^-sigma on every record
    assert np.allclose(ens.P_B / ens.P_F, np.exp(-ens.sigma), rtol=1e-10)


def test_classical_fluctuation_theorem_fails_with_coherent_full_rank_input():
    # A nearly pure |+> state keeps full rank, so the corrected theorem holds
    # while the population-only one is off by a finite amount.
    plus, minus = np.array([1, 1]) / math.sqrt(2), np.array([1, -1]) / math.sqrt(2)
    rho = qstate.DensityMatrix(0.999 * np.outer(plus, plus) + 0.001 * np.outer(minus, minus))
    op = thermalops.partial_swap_operation(QUBIT, QUBIT, LN2, math.pi / 4)
    s = trajectories.enumerate(op, rho).summary()
    assert s["ft_residual"] <= 1e-10
    assert s["classical_ft_residual"] > 1e-3


def test_incoherent_input_satisfies_classical_theorem():
    op, _ = random_case(3, 0)
    s = trajectories.enumerate(op, np.diag([0.8, 0.2])).summary()
    assert s["classical_ft_residual"] <= 1e-10
    assert s["mean_xi"] == pytest.approx(0.0, abs=1e-12)


def test_pure_input_loses_backward_mass():
    # With p_alpha = 0 for one initial eigenvector some backward paths have no
    # forward counterpart, and <e^-sigma> is the backward mass on the forward support.
    op = thermalops.swap_operation(QUBIT, QUBIT, LN2)
    s = trajectories.enumerate(op, qstate.plus_state()).summary()
    assert s["mean_exp_minus_sigma"] == pytest.approx(s["backward_mass_on_support"], abs=1e-12)
    assert s["backward_mass_on_support"] == pytest.approx(0.5, abs=1e-12)


def test_degenerate_final_basis_invariance():
    # diag(1/3, 2/3) through a pi/4 partial swap at beta = ln 2 ends at I/2.
    op = thermalops.partial_swap_operation(QUBIT, QUBIT, LN2, math.pi / 4)
    rho = np.diag([1 / 3, 2 / 3])
    out = thermalops.apply(op, rho).rho_S.matrix
    assert np.allclose(out, np.eye(2) / 2)
    base = trajectories.enumerate(op, rho).summary()
    final = trajectories.final_state_eigensystem(op, rho)
    rng = np.random.default_rng(11)
    for _ in range(5):
        rotated = trajectories.rotate_degenerate(final, rng)
        assert not np.allclose(np.abs(rotated.states), np.abs(final.states))
        s = trajectories.enumerate(op, rho, final=rotated).summary()
        assert s["mean_sigma"] == pytest.approx(base["mean_sigma"], abs=1e-9)
        assert s["mean_exp_minus_sigma"] == pytest.approx(base["mean_exp_minus_sigma"], abs=1e-9)


def test_stochastic_entropies_split_and_zero_guard():
    sigma, sigma_d, xi = trajectories.stochastic_entropies(0.6, 0.7, 0.5, 0.3, 0.4, 0.2)
    assert sigma == pytest.approx(math.log(0.6 * 0.7 / (0.5 * 0.3)))
    assert sigma_d == pytest.approx(math.log(0.4 * 0.7 / (0.2 * 0.3)))
    assert sigma == pytest.approx(sigma_d + xi)
    with pytest.raises(ZeroProbabilityOnSupport):
        trajectories.stochastic_entropies(0.0, 0.7, 0.5, 0.3, 0.4, 0.2)


def test_sampling_is_seed_and_thread_deterministic():
    op, rho = random_case(5, 6, QUTRIT)
    a = trajectories.sample(op, rho, 40_000, seed=123, threads=1)
    b = trajectories.sample(op, rho, 40_000, seed=123, threads=4)
    c = trajectories.sample(op, rho, 40_000, seed=124)
    assert np.array_equal(a.indices, b.indices)
    assert not np.array_equal(a.indices, c.indices)
    assert a.summary() == b.summary()


def test_sampled_path_frequencies_match_exact_probabilities():
    op, rho = random_case(8, 9)
    exact = trajectories.enumerate(op, rho)
    N = 200_000
    ens = trajectories.sample(op, rho, N, seed=2)
    counts = {}
    for row in map(tuple, ens.indices):
        counts[row] = counts.get(row, 0) + 1
    for row, p in zip(map(tuple, exact.indices), exact.P_F):
        if p > 1e-3:
            se = math.sqrt(p * (1 - p) / N)
            assert abs(counts.get(row, 0) / N - p) < 5 * se
    s = ens.summary()
    tot = thermalops.entropy_production_totals(op, rho)
    assert abs(s["mean_sigma"] - tot.Sigma) < 4 * s["se_sigma"]


def test_rows_follow_export_schema():
    op, rho = random_case(1, 2)
    ens = trajectories.enumerate(op, rho)
    rows = ens.rows()
    assert list(rows[0]) == list(trajectories.INDEX_NAMES) + ["P_F", "P_B", "sigma", "sigma_d", "xi"]
    rec = next(iter(ens.records))
    assert rec.sigma == pytest.approx(rows[0]["sigma"])


def test_enumeration_size_limit(monkeypatch):
    op, rho = random_case(1, 2)
    monkeypatch.setattr(trajectories, "MAX_PATHS", 10)
    with pytest.raises(EnumerationTooLarge):
        trajectories.enumerate(op, rho)
