import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coherep import qstate, thermalops
from coherep.errors import DimensionMismatch, NonCommutingPotential, TrivialOperationWarning

LN2 = math.log(2)
QUBIT = np.diag([0.0, 1.0])
QUTRIT = np.diag([0.0, 1.0, 2.5])
seeds = st.integers(0, 2**32 - 1)


def random_op(H_E, seed, beta=LN2):
    return thermalops.random_energy_conserving_unitary(QUBIT, H_E, seed, beta=beta)


def test_full_swap_endpoint_states():
    op = thermalops.swap_operation(QUBIT, QUBIT, LN2)
    out = thermalops.apply(op, qstate.plus_state())
    assert np.allclose(out.rho_S.matrix, np.diag([2 / 3, 1 / 3]), atol=1e-15)
    assert np.allclose(out.rho_E.matrix, qstate.plus_state().matrix, atol=1e-15)
    tot = thermalops.entropy_production_totals(op, qstate.plus_state())
    assert tot.Sigma == pytest.approx(0.5 * math.log(9 / 2), abs=1e-12)
    assert tot.Sigma_d == pytest.approx(0.5 * math.log(9 / 8), abs=1e-12)
    assert tot.Xi == pytest.approx(LN2, abs=1e-12)


def test_full_swap_channel():
    op = thermalops.swap_operation(QUBIT, QUBIT, LN2)
    ch = thermalops.channel_summary(op)
    assert np.allclose(ch.Q, [[2 / 3, 2 / 3], [1 / 3, 1 / 3]])
    assert np.allclose(ch.alpha[0, 1], 0.0)
    rep = thermalops.conservation_report(op, qstate.plus_state())
    assert rep["coherence_env_final"] == pytest.approx(LN2)
    assert rep["correlated_coherence"] == pytest.approx(0.0, abs=1e-12)
    assert rep["mutual_information"] == pytest.approx(0.0, abs=1e-12)


def test_identity_operation_produces_nothing():
    op = thermalops.identity_operation(QUBIT, QUTRIT, 1.0)
    rho = qstate.random_density_matrix(2, np.random.default_rng(0))
    tot = thermalops.entropy_production_totals(op, rho)
    assert max(abs(x) for x in tot) < 1e-14
    ch = thermalops.channel_summary(op)
    assert np.allclose(ch.Q, np.eye(2)) and np.allclose(ch.alpha, 1.0)


@pytest.mark.parametrize("theta", [0.0, 0.05, 0.7, math.pi / 2])
def test_partial_swap_transition_probabilities(theta):
    op = thermalops.partial_swap_operation(QUBIT, QUBIT, LN2, theta)
    q = op.q
    Q = thermalops.channel_summary(op).Q
    s2 = math.sin(theta) ** 2
    assert Q[0, 1] == pytest.approx(s2 * q[0], abs=1e-14)
    assert Q[1, 0] == pytest.approx(s2 * q[1], abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(seeds, seeds, st.sampled_from(["qubit", "qutrit"]), st.floats(0.1, 3.0))
def test_conservation_laws_hold(op_seed, state_seed, env, beta):
    op = random_op(QUBIT if env == "qubit" else QUTRIT, op_seed, beta)
    rho = qstate.random_density_matrix(2, np.random.default_rng(state_seed))
    rep = thermalops.conservation_report(op, rho)
    for key in thermalops.RESIDUAL_KEYS:
        assert rep[key] <= 1e-9, key
    # second law and non-negativity of both parts for thermal operations
    assert rep["Sigma"] >= -1e-12 and rep["Sigma_d"] >= -1e-12 and rep["Xi"] >= -1e-12


@settings(max_examples=40, deadline=None)
@given(seeds, seeds)
def test_channel_summary_predicts_apply(op_seed, state_seed):
    op = random_op(QUBIT, op_seed)
    rho = qstate.random_density_matrix(2, np.random.default_rng(state_seed))
    ch = thermalops.channel_summary(op)
    assert ch.completeness_residual() < 1e-12
    out = thermalops.apply(op, rho).rho_S.matrix
    assert np.allclose(thermalops.predict(ch, rho, QUBIT), out, atol=1e-12)
    assert not ch.coherence_bound_violations(tol=1e-10)
    q, _ = qstate.gibbs_populations(QUBIT, LN2)
    assert np.allclose(ch.Q.sum(axis=0), 1.0) and np.allclose(ch.Q @ q, q)


def test_qubit_qutrit_blocks():
    op = random_op(QUTRIT, 4)
    # product basis n * 3 + mu with energies 0, 1, 2.5, 1, 2, 3.5
    assert sorted(op.blocks) == sorted([(0,), (1, 3), (4,), (2,), (5,)])
    assert not op.is_trivial


def test_trivial_operation_warns():
    with pytest.warns(TrivialOperationWarning):
        op = thermalops.random_energy_conserving_unitary(QUBIT, np.diag([0.0, 2.5]), 0)
    assert op.is_trivial


def test_from_potential_matches_partial_swap_up_to_free_phases():
    V = np.zeros((4, 4))
    V[1, 2] = V[2, 1] = 0.3
    op = thermalops.from_potential(QUBIT, QUBIT, V, 1.5, LN2)
    ref = thermalops.partial_swap_operation(QUBIT, QUBIT, LN2, 0.45)
    rho = qstate.random_density_matrix(2, np.random.default_rng(9))
    for a, b in zip(thermalops.entropy_production_totals(op, rho), thermalops.entropy_production_totals(ref, rho)):
        assert a == pytest.approx(b, abs=1e-12)


def test_non_commuting_potential_is_rejected():
    V = np.zeros((4, 4))
    V[0, 3] = V[3, 0] = 0.1
    with pytest.raises(NonCommutingPotential) as info:
        thermalops.from_potential(QUBIT, QUBIT, V, 1.0, LN2)
    assert info.value.norm > info.value.tol


def test_construction_checks():
    with pytest.raises(ValueError):
        thermalops.ThermalOperation(QUBIT, QUBIT, LN2, 2 * np.eye(4))
    X = np.kron(np.array([[0, 1], [1, 0]]), np.eye(2))
    with pytest.raises(ValueError):
        thermalops.ThermalOperation(QUBIT, QUBIT, LN2, X)
    with pytest.raises(DimensionMismatch):
        thermalops.ThermalOperation(QUBIT, QUBIT, LN2, np.eye(3))
    with pytest.raises(ValueError):
        thermalops.swap_operation(QUBIT, QUTRIT, LN2)


def test_collision_sequence_relaxes_to_gibbs():
    op = thermalops.partial_swap_operation(QUBIT, QUBIT, LN2, 0.4)
    run = thermalops.collision_sequence(op, qstate.plus_state(), 200)
    gibbs = qstate.gibbs_state(QUBIT, LN2)
    assert len(run.states) == 201 and len(run.sigma) == 200
    # coherences shrink by cos(theta) per collision, populations by cos^2(theta)
    coh = np.array([abs(r.matrix[0, 1]) for r in run.states])
    assert np.allclose(coh, 0.5 * math.cos(0.4) ** np.arange(201), rtol=1e-10, atol=1e-16)
    pops = np.array([r.matrix[1, 1].real for r in run.states])
    assert np.allclose(pops - 1 / 3, (0.5 - 1 / 3) * math.cos(0.4) ** (2 * np.arange(201)), atol=1e-13)
    assert qstate.trace_distance(run.states[-1], gibbs) < 1e-7
    assert min(run.sigma) >= -1e-14
    # total entropy production is bounded by the initial excess free energy
    bound = qstate.quantum_relative_entropy(qstate.plus_state(), gibbs)
    assert sum(run.sigma) >= bound - 1e-9


def test_collision_sequence_accepts_a_builder():
    built = []

    def builder(k):
        built.append(k)
        return thermalops.partial_swap_operation(QUBIT, QUBIT, LN2, 0.1 * (k + 1))

    thermalops.collision_sequence(builder, qstate.basis_state(2, 1), 3)
    assert built == [0, 1, 2]
