"""Exit criteria, one test per criterion.

Each criterion is a plain function returning ``(passed, detail)`` so the file
also runs as a script: ``python tests/test_acceptance.py`` prints one
PASS/FAIL line per criterion.  Under pytest the same lines appear in the
terminal summary.  Tolerances are the published ones and are not relaxed.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from coherep import experiments as ex
from coherep import qstate, thermalops, trajectories

pytestmark = pytest.mark.acceptance

FT_BATCH = (
    ex.BatchConfig(ex.QUBIT, ex.QUBIT, seed=2024),
    ex.BatchConfig(ex.QUBIT, ex.QUTRIT, seed=2025),
)


def _fmt(x: float) -> str:
    return f"{x:.3e}"


_batch_cache: dict = {}


def _ft_batch() -> ex.FluctuationBatchResult:
    if "ft" not in _batch_cache:
        _batch_cache["ft"] = ex.fluctuation_batch(FT_BATCH)
    return _batch_cache["ft"]


def _audit_batch() -> ex.AuditBatchResult:
    if "audit" not in _batch_cache:
        _batch_cache["audit"] = ex.audit_batch(200, seed=7)
    return _batch_cache["audit"]


def _davies(dt: float):
    key = ("davies", dt)
    if key not in _batch_cache:
        _batch_cache[key] = ex.davies_qubit(dt=dt)
    return _batch_cache[key]


def criterion_1():
    r = _ft_batch()
    ok = r.n_pairs == 400 and r.max_ft_residual <= 1e-10 and r.seconds <= 5.0
    return ok, f"max|<e^-sigma>-1| = {_fmt(r.max_ft_residual)} over {r.n_pairs} pairs in {r.seconds:.2f} s"


def criterion_2():
    r = _ft_batch()
    ok = (
        r.max_sigma_residual <= 1e-9
        and r.max_sigma_d_residual <= 1e-9
        and r.max_xi_residual <= 1e-9
        and r.max_split_residual <= 1e-10
    )
    detail = (
        f"sigma {_fmt(r.max_sigma_residual)}, sigma_d {_fmt(r.max_sigma_d_residual)}, "
        f"xi {_fmt(r.max_xi_residual)}, per-record split {_fmt(r.max_split_residual)}"
    )
    return ok, detail


def criterion_3():
    op, rho, closed = ex.swap_benchmark()
    got = thermalops.entropy_production_totals(op, rho)
    published = (0.5 * math.log(9 / 2), 0.5 * math.log(9 / 8), math.log(2))
    err_closed = max(abs(a - b) for a, b in zip(got, closed))
    err_published = max(abs(a - b) for a, b in zip(got, published))
    ok = err_closed <= 1e-9 and err_published <= 1e-9
    detail = (
        f"Sigma={got.Sigma:.9f} Sigma_d={got.Sigma_d:.9f} Xi={got.Xi:.9f}; "
        f"max err {_fmt(max(err_closed, err_published))}"
    )
    return ok, detail


def criterion_4():
    r = _audit_batch()
    worst = max(r.max_residuals.values())
    return worst <= 1e-9 and r.n_pairs == 200, f"max residual {_fmt(worst)} over {r.n_pairs} pairs"


def criterion_5():
    r = _audit_batch()
    ok = r.bound_violations == 0 and r.max_column_sum_residual <= 1e-9 and r.max_gibbs_fixed_point_residual <= 1e-9
    detail = (
        f"{r.bound_violations} bound violations; column-sum {_fmt(r.max_column_sum_residual)}, "
        f"Gibbs fixed point {_fmt(r.max_gibbs_fixed_point_residual)}"
    )
    return ok, detail


def criterion_6():
    tr = _davies(1e-3)
    tr2 = _davies(5e-4)
    rates = tr.rates
    min_rate = min(float(np.min(rates.Pi)), float(np.min(rates.Pi_d)), float(np.min(rates.Upsilon)))
    positive = min_rate >= -1e-9

    tm, res = tr.midpoint_balance_residuals()
    tm2, res2 = tr2.midpoint_balance_residuals()
    balance = float(res.max()) <= 1e-5
    improvement = float(res.max() / res2.max())
    improves = improvement >= 4.0
    # Diagnostic only: the same quantities away from the pure initial state.
    late, late2 = tm > 0.1, tm2 > 0.1
    late_gain = float(res[late].max() / res2[late2].max())

    coh = np.abs(tr.coherences[:, 0, 1]) / abs(tr.coherences[0, 0, 1])
    coh_err = float(np.max(np.abs(coh - np.exp(-0.75 * tr.t))))
    coherence = coh_err <= 1e-6

    def mark(ok):
        return "ok" if ok else "FAIL"

    detail = (
        f"min rate {_fmt(min_rate)} [{mark(positive)}]; "
        f"max balance residual {_fmt(res.max())} [{mark(balance)}]; "
        f"dt-halving gain {improvement:.3f} [{mark(improves)}]; "
        f"coherence err {_fmt(coh_err)} [{mark(coherence)}]; "
        f"t > 0.1 only: residual {_fmt(res[late].max())}, gain {late_gain:.3f}"
    )
    return positive and balance and improves and coherence, detail


def criterion_7():
    tr = _davies(1e-3)
    int_pid, int_ups = tr.integrated_production()
    H = tr.H
    q, _ = qstate.gibbs_populations(H, tr.W.beta)
    p0, pT = tr.rates.p[0], tr.rates.p[-1]
    sigma_d = qstate.kl_divergence(p0, q) - qstate.kl_divergence(pT, q)
    rho0, rhoT = qstate.DensityMatrix(tr.states[0]), qstate.DensityMatrix(tr.states[-1])
    xi = qstate.relative_entropy_of_coherence(rho0, H) - qstate.relative_entropy_of_coherence(rhoT, H)
    e1, e2 = abs(int_pid - sigma_d), abs(int_ups - xi)
    return e1 <= 1e-6 and e2 <= 1e-6, f"|int Pi_d - Sigma_d| = {_fmt(e1)}, |int Upsilon - Xi| = {_fmt(e2)}"


def criterion_8():
    op, rho, _ = ex.swap_benchmark()
    s = trajectories.enumerate(op, rho).summary()
    dev_classical = abs(s["mean_exp_minus_sigma_d"] - 1.0)
    dev_corrected = abs(s["mean_exp_minus_sigma_d_minus_xi"] - 1.0)
    a, b = dev_classical > 1e-6, dev_corrected <= 1e-10
    detail = (
        f"|<e^-sigma_d>-1| = {_fmt(dev_classical)} [{'ok' if a else 'FAIL: needs > 1e-6'}], "
        f"|<e^-(sigma_d+xi)>-1| = {_fmt(dev_corrected)} [{'ok' if b else 'FAIL: needs <= 1e-10'}]"
    )
    return a and b, detail


def criterion_9():
    op, rho, (sigma, _, _) = ex.swap_benchmark()
    start = time.perf_counter()
    ens = trajectories.sample(op, rho, 100_000, seed=20240601)
    s = ens.summary()
    seconds = time.perf_counter() - start
    z = (s["mean_sigma"] - sigma) / s["se_sigma"]
    ok = abs(z) <= 3.0 and seconds <= 10.0
    return ok, f"<sigma> = {s['mean_sigma']:.6f} +- {s['se_sigma']:.6f} vs {sigma:.6f} ({z:+.2f} SE) in {seconds:.2f} s"


def criterion_10():
    r = ex.collision_markov_check(theta=0.05, n_collisions=2000)
    thetas = np.logspace(-3, -1, 9)
    slope = ex.loglog_slope(thetas, ex.environment_perturbation(thetas))
    ok = r.relative_error <= 0.05 and abs(slope - 2.0) <= 0.1
    detail = (
        f"fitted rate {r.fitted_rate:.6e} vs Pauli {r.pauli_rate:.6e} (rel err {_fmt(r.relative_error)}); "
        f"log-log slope {slope:.4f}"
    )
    return ok, detail


CRITERIA = {n: globals()[f"criterion_{n}"] for n in range(1, 11)}


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, record_criterion):
    passed, detail = CRITERIA[number]()
    record_criterion(number, passed, detail)
    assert passed, detail


if __name__ == "__main__":
    for n, fn in CRITERIA.items():
        passed, detail = fn()
        print(f"criterion {n:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
