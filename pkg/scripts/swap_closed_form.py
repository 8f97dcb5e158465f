"""Full swap of a |+> qubit with a resonant thermal qubit at beta = ln 2.

Compares the thermal-operation totals, exact trajectory averages and a
Monte Carlo estimate with the closed-form values.  Also shows how the
fluctuation averages behave as the input moves away from the pure state.
"""

import argparse

import numpy as np

from coherep import experiments as ex
from coherep import qstate, thermalops, trajectories


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=20240601)
    args = ap.parse_args()

    op, rho, (sigma, sigma_d, xi) = ex.swap_benchmark()
    tot = thermalops.entropy_production_totals(op, rho)
    print(f"closed form   Sigma={sigma:.12f} Sigma_d={sigma_d:.12f} Xi={xi:.12f}")
    print(f"thermal op    Sigma={tot.Sigma:.12f} Sigma_d={tot.Sigma_d:.12f} Xi={tot.Xi:.12f}")

    s = trajectories.enumerate(op, rho).summary()
    print(f"exact paths   <sigma>={s['mean_sigma']:.12f} <sigma_d>={s['mean_sigma_d']:.12f} <xi>={s['mean_xi']:.12f}")
    print(
        f"              <e^-sigma>={s['mean_exp_minus_sigma']:.12f} <e^-sigma_d>={s['mean_exp_minus_sigma_d']:.12f}"
        f" backward mass on forward support={s['backward_mass_on_support']:.12f}"
    )
    m = trajectories.sample(op, rho, args.samples, args.seed).summary()
    z = (m["mean_sigma"] - sigma) / m["se_sigma"]
    print(f"sampled N={args.samples}  <sigma>={m['mean_sigma']:.6f} +- {m['se_sigma']:.6f} ({z:+.2f} SE)")

    print("\nmixing in |-> with weight eps (full swap, then partial swap theta = pi/4):")
    plus, minus = np.array([1, 1]) / np.sqrt(2), np.array([1, -1]) / np.sqrt(2)
    H = np.diag(ex.QUBIT)
    partial = thermalops.partial_swap_operation(H, H, ex.LN2, np.pi / 4)
    print(f"{'eps':>8} {'op':>8} {'<e^-sigma>-1':>14} {'<e^-sigma_d>-1':>16}")
    for eps in (0.0, 1e-9, 1e-6, 1e-3, 0.1):
        r = qstate.DensityMatrix((1 - eps) * np.outer(plus, plus) + eps * np.outer(minus, minus))
        for name, o in (("swap", op), ("partial", partial)):
            e = trajectories.enumerate(o, r).summary()
            print(f"{eps:8.0e} {name:>8} {e['mean_exp_minus_sigma'] - 1:14.3e} {e['mean_exp_minus_sigma_d'] - 1:16.3e}")


if __name__ == "__main__":
    main()
