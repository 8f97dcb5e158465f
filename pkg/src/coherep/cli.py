"""Command-line front end: ``coherep run | validate | version``.

Exit codes
----------
0 success, 2 parse error, 3 validation error, 4 engine error (an
``error.json`` document is written to the output directory and echoed on
stderr), 5 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, davies, qstate, thermalops, trajectories
from .errors import CoherepError, IoError, ParseError, ValidationError
from .outputs import columns_to_rows, write_csv, write_json
from .scenario import SEED_ENV_VAR, Scenario, load_scenario

log = logging.getLogger("coherep")

EXIT_OK, EXIT_PARSE, EXIT_VALIDATION, EXIT_ENGINE, EXIT_IO = 0, 2, 3, 4, 5

RELAXATION_SCHEMA = ("k", "trace_distance_to_gibbs", "Sigma_k")
TRAJECTORY_SCHEMA = trajectories.INDEX_NAMES + ("P_F", "P_B", "sigma", "sigma_d", "xi")


def _davies(s: Scenario, out: Path) -> list[Path]:
    H = s.system_hamiltonian()
    W = s.rate_matrix()
    rho0 = s.initial_state()
    traj = davies.propagate(rho0, H, W, s.integration.dt, s.integration.t_max)
    written = []
    if "csv" in s.output.formats:
        cols = traj.columns()
        write_csv(out / "timeseries.csv", columns_to_rows(cols), list(cols))
        written.append(out / "timeseries.csv")
    if "json" in s.output.formats:
        int_pid, int_ups = traj.integrated_production()
        r = traj.rates
        q, _ = qstate.gibbs_populations(H, s.beta)
        rho_T = qstate.DensityMatrix(traj.states[-1])
        doc = {
            "dt": s.integration.dt,
            "t_max": float(traj.t[-1]),
            "n_steps": len(traj) - 1,
            "integrated_Pi_d": int_pid,
            "integrated_Upsilon": int_ups,
            "Sigma_d_endpoints": qstate.kl_divergence(r.p[0], q) - qstate.kl_divergence(r.p[-1], q),
            "Xi_endpoints": qstate.relative_entropy_of_coherence(rho0, H)
            - qstate.relative_entropy_of_coherence(rho_T, H),
            "min_Pi": float(np.min(r.Pi)),
            "min_Pi_d": float(np.min(r.Pi_d)),
            "min_Upsilon": float(np.min(r.Upsilon)),
            "final_trace_distance_to_gibbs": qstate.trace_distance(rho_T, qstate.gibbs_state(H, s.beta)),
            "detailed_balance_residual": W.detailed_balance_residual(),
        }
        write_json(out / "summary.json", doc)
        written.append(out / "summary.json")
    return written


def audit_document(op: thermalops.ThermalOperation, rho_S) -> dict:
    """Flat audit of one thermal operation acting on ``rho_S``."""
    doc = dict(thermalops.conservation_report(op, rho_S))
    doc["max_residual"] = max(doc[k] for k in thermalops.RESIDUAL_KEYS)
    ch = thermalops.channel_summary(op)
    d = ch.Q.shape[0]
    q, _ = qstate.gibbs_populations(op.H_S, op.beta)
    for m in range(d):
        for n in range(d):
            doc[f"Q_{m}_{n}"] = float(ch.Q[m, n])
    doc["Q_column_sum_residual"] = float(np.max(np.abs(ch.Q.sum(axis=0) - 1.0)))
    doc["Q_gibbs_fixed_point_residual"] = float(np.max(np.abs(ch.Q @ q - q)))
    doc["kraus_completeness_residual"] = ch.completeness_residual()
    doc["alpha_defined"] = ch.alpha is not None
    if ch.alpha is not None:
        for n in range(d):
            for m in range(d):
                if n != m:
                    doc[f"alpha_{n}_{m}_re"] = float(ch.alpha[n, m].real)
                    doc[f"alpha_{n}_{m}_im"] = float(ch.alpha[n, m].imag)
        doc["coherence_bound_violations"] = len(ch.coherence_bound_violations())
    doc["n_blocks"] = len(op.blocks)
    doc["max_block_size"] = max(len(b) for b in op.blocks)
    doc["blocks"] = ";".join(",".join(str(i) for i in b) for b in op.blocks)
    doc["beta"] = op.beta
    return doc


def _thermal_op(s: Scenario, out: Path) -> list[Path]:
    doc = audit_document(s.operation(), s.initial_state())
    write_json(out / "audit.json", doc)
    return [out / "audit.json"]


def _trajectories(s: Scenario, out: Path, threads: int) -> list[Path]:
    op = s.operation()
    rho = s.initial_state()
    if s.sampling is None:
        ens = trajectories.enumerate(op, rho)
    else:
        ens = trajectories.sample(op, rho, s.sampling.n, s.sampling.seed, threads=threads)
    written = []
    if "csv" in s.output.formats:
        write_csv(out / "trajectories.csv", ens.rows(), TRAJECTORY_SCHEMA)
        written.append(out / "trajectories.csv")
    if "json" in s.output.formats:
        doc = ens.summary()
        doc.update(thermalops.entropy_production_totals(op, rho)._asdict())
        write_json(out / "summary.json", doc)
        written.append(out / "summary.json")
    return written


def _collision(s: Scenario, out: Path) -> list[Path]:
    op = s.operation()
    run = thermalops.collision_sequence(op, s.initial_state(), s.collision.n_collisions)
    gibbs = qstate.gibbs_state(op.H_S, s.beta)
    cumulative = np.concatenate([[0.0], np.cumsum(run.sigma)])
    rows = [
        {"k": k, "trace_distance_to_gibbs": qstate.trace_distance(rho, gibbs), "Sigma_k": float(cumulative[k])}
        for k, rho in enumerate(run.states)
    ]
    written = []
    if "csv" in s.output.formats:
        write_csv(out / "relaxation.csv", rows, RELAXATION_SCHEMA)
        written.append(out / "relaxation.csv")
    if "json" in s.output.formats:
        doc = {
            "n_collisions": s.collision.n_collisions,
            "final_trace_distance_to_gibbs": rows[-1]["trace_distance_to_gibbs"],
            "Sigma_total": float(cumulative[-1]),
        }
        write_json(out / "summary.json", doc)
        written.append(out / "summary.json")
    return written


def run_scenario(s: Scenario, out_dir, threads: int = 1) -> list[Path]:
    """Execute ``s`` and write its artifacts under ``out_dir``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {out}: {exc.strerror or exc}") from None
    if s.mode == "davies":
        return _davies(s, out)
    if s.mode == "thermal_op":
        return _thermal_op(s, out)
    if s.mode == "trajectories":
        return _trajectories(s, out, threads)
    return _collision(s, out)


def seed_override() -> int | None:
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None or raw.strip() == "":
        return None
    try:
        seed = int(raw)
    except ValueError:
        raise ValidationError(SEED_ENV_VAR, "must be a non-negative integer") from None
    if seed < 0:
        raise ValidationError(SEED_ENV_VAR, "must be a non-negative integer")
    return seed


def _load(path) -> Scenario:
    s = load_scenario(path)
    seed = seed_override()
    return s if seed is None else s.with_seed(seed)


def _error_document(exc: BaseException, code: int, scenario: str) -> dict:
    return {"error": type(exc).__name__, "message": str(exc), "exit_code": code, "scenario": scenario}


def _report(exc: BaseException, code: int, scenario: str) -> int:
    print(json.dumps(_error_document(exc, code, scenario), sort_keys=True), file=sys.stderr)
    return code


def _cmd_validate(args) -> int:
    try:
        s = _load(args.scenario)
    except ParseError as exc:
        return _report(exc, EXIT_PARSE, args.scenario)
    except ValidationError as exc:
        return _report(exc, EXIT_VALIDATION, args.scenario)
    except IoError as exc:
        return _report(exc, EXIT_IO, args.scenario)
    print(f"{args.scenario}: valid {s.mode} scenario")
    return EXIT_OK


def _cmd_run(args) -> int:
    try:
        s = _load(args.scenario)
    except ParseError as exc:
        return _report(exc, EXIT_PARSE, args.scenario)
    except ValidationError as exc:
        return _report(exc, EXIT_VALIDATION, args.scenario)
    except IoError as exc:
        return _report(exc, EXIT_IO, args.scenario)
    out = Path(args.out) if args.out else Path(s.output.directory)
    try:
        written = run_scenario(s, out, threads=args.threads)
    except IoError as exc:
        return _report(exc, EXIT_IO, args.scenario)
    except (CoherepError, ValueError, ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        doc = _error_document(exc, EXIT_ENGINE, args.scenario)
        try:
            write_json(out / "error.json", doc)
        except IoError:
            log.warning("could not write %s", out / "error.json")
        return _report(exc, EXIT_ENGINE, args.scenario)
    for path in written:
        print(path)
    return EXIT_OK


def _positive_int(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return n


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coherep", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario and write its artifacts")
    run.add_argument("scenario")
    run.add_argument("--out", help="output directory (overrides output.directory)")
    run.add_argument("--threads", type=_positive_int, default=1, help="worker threads for sampling")
    run.set_defaults(func=_cmd_run)
    val = sub.add_parser("validate", help="parse and validate a scenario without running it")
    val.add_argument("scenario")
    val.set_defaults(func=_cmd_validate)
    ver = sub.add_parser("version", help="print the package version")
    ver.set_defaults(func=lambda args: print(f"coherep {__version__}") or EXIT_OK)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
