"""Declarative scenario files.

A scenario is a TOML document with dotted sections::

    mode = "thermal_op"
    beta = 0.6931471805599453

    [system]
    energies = [0.0, 1.0]
    initial_state = "plus"

    [environment]
    energies = [0.0, 1.0]

    [unitary]
    kind = "swap"

``system.initial_state`` is ``"plus"``, ``"gibbs"``, ``"basis:n"`` or the path
of a matrix file (relative paths resolve against the scenario's directory).
Hamiltonians are diagonal in the computational basis with the listed
energies; level indices in ``rates.table`` refer to ascending energies.

Every validation failure raises :class:`ValidationError` naming the dotted
field, for example ``beta`` or ``unitary.theta``.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib

from . import davies, linalg, qstate, thermalops
from .errors import CoherepError, IoError, ParseError, ValidationError

MODES = ("davies", "thermal_op", "trajectories", "collision")
UNITARY_KINDS = ("identity", "swap", "partial_swap", "random_block", "potential")
FORMATS = ("csv", "json")
SEED_ENV_VAR = "COHEREP_SEED"


@dataclass(frozen=True)
class SystemConfig:
    energies: tuple[float, ...]
    initial_state: str


@dataclass(frozen=True)
class EnvironmentConfig:
    energies: tuple[float, ...]


@dataclass(frozen=True)
class UnitaryConfig:
    kind: str
    theta: float | None = None
    seed: int | None = None
    file: Path | None = None
    t: float | None = None


@dataclass(frozen=True)
class RatesConfig:
    """Either a uniform downward rate ``gamma`` or a full ``table``."""

    gamma: float = 1.0
    table: tuple[tuple[float, ...], ...] | None = None

    def base_rates(self):
        return self.gamma if self.table is None else np.array(self.table, dtype=float)


@dataclass(frozen=True)
class IntegrationConfig:
    dt: float = 1e-3
    t_max: float = 10.0


@dataclass(frozen=True)
class SamplingConfig:
    n: int
    seed: int


@dataclass(frozen=True)
class CollisionConfig:
    n_collisions: int = 200


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    formats: tuple[str, ...] = FORMATS


@dataclass(frozen=True)
class Scenario:
    mode: str
    beta: float
    system: SystemConfig
    environment: EnvironmentConfig | None = None
    unitary: UnitaryConfig | None = None
    rates: RatesConfig = field(default_factory=RatesConfig)
    integration: IntegrationConfig = field(default_factory=IntegrationConfig)
    sampling: SamplingConfig | None = None
    collision: CollisionConfig = field(default_factory=CollisionConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    base_dir: Path = Path(".")

    # -- builders ---------------------------------------------------------

    def system_hamiltonian(self) -> linalg.SpectralHamiltonian:
        return linalg.hermitian_eigendecomposition(np.diag(self.system.energies))

    def environment_hamiltonian(self) -> linalg.SpectralHamiltonian:
        return linalg.hermitian_eigendecomposition(np.diag(self.environment.energies))

    def initial_state(self) -> qstate.DensityMatrix:
        return _initial_state(self.system.initial_state, self.system_hamiltonian(), self.beta, self.base_dir)

    def operation(self) -> thermalops.ThermalOperation:
        H_S, H_E = self.system_hamiltonian(), self.environment_hamiltonian()
        u = self.unitary
        if u.kind == "identity":
            return thermalops.identity_operation(H_S, H_E, self.beta)
        if u.kind == "swap":
            return thermalops.swap_operation(H_S, H_E, self.beta)
        if u.kind == "partial_swap":
            return thermalops.partial_swap_operation(H_S, H_E, self.beta, u.theta)
        if u.kind == "random_block":
            return thermalops.random_energy_conserving_unitary(H_S, H_E, u.seed, beta=self.beta)
        V = linalg.read_matrix(u.file)
        return thermalops.from_potential(H_S, H_E, V, u.t, self.beta)

    def rate_matrix(self) -> davies.RateMatrix:
        return davies.build_rate_matrix(self.system_hamiltonian(), self.beta, self.rates.base_rates())

    def with_seed(self, seed: int) -> "Scenario":
        """Copy with every seed replaced by ``seed``."""
        s = self
        if s.unitary is not None and s.unitary.kind == "random_block":
            s = replace(s, unitary=replace(s.unitary, seed=seed))
        if s.sampling is not None:
            s = replace(s, sampling=replace(s.sampling, seed=seed))
        return s


# -- field checks -----------------------------------------------------------


def _table(doc: dict, name: str, allowed: set[str], required: bool = False) -> dict | None:
    sub = doc.get(name)
    if sub is None:
        if required:
            raise ValidationError(name, "section is required for this mode")
        return None
    if not isinstance(sub, dict):
        raise ValidationError(name, "must be a table")
    _reject_unknown(sub, allowed, prefix=f"{name}.")
    return sub


def _reject_unknown(doc: dict, allowed: set[str], prefix: str = "") -> None:
    for key in sorted(doc):
        if key not in allowed:
            raise ValidationError(prefix + key, "unknown field")


def _real(value, name: str, *, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(name, "must be a number")
    x = float(value)
    if not math.isfinite(x):
        raise ValidationError(name, "must be finite")
    if positive and not x > 0:
        raise ValidationError(name, "must be > 0")
    return x


def _integer(value, name: str, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(name, "must be an integer")
    if value < minimum:
        raise ValidationError(name, f"must be >= {minimum}")
    return value


def _energies(value, name: str) -> tuple[float, ...]:
    if not isinstance(value, list) or not value:
        raise ValidationError(name, "must be a non-empty list of numbers")
    return tuple(_real(x, f"{name}[{i}]") for i, x in enumerate(value))


def _required(sub: dict, key: str, prefix: str):
    if key not in sub:
        raise ValidationError(prefix + key, "is required")
    return sub[key]


def _initial_state(spec: str, H: linalg.SpectralHamiltonian, beta: float, base_dir: Path) -> qstate.DensityMatrix:
    d = H.dim
    if spec == "plus":
        return qstate.DensityMatrix(H.from_eigenbasis(np.full((d, d), 1.0 / d)))
    if spec == "gibbs":
        return qstate.gibbs_state(H, beta)
    if spec.startswith("basis:"):
        n = int(spec.split(":", 1)[1])
        return qstate.DensityMatrix(H.from_eigenbasis(np.diag(np.eye(d)[n])))
    return qstate.DensityMatrix(linalg.read_matrix(base_dir / spec))


def _check_initial_state(spec, d: int, base_dir: Path) -> str:
    name = "system.initial_state"
    if not isinstance(spec, str) or not spec:
        raise ValidationError(name, "must be 'plus', 'gibbs', 'basis:n' or a matrix file path")
    if spec in ("plus", "gibbs"):
        return spec
    if spec.startswith("basis:"):
        tail = spec.split(":", 1)[1]
        if not tail.isdigit() or int(tail) >= d:
            raise ValidationError(name, f"basis index must be an integer in [0, {d - 1}]")
        return spec
    path = base_dir / spec
    if not path.is_file():
        raise ValidationError(name, f"matrix file {spec!r} does not exist")
    try:
        M = linalg.read_matrix(path)
        if M.shape != (d, d):
            raise ValidationError(name, f"matrix is {M.shape[0]}x{M.shape[1]}, expected {d}x{d}")
        qstate.DensityMatrix(M)
    except (ValueError, CoherepError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(name, f"not a valid density matrix ({exc})") from None
    return spec


def _unitary(sub: dict, d_S: int, d_E: int, sys_E, env_E, base_dir: Path) -> UnitaryConfig:
    kind = _required(sub, "kind", "unitary.")
    if kind not in UNITARY_KINDS:
        raise ValidationError("unitary.kind", f"must be one of {', '.join(UNITARY_KINDS)}")
    if kind in ("swap", "partial_swap"):
        if sorted(sys_E) != sorted(env_E):
            raise ValidationError("unitary.kind", f"{kind} needs identical system and environment energies")
    if kind == "partial_swap":
        return UnitaryConfig(kind, theta=_real(_required(sub, "theta", "unitary."), "unitary.theta"))
    if kind == "random_block":
        return UnitaryConfig(kind, seed=_integer(_required(sub, "seed", "unitary."), "unitary.seed", 0))
    if kind == "potential":
        file = _required(sub, "file", "unitary.")
        if not isinstance(file, str) or not (base_dir / file).is_file():
            raise ValidationError("unitary.file", f"matrix file {file!r} does not exist")
        t = _real(_required(sub, "t", "unitary."), "unitary.t")
        try:
            V = linalg.read_matrix(base_dir / file)
        except ValueError as exc:
            raise ValidationError("unitary.file", str(exc)) from None
        D = d_S * d_E
        if V.shape != (D, D):
            raise ValidationError("unitary.file", f"potential is {V.shape[0]}x{V.shape[1]}, expected {D}x{D}")
        return UnitaryConfig(kind, file=base_dir / file, t=t)
    return UnitaryConfig(kind)


def _rates(sub: dict | None, d: int) -> RatesConfig:
    if sub is None:
        return RatesConfig()
    if "gamma" in sub and "table" in sub:
        raise ValidationError("rates", "give either gamma or table, not both")
    if "table" in sub:
        rows = sub["table"]
        if not isinstance(rows, list) or len(rows) != d or any(not isinstance(r, list) or len(r) != d for r in rows):
            raise ValidationError("rates.table", f"must be a {d}x{d} list of lists")
        table = tuple(
            tuple(_real(x, f"rates.table[{i}][{j}]") for j, x in enumerate(r)) for i, r in enumerate(rows)
        )
        g = np.array(table)
        if np.any(g < 0):
            raise ValidationError("rates.table", "rates must be non-negative")
        if np.any(np.tril(g) != 0):
            raise ValidationError("rates.table", "entry [m][n] must be zero unless n > m (downward rates only)")
        return RatesConfig(table=table)
    gamma = _real(sub.get("gamma", 1.0), "rates.gamma")
    if gamma < 0:
        raise ValidationError("rates.gamma", "must be >= 0")
    return RatesConfig(gamma=gamma)


# -- loader -----------------------------------------------------------------


def parse_scenario_text(text: str, source: str = "<scenario>") -> dict:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"{source}: {exc}") from None


def load_scenario(path) -> Scenario:
    """Read, parse and fully validate a scenario file.

    Raises
    ------
    IoError
        The file cannot be read.
    ParseError
        The file is not valid TOML.
    ValidationError
        A field is missing, unknown or violates its rule.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror or exc}") from None
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not UTF-8 text ({exc.reason})") from None
    return scenario_from_dict(parse_scenario_text(text, str(path)), base_dir=path.parent)


def scenario_from_dict(doc: dict, base_dir: Path = Path(".")) -> Scenario:
    _reject_unknown(
        doc,
        {"mode", "beta", "system", "environment", "unitary", "rates", "integration", "sampling", "collision", "output"},
    )
    mode = _required(doc, "mode", "")
    if mode not in MODES:
        raise ValidationError("mode", f"must be one of {', '.join(MODES)}")
    beta = _real(_required(doc, "beta", ""), "beta", positive=True)

    sys_t = _table(doc, "system", {"energies", "initial_state"}, required=True)
    sys_E = _energies(_required(sys_t, "energies", "system."), "system.energies")
    d_S = len(sys_E)
    system = SystemConfig(sys_E, _check_initial_state(_required(sys_t, "initial_state", "system."), d_S, base_dir))

    needs_env = mode != "davies"
    env_t = _table(doc, "environment", {"energies"}, required=needs_env)
    environment = unitary = None
    if env_t is not None:
        environment = EnvironmentConfig(_energies(_required(env_t, "energies", "environment."), "environment.energies"))
    u_t = _table(doc, "unitary", {"kind", "theta", "seed", "file", "t"}, required=needs_env)
    if needs_env:
        d_E = len(environment.energies)
        if d_S * d_E > thermalops.MAX_COMPOSITE_DIM:
            raise ValidationError(
                "environment.energies", f"composite dimension {d_S * d_E} exceeds {thermalops.MAX_COMPOSITE_DIM}"
            )
        unitary = _unitary(u_t, d_S, d_E, sys_E, environment.energies, base_dir)

    rates_t = _table(doc, "rates", {"gamma", "table"})
    rates = _rates(rates_t, d_S)
    if mode == "davies":
        H = linalg.hermitian_eigendecomposition(np.diag(sys_E))
        if H.is_degenerate:
            raise ValidationError("system.energies", "levels must be non-degenerate for Davies dynamics")
        try:
            davies.check_bohr_frequencies(H)
        except CoherepError as exc:
            raise ValidationError("system.energies", f"Bohr frequencies must be non-degenerate ({exc})") from None

    int_t = _table(doc, "integration", {"dt", "t_max"}) or {}
    dt = _real(int_t.get("dt", IntegrationConfig.dt), "integration.dt", positive=True)
    t_max = _real(int_t.get("t_max", IntegrationConfig.t_max), "integration.t_max", positive=True)
    if t_max < dt:
        raise ValidationError("integration.t_max", "must be >= integration.dt")

    samp_t = _table(doc, "sampling", {"n", "seed"})
    sampling = None
    if samp_t is not None:
        sampling = SamplingConfig(
            n=_integer(_required(samp_t, "n", "sampling."), "sampling.n", 1),
            seed=_integer(_required(samp_t, "seed", "sampling."), "sampling.seed", 0),
        )

    col_t = _table(doc, "collision", {"n_collisions"}) or {}
    collision = CollisionConfig(
        _integer(col_t.get("n_collisions", CollisionConfig.n_collisions), "collision.n_collisions", 1)
    )

    out_t = _table(doc, "output", {"directory", "formats"}) or {}
    directory = out_t.get("directory", OutputConfig.directory)
    if not isinstance(directory, str) or not directory:
        raise ValidationError("output.directory", "must be a non-empty string")
    formats = out_t.get("formats", list(FORMATS))
    if not isinstance(formats, list) or not formats or any(f not in FORMATS for f in formats):
        raise ValidationError("output.formats", f"must be a non-empty list drawn from {', '.join(FORMATS)}")

    return Scenario(
        mode=mode,
        beta=beta,
        system=system,
        environment=environment,
        unitary=unitary,
        rates=rates,
        integration=IntegrationConfig(dt, t_max),
        sampling=sampling,
        collision=collision,
        output=OutputConfig(directory, tuple(dict.fromkeys(formats))),
        base_dir=base_dir,
    )
