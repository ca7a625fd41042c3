"""Experiment configuration: versioned TOML in, validated dataclasses out.

The parser is strict: unknown keys, wrong types, or out-of-range values
raise ConfigError with the offending table and field named, so a batch run
fails before any linear algebra starts.  emit_config writes the exact same
schema back; parse, emit, parse is the identity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import tomli

from .linalg import DensityMatrix
from .models import (
    OpenSystemModel,
    ReservoirSpec,
    SystemModel,
    build_open_system,
    perturbed_reservoir_state,
    product_state,
    random_mixed_state,
    random_pure_state,
    two_level_system,
)

__all__ = [
    "ConfigError",
    "SCHEMA_VERSION",
    "STATE_TAGS",
    "ROUTES",
    "AlphaGrid",
    "ModelConfig",
    "StateConfig",
    "GridsConfig",
    "TolerancesConfig",
    "ScanConfig",
    "ScalingConfig",
    "ExperimentConfig",
    "parse_config",
    "load_config",
    "emit_config",
    "build_model",
    "initial_state",
    "scan_alphas",
]

SCHEMA_VERSION = 1
STATE_TAGS = ("reference", "product", "pure-random", "mixed-random", "perturbed-gibbs")
ROUTES = ("direct", "trace", "spectral", "cocycle-product")


class ConfigError(ValueError):
    """A configuration file failed validation; the message names the field."""


@dataclass(frozen=True)
class AlphaGrid:
    min: float
    max: float
    points: int

    def values(self) -> np.ndarray:
        return np.linspace(self.min, self.max, self.points)


@dataclass(frozen=True)
class ModelConfig:
    kind: str
    omega_diag: tuple[float, ...] = ()
    hamiltonian: tuple[tuple[float, ...], ...] = ()
    dim_s: int = 2
    level_splitting: float = 1.0
    coupling_strength: float = 0.5
    reservoirs: tuple[ReservoirSpec, ...] = ()


@dataclass(frozen=True)
class StateConfig:
    tag: str = "reference"
    weights: tuple[float, ...] | None = None
    reservoir: int = 0
    beta_prime: float | None = None
    seed: int = 7


@dataclass(frozen=True)
class GridsConfig:
    times: tuple[float, ...] = (0.25, 0.5, 1.0, 2.0)
    alpha_re: AlphaGrid = AlphaGrid(0.0, 1.0, 9)
    alpha_im: AlphaGrid = AlphaGrid(-10.0, 10.0, 41)


@dataclass(frozen=True)
class TolerancesConfig:
    cluster_tol: float = 1e-9
    atom_merge_tol: float = 1e-8
    threshold: float | None = None


@dataclass(frozen=True)
class ScanConfig:
    routes: tuple[str, ...] = ROUTES


@dataclass(frozen=True)
class ScalingConfig:
    chain_lengths: tuple[int, ...] = (1, 2, 3)
    reservoir: int = 0
    beta_prime: float | None = None
    time: float = 1.0


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelConfig
    state: StateConfig = StateConfig()
    grids: GridsConfig = GridsConfig()
    tolerances: TolerancesConfig = TolerancesConfig()
    scan: ScanConfig = ScanConfig()
    scaling: ScalingConfig = ScalingConfig()
    out_dir: str | None = None
    schema_version: int = SCHEMA_VERSION


class _Table:
    """A TOML table wrapper that tracks consumed keys and reports leftovers."""

    def __init__(self, data: dict, path: str) -> None:
        self.data = data
        self.path = path
        self.seen: set[str] = set()

    def take(self, key: str, kind, *, required: bool = False, default=None):
        if key not in self.data:
            if required:
                raise ConfigError(f"{self.path}: missing required key '{key}'")
            return default
        self.seen.add(key)
        value = self.data[key]
        if kind is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
            raise ConfigError(f"{self.path}.{key}: expected an integer, got {value!r}")
        if not isinstance(value, kind):
            raise ConfigError(f"{self.path}.{key}: expected {kind.__name__}, got {type(value).__name__}")
        return value

    def subtable(self, key: str, *, required: bool = False) -> "_Table | None":
        raw = self.take(key, dict, required=required)
        if raw is None:
            return None
        return _Table(raw, f"{self.path}.{key}")

    def finish(self) -> None:
        extra = sorted(set(self.data) - self.seen)
        if extra:
            raise ConfigError(f"{self.path}: unknown key '{extra[0]}'")


def _float_list(table: _Table, key: str, *, required: bool = False, default=None):
    raw = table.take(key, list, required=required, default=default)
    if raw is default and not required:
        return default
    out = []
    for i, v in enumerate(raw):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{table.path}.{key}[{i}]: expected a number, got {v!r}")
        out.append(float(v))
    return tuple(out)


def _parse_alpha_grid(table: _Table | None, default: AlphaGrid, path: str) -> AlphaGrid:
    if table is None:
        return default
    lo = table.take("min", float, required=True)
    hi = table.take("max", float, required=True)
    points = table.take("points", int, required=True)
    table.finish()
    if points < 1:
        raise ConfigError(f"{path}.points: must be at least 1")
    if hi < lo:
        raise ConfigError(f"{path}: max must not be below min")
    return AlphaGrid(lo, hi, points)


def _parse_model(table: _Table) -> ModelConfig:
    kind = table.take("kind", str, required=True)
    if kind == "two-level":
        diag = _float_list(table, "omega_diag", required=True)
        ham_raw = table.take("hamiltonian", list, required=True)
        rows = []
        for i, row in enumerate(ham_raw):
            if not isinstance(row, list):
                raise ConfigError(f"{table.path}.hamiltonian[{i}]: expected a row of numbers")
            for x in row:
                if isinstance(x, bool) or not isinstance(x, (int, float)):
                    raise ConfigError(f"{table.path}.hamiltonian[{i}]: expected a row of numbers, got {x!r}")
            rows.append(tuple(float(x) for x in row))
        table.finish()
        d = len(diag)
        if d < 2:
            raise ConfigError(f"{table.path}.omega_diag: need at least two levels")
        if any(x <= 0 for x in diag):
            raise ConfigError(f"{table.path}.omega_diag: entries must be positive")
        if abs(sum(diag) - 1.0) > 1e-8:
            raise ConfigError(f"{table.path}.omega_diag: entries must sum to 1")
        if len(rows) != d or any(len(r) != d for r in rows):
            raise ConfigError(f"{table.path}.hamiltonian: must be a {d}x{d} matrix")
        return ModelConfig(kind=kind, omega_diag=diag, hamiltonian=tuple(rows))
    if kind == "open-system":
        dim_s = table.take("dim_s", int, default=2)
        splitting = table.take("level_splitting", float, default=1.0)
        coupling = table.take("coupling_strength", float, default=0.5)
        raw_reservoirs = table.take("reservoirs", list, required=True)
        specs = []
        for i, entry in enumerate(raw_reservoirs):
            if not isinstance(entry, dict):
                raise ConfigError(f"{table.path}.reservoirs[{i}]: expected a table")
            sub = _Table(entry, f"{table.path}.reservoirs[{i}]")
            try:
                spec = ReservoirSpec(
                    chain_length=sub.take("chain_length", int, required=True),
                    beta=sub.take("beta", float, required=True),
                    coupling_j=sub.take("coupling_j", float, default=1.0),
                    field_h=sub.take("field_h", float, default=1.0),
                )
            except ValueError as exc:
                raise ConfigError(f"{sub.path}: {exc}") from exc
            sub.finish()
            specs.append(spec)
        table.finish()
        if dim_s < 2:
            raise ConfigError(f"{table.path}.dim_s: must be at least 2")
        if not specs:
            raise ConfigError(f"{table.path}.reservoirs: need at least one reservoir")
        return ModelConfig(
            kind=kind,
            dim_s=dim_s,
            level_splitting=splitting,
            coupling_strength=coupling,
            reservoirs=tuple(specs),
        )
    raise ConfigError(f"{table.path}.kind: unknown model kind {kind!r}")


def _parse_state(table: _Table | None, model: ModelConfig) -> StateConfig:
    if table is None:
        return StateConfig()
    tag = table.take("tag", str, default="reference")
    if tag not in STATE_TAGS:
        raise ConfigError(f"{table.path}.tag: unknown tag {tag!r}, expected one of {', '.join(STATE_TAGS)}")
    weights = _float_list(table, "weights")
    reservoir = table.take("reservoir", int, default=0)
    beta_prime = table.take("beta_prime", float)
    seed = table.take("seed", int, default=7)
    table.finish()
    if tag in ("product", "perturbed-gibbs"):
        if model.kind != "open-system":
            raise ConfigError(f"{table.path}.tag: {tag!r} needs an open-system model")
        if weights is not None:
            if len(weights) != model.dim_s:
                raise ConfigError(f"{table.path}.weights: need {model.dim_s} entries")
            if any(w <= 0 for w in weights) or abs(sum(weights) - 1.0) > 1e-8:
                raise ConfigError(f"{table.path}.weights: must be positive and sum to 1")
        if not 0 <= reservoir < max(1, len(model.reservoirs)):
            raise ConfigError(f"{table.path}.reservoir: index {reservoir} out of range")
        if beta_prime is not None and beta_prime <= 0:
            raise ConfigError(f"{table.path}.beta_prime: must be positive")
    return StateConfig(tag=tag, weights=weights, reservoir=reservoir, beta_prime=beta_prime, seed=seed)


def parse_config(text: str) -> ExperimentConfig:
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"not valid TOML: {exc}") from exc
    root = _Table(raw, "config")
    version = root.take("schema_version", int, required=True)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"config.schema_version: expected {SCHEMA_VERSION}, got {version}")
    out_dir = root.take("out_dir", str)

    model_table = root.subtable("model", required=True)
    model = _parse_model(model_table)
    state = _parse_state(root.subtable("state"), model)

    grids_table = root.subtable("grids")
    if grids_table is None:
        grids = GridsConfig()
    else:
        times = _float_list(grids_table, "times", default=GridsConfig.times)
        alpha_re = _parse_alpha_grid(grids_table.subtable("alpha_re"), GridsConfig.alpha_re, f"{grids_table.path}.alpha_re")
        alpha_im = _parse_alpha_grid(grids_table.subtable("alpha_im"), GridsConfig.alpha_im, f"{grids_table.path}.alpha_im")
        grids_table.finish()
        if not times:
            raise ConfigError(f"{grids_table.path}.times: need at least one time")
        grids = GridsConfig(times=tuple(times), alpha_re=alpha_re, alpha_im=alpha_im)

    tol_table = root.subtable("tolerances")
    if tol_table is None:
        tolerances = TolerancesConfig()
    else:
        cluster = tol_table.take("cluster_tol", float, default=1e-9)
        merge = tol_table.take("atom_merge_tol", float, default=1e-8)
        threshold = tol_table.take("threshold", float)
        tol_table.finish()
        for name, value in (("cluster_tol", cluster), ("atom_merge_tol", merge)):
            if value <= 0:
                raise ConfigError(f"{tol_table.path}.{name}: must be positive")
        if threshold is not None and threshold <= 0:
            raise ConfigError(f"{tol_table.path}.threshold: must be positive")
        tolerances = TolerancesConfig(cluster_tol=cluster, atom_merge_tol=merge, threshold=threshold)

    scan_table = root.subtable("scan")
    if scan_table is None:
        scan = ScanConfig()
    else:
        raw_routes = scan_table.take("routes", list, default=list(ROUTES))
        scan_table.finish()
        routes = []
        for r in raw_routes:
            if r not in ROUTES:
                raise ConfigError(f"{scan_table.path}.routes: unknown route {r!r}")
            if r not in routes:
                routes.append(r)
        if not routes:
            raise ConfigError(f"{scan_table.path}.routes: need at least one route")
        scan = ScanConfig(routes=tuple(routes))

    scaling_table = root.subtable("scaling")
    if scaling_table is None:
        scaling = ScalingConfig()
    else:
        lengths_raw = scaling_table.take("chain_lengths", list, default=[1, 2, 3])
        lengths = []
        for i, n in enumerate(lengths_raw):
            if isinstance(n, bool) or not isinstance(n, int) or n < 1:
                raise ConfigError(f"{scaling_table.path}.chain_lengths[{i}]: expected a positive integer")
            lengths.append(n)
        reservoir = scaling_table.take("reservoir", int, default=0)
        beta_prime = scaling_table.take("beta_prime", float)
        time_value = scaling_table.take("time", float, default=1.0)
        scaling_table.finish()
        if model.kind == "open-system" and not 0 <= reservoir < len(model.reservoirs):
            raise ConfigError(f"{scaling_table.path}.reservoir: index {reservoir} out of range")
        if beta_prime is not None and beta_prime <= 0:
            raise ConfigError(f"{scaling_table.path}.beta_prime: must be positive")
        scaling = ScalingConfig(
            chain_lengths=tuple(lengths), reservoir=reservoir, beta_prime=beta_prime, time=time_value
        )

    root.finish()
    return ExperimentConfig(
        model=model,
        state=state,
        grids=grids,
        tolerances=tolerances,
        scan=scan,
        scaling=scaling,
        out_dir=out_dir,
        schema_version=version,
    )


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            text = fh.read().decode("utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise ConfigError(f"config {path} is not UTF-8 text: {exc}") from exc
    return parse_config(text)


def _fmt_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_fmt_value(v) for v in value) + "]"
    raise TypeError(f"cannot format {type(value).__name__} for TOML")


def emit_config(cfg: ExperimentConfig) -> str:
    """Write the configuration back as TOML; parse(emit(parse(s))) == parse(s)."""
    lines: list[str] = [f"schema_version = {cfg.schema_version}"]
    if cfg.out_dir is not None:
        lines.append(f"out_dir = {_fmt_value(cfg.out_dir)}")
    lines.append("")
    lines.append("[model]")
    lines.append(f'kind = "{cfg.model.kind}"')
    if cfg.model.kind == "two-level":
        lines.append(f"omega_diag = {_fmt_value(cfg.model.omega_diag)}")
        lines.append(f"hamiltonian = {_fmt_value(cfg.model.hamiltonian)}")
    else:
        lines.append(f"dim_s = {cfg.model.dim_s}")
        lines.append(f"level_splitting = {_fmt_value(cfg.model.level_splitting)}")
        lines.append(f"coupling_strength = {_fmt_value(cfg.model.coupling_strength)}")
        for spec in cfg.model.reservoirs:
            lines.append("")
            lines.append("[[model.reservoirs]]")
            lines.append(f"chain_length = {spec.chain_length}")
            lines.append(f"beta = {_fmt_value(spec.beta)}")
            lines.append(f"coupling_j = {_fmt_value(spec.coupling_j)}")
            lines.append(f"field_h = {_fmt_value(spec.field_h)}")
    lines.append("")
    lines.append("[state]")
    lines.append(f'tag = "{cfg.state.tag}"')
    if cfg.state.weights is not None:
        lines.append(f"weights = {_fmt_value(cfg.state.weights)}")
    lines.append(f"reservoir = {cfg.state.reservoir}")
    if cfg.state.beta_prime is not None:
        lines.append(f"beta_prime = {_fmt_value(cfg.state.beta_prime)}")
    lines.append(f"seed = {cfg.state.seed}")
    lines.append("")
    lines.append("[grids]")
    lines.append(f"times = {_fmt_value(cfg.grids.times)}")
    for name, grid in (("alpha_re", cfg.grids.alpha_re), ("alpha_im", cfg.grids.alpha_im)):
        lines.append("")
        lines.append(f"[grids.{name}]")
        lines.append(f"min = {_fmt_value(grid.min)}")
        lines.append(f"max = {_fmt_value(grid.max)}")
        lines.append(f"points = {grid.points}")
    lines.append("")
    lines.append("[tolerances]")
    lines.append(f"cluster_tol = {_fmt_value(cfg.tolerances.cluster_tol)}")
    lines.append(f"atom_merge_tol = {_fmt_value(cfg.tolerances.atom_merge_tol)}")
    if cfg.tolerances.threshold is not None:
        lines.append(f"threshold = {_fmt_value(cfg.tolerances.threshold)}")
    lines.append("")
    lines.append("[scan]")
    lines.append(f"routes = {_fmt_value(cfg.scan.routes)}")
    lines.append("")
    lines.append("[scaling]")
    lines.append(f"chain_lengths = {_fmt_value(cfg.scaling.chain_lengths)}")
    lines.append(f"reservoir = {cfg.scaling.reservoir}")
    if cfg.scaling.beta_prime is not None:
        lines.append(f"beta_prime = {_fmt_value(cfg.scaling.beta_prime)}")
    lines.append(f"time = {_fmt_value(cfg.scaling.time)}")
    lines.append("")
    return "\n".join(lines)


def build_model(cfg: ExperimentConfig, *, dimension_cap: int | None = None) -> SystemModel:
    if cfg.model.kind == "two-level":
        return two_level_system(list(cfg.model.omega_diag), [list(r) for r in cfg.model.hamiltonian])
    return build_open_system(
        cfg.model.dim_s,
        cfg.model.reservoirs,
        coupling_strength=cfg.model.coupling_strength,
        level_splitting=cfg.model.level_splitting,
        dimension_cap=dimension_cap,
    )


def _system_factor(cfg: ExperimentConfig, model: OpenSystemModel) -> DensityMatrix:
    if cfg.state.weights is not None:
        return DensityMatrix(np.diag(cfg.state.weights))
    if model.dim_s == 2:
        return DensityMatrix(np.diag([0.9, 0.1]))
    w = np.arange(model.dim_s, 0, -1, dtype=float)
    return DensityMatrix(np.diag(w / w.sum()))


def initial_state(cfg: ExperimentConfig, model: SystemModel, *, seed: int | None = None) -> DensityMatrix:
    """The state the config asks to measure, drawn reproducibly when random."""
    tag = cfg.state.tag
    if tag == "reference":
        return model.reference
    rng = np.random.default_rng(cfg.state.seed if seed is None else seed)
    if tag == "pure-random":
        return random_pure_state(model.dim, rng)
    if tag == "mixed-random":
        return random_mixed_state(model.dim, rng)
    if not isinstance(model, OpenSystemModel):
        raise ConfigError(f"state tag {tag!r} needs an open-system model")
    nu_s = _system_factor(cfg, model)
    if tag == "product":
        return product_state(model, nu_s)
    beta = model.reservoirs[cfg.state.reservoir].beta
    beta_prime = cfg.state.beta_prime if cfg.state.beta_prime is not None else beta / 2.0
    return perturbed_reservoir_state(model, nu_s, cfg.state.reservoir, beta_prime)


def scan_alphas(cfg: ExperimentConfig) -> np.ndarray:
    """The scan grid: the Cartesian product of the real and imaginary axes."""
    re = cfg.grids.alpha_re.values()
    im = cfg.grids.alpha_im.values()
    return (re[:, None] + 1j * im[None, :]).ravel()
