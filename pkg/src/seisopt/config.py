"""Experiment configuration: a flat-sectioned TOML file mapped onto dataclasses.

Every key is listed in the README; unknown keys are rejected so typos fail
fast (exit code 2 at the CLI).
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

VALID_METHODS = ("sd", "aa", "lbfgs", "ncg", "gmres")
MEMORY_METHODS = ("aa", "lbfgs", "gmres")


class ConfigError(Exception):
    """Invalid or incomplete experiment configuration."""


@dataclass
class GridSection:
    nx: int = 120
    nz: int = 60
    dx: float = 20.0
    dz: float = 20.0


@dataclass
class ModelSection:
    layer_depths: list = field(default_factory=lambda: [400.0, 800.0])
    layer_velocities: list = field(default_factory=lambda: [1800.0, 2200.0, 2500.0])
    smooth_radius: float = 6.0


@dataclass
class PhysicsSection:
    dt: float = 0.005
    nt: int = 800
    peak_freq: float = 15.0
    t0: float = 0.1


@dataclass
class GeometrySection:
    n_sources: int = 5
    source_depth: float = 150.0
    n_receivers: int = 60
    receiver_depth: float = 40.0


@dataclass
class SolverSection:
    border_width: int = 30
    damping_strength: float = 0.0053
    cfl_safety: float = 0.9
    damp_top: bool = True


@dataclass
class OptimizerSection:
    method: str = "aa"
    memory: int = 0
    eta: float = 0.0  # 0 -> automatic 1%-of-range step
    budget: float = 0.0  # gradient-equivalents; 0 -> no budget cap
    max_iters: int = 0  # 0 -> no iteration cap
    line_search: bool = False  # steepest descent only
    zero_start: bool = False  # LSRTM: start from zero instead of the RTM image
    snapshot_every: int = 25


@dataclass
class NoiseSection:
    enabled: bool = False
    snr_db: float = 0.55
    seed: int = 1234


@dataclass
class PathsSection:
    out_dir: str = "runs/experiment"


@dataclass
class ExperimentSection:
    kind: str = "fwi"


_SECTIONS = {
    "experiment": ExperimentSection,
    "grid": GridSection,
    "model": ModelSection,
    "physics": PhysicsSection,
    "geometry": GeometrySection,
    "solver": SolverSection,
    "optimizer": OptimizerSection,
    "noise": NoiseSection,
    "paths": PathsSection,
}


@dataclass
class ExperimentConfig:
    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    grid: GridSection = field(default_factory=GridSection)
    model: ModelSection = field(default_factory=ModelSection)
    physics: PhysicsSection = field(default_factory=PhysicsSection)
    geometry: GeometrySection = field(default_factory=GeometrySection)
    solver: SolverSection = field(default_factory=SolverSection)
    optimizer: OptimizerSection = field(default_factory=OptimizerSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    paths: PathsSection = field(default_factory=PathsSection)

    def validate(self) -> None:
        errs = []
        if self.experiment.kind not in ("fwi", "lsrtm"):
            errs.append(f"experiment.kind must be fwi or lsrtm, got {self.experiment.kind!r}")
        if self.grid.nx < 3 or self.grid.nz < 3:
            errs.append("grid must be at least 3x3")
        if self.grid.dx <= 0 or self.grid.dz <= 0:
            errs.append("grid spacings must be positive")
        if len(self.model.layer_velocities) != len(self.model.layer_depths) + 1:
            errs.append("model needs one more layer velocity than interface depth")
        if self.physics.dt <= 0 or self.physics.nt < 2:
            errs.append("physics.dt must be positive and physics.nt >= 2")
        if self.physics.peak_freq <= 0:
            errs.append("physics.peak_freq must be positive")
        if self.geometry.n_sources < 1 or self.geometry.n_receivers < 1:
            errs.append("need at least one source and one receiver")
        if self.optimizer.method not in VALID_METHODS:
            errs.append(f"optimizer.method must be one of {VALID_METHODS}")
        if self.optimizer.method in MEMORY_METHODS and self.optimizer.memory < 1:
            errs.append(f"optimizer.memory >= 1 required for method {self.optimizer.method!r}")
        if self.optimizer.budget < 0 or self.optimizer.max_iters < 0:
            errs.append("optimizer.budget and optimizer.max_iters must be non-negative")
        if self.optimizer.budget == 0 and self.optimizer.max_iters == 0:
            errs.append("set optimizer.budget or optimizer.max_iters (or both)")
        if self.optimizer.method == "gmres" and self.experiment.kind != "lsrtm":
            errs.append("optimizer.method gmres applies only to experiment.kind lsrtm")
        if not (0 < self.solver.cfl_safety <= 1):
            errs.append("solver.cfl_safety must lie in (0, 1]")
        if errs:
            raise ConfigError("; ".join(errs))


def _coerce(section_name: str, cls, data: dict):
    obj = cls()
    known = {f.name: f for f in fields(cls)}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown key [{section_name}] {key}")
        current = getattr(obj, key)
        if isinstance(current, bool):
            if not isinstance(value, bool):
                raise ConfigError(f"[{section_name}] {key} must be a boolean")
        elif isinstance(current, int):
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"[{section_name}] {key} must be an integer")
        elif isinstance(current, float):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"[{section_name}] {key} must be a number")
            value = float(value)
        elif isinstance(current, str):
            if not isinstance(value, str):
                raise ConfigError(f"[{section_name}] {key} must be a string")
        elif isinstance(current, list):
            if not isinstance(value, list):
                raise ConfigError(f"[{section_name}] {key} must be a list")
        setattr(obj, key, value)
    return obj


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    kwargs = {}
    for name, data in raw.items():
        if name not in _SECTIONS:
            raise ConfigError(f"unknown section [{name}]")
        if not isinstance(data, dict):
            raise ConfigError(f"top-level key {name!r} must be a section")
        kwargs[name] = _coerce(name, _SECTIONS[name], data)
    config = ExperimentConfig(**kwargs)
    config.validate()
    return config
