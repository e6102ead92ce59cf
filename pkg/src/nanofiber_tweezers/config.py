"""Run configuration: a versioned TOML document validated against typed sections."""

from __future__ import annotations

import hashlib
import json
import math
import typing
from dataclasses import asdict, dataclass, field, fields

import tomli

from .simkit.config import ExperimentConfig

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class FiberSection:
    diameter: float = 310e-9
    wavelength: float = 852.34727582e-9
    index_core: float | None = None
    allow_multimode: bool = False
    profile_max: float = 2e-6
    profile_points: int = 401


@dataclass(frozen=True)
class TrapSection:
    wavelength: float = 935e-9
    waist: float = 1e-6
    power: float = 1.5e-3
    reflection_amplitude: float | None = None
    reflection_phase: float | None = None
    focus_offset: float | None = None
    c3_au: float = 4.269
    grid_min: float = 2e-9
    grid_max: float = 2.5e-6
    grid_step: float = 0.5e-9
    calibrate: bool = False


@dataclass(frozen=True)
class CouplingSection:
    anchor_distance: float = 671e-9
    anchor_beta: float = 0.006
    d_max: float = 2e-6
    points: int = 401


@dataclass(frozen=True)
class HologramSection:
    n_spots: int = 200
    pitch: float = 5e-6
    shape: list = field(default_factory=lambda: [128, 2048])
    wavelength: float = 935e-9
    focal_length: float = 10.24e-3
    slm_pitch: float = 3.74e-6
    iterations: int = 100
    tolerance: float = 0.01
    zero_nontarget: bool = True
    fix_phase_below: float | None = 0.05


@dataclass(frozen=True)
class OdSection:
    n1: float = 0.0
    tau1: float = 0.02
    n2: float = 100.0
    tau2: float = 0.26
    beta1: float = 0.053
    beta2: float = 0.006
    t_max: float = 1.0
    dt: float = 1e-3
    noise: bool = True
    repetitions: int = 100


@dataclass(frozen=True)
class AnalysisSection:
    bin_width: float = 0.8e-9
    g2_window: float = 1e-6
    ref_window: list = field(default_factory=lambda: [500e-9, 800e-9])
    mu_b: float | None = None
    mixture_starts: int = 10
    decay_model_order: str = "auto"


_EXPERIMENT_KEYS = {f.name for f in fields(ExperimentConfig)} - {"seed"}


@dataclass(frozen=True)
class RunConfig:
    schema_version: int = SCHEMA_VERSION
    seed: int = 0
    output_dir: str = "out"
    fiber: FiberSection = field(default_factory=FiberSection)
    trap: TrapSection = field(default_factory=TrapSection)
    coupling: CouplingSection = field(default_factory=CouplingSection)
    hologram: HologramSection = field(default_factory=HologramSection)
    experiment: dict = field(default_factory=dict)
    od: OdSection = field(default_factory=OdSection)
    analysis: AnalysisSection = field(default_factory=AnalysisSection)

    def experiment_config(self) -> ExperimentConfig:
        return ExperimentConfig(**{**self.experiment, "seed": self.seed})

    def to_dict(self) -> dict:
        d = asdict(self)
        d["experiment"] = {k: v for k, v in self.experiment_config().to_dict().items() if k != "seed"}
        return d

    def config_hash(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, default=repr)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _check_value(section: str, key: str, value, hint):
    where = f"[{section}] {key}" if section else key
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if origin is typing.Union or (origin is not None and type(None) in args):
        if value is None:
            return None
        hint = next(a for a in args if a is not type(None))
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be a boolean")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer")
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number")
        if math.isnan(value):
            raise ConfigError(f"{where} must not be NaN")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string")
        return value
    if hint is list:
        if not isinstance(value, list):
            raise ConfigError(f"{where} must be an array")
        return value
    return value


def _hints(cls):
    return typing.get_type_hints(cls)


def _build_section(cls, section: str, data):
    if not isinstance(data, dict):
        raise ConfigError(f"[{section}] must be a table")
    hints = _hints(cls)
    unknown = set(data) - set(hints)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")
    return cls(**{k: _check_value(section, k, v, hints[k]) for k, v in data.items()})


def _build_experiment(data):
    if not isinstance(data, dict):
        raise ConfigError("[experiment] must be a table")
    unknown = set(data) - _EXPERIMENT_KEYS
    if unknown:
        raise ConfigError(f"unknown key(s) in [experiment]: {', '.join(sorted(unknown))}")
    hints = _hints(ExperimentConfig)
    out = {k: _check_value("experiment", k, v, hints[k]) for k, v in data.items()}
    try:
        ExperimentConfig(**out)
    except ValueError as exc:
        raise ConfigError(f"[experiment] {exc}") from exc
    return out


_SECTIONS = {"fiber": FiberSection, "trap": TrapSection, "coupling": CouplingSection,
             "hologram": HologramSection, "od": OdSection, "analysis": AnalysisSection}


def config_from_dict(data: dict) -> RunConfig:
    known = {"schema_version", "seed", "output_dir", "experiment", *_SECTIONS}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(sorted(unknown))}")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r}; expected {SCHEMA_VERSION}")
    kw = {"schema_version": version}
    if "seed" in data:
        seed = _check_value("", "seed", data["seed"], int)
        if not 0 <= seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        kw["seed"] = seed
    if "output_dir" in data:
        kw["output_dir"] = _check_value("", "output_dir", data["output_dir"], str)
    for name, cls in _SECTIONS.items():
        if name in data:
            kw[name] = _build_section(cls, name, data[name])
    if "experiment" in data:
        kw["experiment"] = _build_experiment(data["experiment"])
    cfg = RunConfig(**kw)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    h = cfg.hologram
    if len(h.shape) != 2 or not all(isinstance(v, int) and not isinstance(v, bool) for v in h.shape):
        raise ConfigError("[hologram] shape must be two integers")
    lo_hi = cfg.analysis.ref_window
    if len(lo_hi) != 2 or not all(isinstance(v, (int, float)) for v in lo_hi) or not 0 <= lo_hi[0] < lo_hi[1]:
        raise ConfigError("[analysis] ref_window must be [lo, hi] with 0 <= lo < hi")
    if cfg.analysis.decay_model_order not in ("auto", "1", "2"):
        raise ConfigError("[analysis] decay_model_order must be 'auto', '1' or '2'")
    for name in ("diameter", "wavelength"):
        if not getattr(cfg.fiber, name) > 0:
            raise ConfigError(f"[fiber] {name} must be > 0")
    if not cfg.trap.grid_min > 0 or not cfg.trap.grid_max > cfg.trap.grid_min or not cfg.trap.grid_step > 0:
        raise ConfigError("[trap] grid needs 0 < grid_min < grid_max and grid_step > 0")
    if not cfg.od.dt > 0 or not cfg.od.t_max > cfg.od.dt:
        raise ConfigError("[od] needs 0 < dt < t_max")


def load_config(path=None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML in {path}: {exc}") from exc
    return config_from_dict(data)
