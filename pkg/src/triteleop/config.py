"""Run configuration: one JSON document, strict keys, every module default
overridable."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .actuation import MotorConfig
from .delta import DeltaGeometry
from .haptics import HapticConfig
from .pipeline import PipelineConfig, ScaleConfig
from .triarm import TriarmGeometry


class ConfigError(ValueError):
    """Malformed or unknown configuration content."""


@dataclass(frozen=True)
class ScenarioConfig:
    """What drives the leader during a run."""

    kind: str = "sinusoid"              # sinusoid | hand | replay
    amp_mm: tuple = (4.0, 4.0, 4.0)
    period_s: tuple = (5.0, 6.3, 7.9)
    rot_amp_deg: tuple = (1.0, 1.0, 1.0)
    rot_period_s: tuple = (8.0, 9.5, 11.0)
    profile: str = "smooth"             # hand: smooth | breakage
    peak_v_mm_s: float = 20.0
    peak_w_deg_s: float = 2.0
    gaps: int = 2
    gap_ms: float = 50.0
    jumps: int = 2
    jump_mm: float = 5.0
    path: str = ""                      # replay: trajectory CSV

    def __post_init__(self):
        if self.kind not in ("sinusoid", "hand", "replay"):
            raise ConfigError(f"unknown scenario kind {self.kind!r}")
        if self.profile not in ("smooth", "breakage"):
            raise ConfigError(f"unknown hand profile {self.profile!r}")


@dataclass(frozen=True)
class OutputConfig:
    pulse_trace: bool = False
    wrench_trace: bool = True


@dataclass(frozen=True)
class LimitConfig:
    """Optional pass/fail gates evaluated after a run (CLI exit status)."""

    max_translation_err_mm: float | None = None
    max_rotation_err_deg: float | None = None


@dataclass(frozen=True)
class MotorsConfig:
    rotary: MotorConfig = field(default_factory=lambda: MotorConfig(
        kind="rotary", steps_per_rev=51200, lead=1.8 / 256.0))
    linear: MotorConfig = field(default_factory=lambda: MotorConfig(
        kind="linear", steps_per_rev=200, lead=2.0))

    def bank_list(self):
        return [self.rotary] * 3 + [self.linear] * 3


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    clock: str = "virtual"              # virtual | real
    leader_rate_hz: int = 1000
    follower_rate_hz: int = 10000
    duration_s: float = 16.0
    haptics_enabled: bool = True
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    scale: ScaleConfig = field(default_factory=ScaleConfig)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    haptics: HapticConfig = field(default_factory=HapticConfig)
    leader_geometry: DeltaGeometry = field(default_factory=DeltaGeometry)
    follower_geometry: TriarmGeometry = field(default_factory=TriarmGeometry)
    motors: MotorsConfig = field(default_factory=MotorsConfig)
    outputs: OutputConfig = field(default_factory=OutputConfig)
    limits: LimitConfig = field(default_factory=LimitConfig)

    def __post_init__(self):
        if self.clock not in ("virtual", "real"):
            raise ConfigError(f"unknown clock mode {self.clock!r}")
        if self.leader_rate_hz <= 0 or self.follower_rate_hz <= 0:
            raise ConfigError("rates must be positive")
        if self.follower_rate_hz % self.leader_rate_hz != 0:
            raise ConfigError("follower rate must be an integer multiple of "
                              "the leader rate")


# motor JSON uses unit-bearing key names; map them onto MotorConfig.lead
_MOTOR_KEYS = {
    "rotary": {"steps_per_rev": "steps_per_rev", "deg_per_step": "lead",
               "gain": "gain"},
    "linear": {"steps_per_rev": "steps_per_rev", "mm_per_rev": "lead",
               "gain": "gain"},
}


def _build_motor(kind: str, data: dict, where: str) -> MotorConfig:
    keymap = _MOTOR_KEYS[kind]
    unknown = set(data) - set(keymap)
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)} in {where}")
    kwargs = {keymap[k]: v for k, v in data.items()}
    try:
        return MotorConfig(kind=kind, **kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}: {e}") from e


def _build(cls, data: dict, where: str):
    """Construct a (frozen) dataclass from a dict, rejecting unknown keys
    and coercing JSON lists to tuples."""
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)} in {where}")
    kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}: {e}") from e


_SECTIONS = {
    "scenario": lambda d: _build(ScenarioConfig, d, "scenario"),
    "scale": lambda d: _build(ScaleConfig, d, "scale"),
    "pipeline": lambda d: _build(PipelineConfig, d, "pipeline"),
    "haptics": lambda d: _build(HapticConfig, d, "haptics"),
    "leader_geometry": lambda d: _build(DeltaGeometry, d, "leader_geometry"),
    "follower_geometry": lambda d: _build(TriarmGeometry, d, "follower_geometry"),
    "outputs": lambda d: _build(OutputConfig, d, "outputs"),
    "limits": lambda d: _build(LimitConfig, d, "limits"),
}

_SCALARS = {"seed", "clock", "leader_rate_hz", "follower_rate_hz",
            "duration_s", "haptics_enabled"}


def config_from_dict(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("run config must be a JSON object")
    unknown = set(doc) - _SCALARS - set(_SECTIONS) - {"motors"}
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    kwargs = {k: doc[k] for k in _SCALARS if k in doc}
    for name, builder in _SECTIONS.items():
        if name in doc:
            kwargs[name] = builder(doc[name])
    if "motors" in doc:
        mdoc = doc["motors"]
        if not isinstance(mdoc, dict):
            raise ConfigError("motors must be an object")
        unknown = set(mdoc) - {"rotary", "linear"}
        if unknown:
            raise ConfigError(f"unknown keys {sorted(unknown)} in motors")
        mk = {}
        if "rotary" in mdoc:
            mk["rotary"] = _build_motor("rotary", mdoc["rotary"], "motors.rotary")
        if "linear" in mdoc:
            mk["linear"] = _build_motor("linear", mdoc["linear"], "motors.linear")
        kwargs["motors"] = MotorsConfig(**mk)
    try:
        return RunConfig(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from e


def load_config(path) -> RunConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{p}: invalid JSON: {e}") from e
    return config_from_dict(doc)


def apply_overrides(cfg: RunConfig, overrides: dict) -> RunConfig:
    """Apply dotted-path overrides (e.g. {'scale.max_v': 10}) on top of a
    config, re-validating through the normal constructors."""
    doc = _to_dict(cfg)
    for dotted, value in overrides.items():
        node = doc
        parts = dotted.split(".")
        for part in parts[:-1]:
            if part not in node or not isinstance(node[part], dict):
                raise ConfigError(f"unknown override path {dotted!r}")
            node = node[part]
        if parts[-1] not in node:
            raise ConfigError(f"unknown override path {dotted!r}")
        node[parts[-1]] = value
    return config_from_dict(doc)


def _to_dict(cfg: RunConfig) -> dict:
    doc = {k: getattr(cfg, k) for k in _SCALARS}
    for name in _SECTIONS:
        block = dataclasses.asdict(getattr(cfg, name))
        doc[name] = {k: list(v) if isinstance(v, tuple) else v
                     for k, v in block.items()}
    doc["motors"] = {
        "rotary": {"steps_per_rev": cfg.motors.rotary.steps_per_rev,
                   "deg_per_step": cfg.motors.rotary.lead,
                   **({"gain": cfg.motors.rotary.gain}
                      if cfg.motors.rotary.gain is not None else {})},
        "linear": {"steps_per_rev": cfg.motors.linear.steps_per_rev,
                   "mm_per_rev": cfg.motors.linear.lead,
                   **({"gain": cfg.motors.linear.gain}
                      if cfg.motors.linear.gain is not None else {})},
    }
    return doc
