"""Pipeline configuration: one dataclass tree, loadable from TOML or JSON.

CLI flags override file values, which override defaults. Validation happens
in each dataclass's __post_init__, so a config rejected anywhere raises
ConfigError before any command runs.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .constraints import LoopClosureConfig, OdomInfoParams
from .errors import ConfigError
from .pose_graph import LmOptions
from .similarity import SimilarityParams
from .simulator import OdometryNoise, PropagationParams, SimulationConfig


@dataclass(frozen=True)
class PipelineConfig:
    similarity: SimilarityParams = field(default_factory=SimilarityParams)
    loop: LoopClosureConfig = field(default_factory=LoopClosureConfig)
    odom_info: OdomInfoParams = field(default_factory=OdomInfoParams)
    lm: LmOptions = field(default_factory=LmOptions)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    model_r: float = 0.05  # similarity bin width
    model_max_path_m: float = 100.0  # training-pair odometry gate
    per_robot_model: bool = False
    interpolate: bool = False  # linear interpolation in model queries
    window_s: float = 5.0
    min_aps: int = 1
    seed: int = 0
    threads: int = 1
    align: bool = False  # diagnostic rigid alignment in evaluation

    def __post_init__(self):
        if self.model_r <= 0 or self.model_r > 1:
            raise ConfigError(f"model_r must be in (0, 1], got {self.model_r}")
        if self.window_s <= 0:
            raise ConfigError(f"window_s must be positive, got {self.window_s}")
        if self.min_aps < 1:
            raise ConfigError(f"min_aps must be >= 1, got {self.min_aps}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")


_NESTED: dict[tuple[type, str], type] = {
    (PipelineConfig, "similarity"): SimilarityParams,
    (PipelineConfig, "loop"): LoopClosureConfig,
    (PipelineConfig, "odom_info"): OdomInfoParams,
    (PipelineConfig, "lm"): LmOptions,
    (PipelineConfig, "simulation"): SimulationConfig,
    (SimulationConfig, "prop"): PropagationParams,
    (SimulationConfig, "odom_noise"): OdometryNoise,
}


def _construct(cls: type, obj, path: str):
    if not isinstance(obj, dict):
        raise ConfigError(f"{path or cls.__name__}: expected a table, got {obj!r}")
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in obj.items():
        here = f"{path}.{key}" if path else key
        if key not in names:
            raise ConfigError(f"unknown config key {here!r}")
        sub = _NESTED.get((cls, key))
        if sub is not None:
            value = _construct(sub, value, here)
        elif key == "extent":
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{path or cls.__name__}: {exc}") from exc


def config_from_dict(raw: dict) -> PipelineConfig:
    return _construct(PipelineConfig, raw, "")


def config_to_dict(cfg: PipelineConfig) -> dict:
    return dataclasses.asdict(cfg)


def load_config_file(path) -> dict:
    """Raw config dict from a .toml or .json file."""
    text = open(path, "rb").read()
    name = str(path)
    if name.endswith(".json"):
        try:
            raw = json.loads(text.decode())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: bad JSON: {exc}") from exc
    else:
        try:
            raw = tomllib.loads(text.decode())
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: bad TOML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a table")
    return raw


def deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def set_dotted(raw: dict, dotted: str, value) -> None:
    """Insert value at a dotted path like 'loop.nu_s', creating tables."""
    parts = dotted.split(".")
    here = raw
    for part in parts[:-1]:
        nxt = here.get(part)
        if not isinstance(nxt, dict):
            nxt = {}
            here[part] = nxt
        here = nxt
    here[parts[-1]] = value


def parse_override_value(text: str):
    """JSON literal when possible, bare string otherwise."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def build_config(
    config_path=None, overrides: dict | None = None
) -> PipelineConfig:
    """defaults < config file < overrides (a dict of dotted keys or tables)."""
    raw: dict = {}
    if config_path is not None:
        raw = load_config_file(config_path)
    if overrides:
        flat = {}
        for key, value in overrides.items():
            set_dotted(flat, key, value)
        raw = deep_merge(raw, flat)
    return config_from_dict(raw)
