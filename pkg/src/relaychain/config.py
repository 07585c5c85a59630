"""Configuration dataclasses and the INI-style config file loader.

Every tunable lives in one of the section dataclasses below. A config file is
a plain INI file whose section names match the attributes of `SimConfig`
(``[world]``, ``[chain]``, ``[neat]``, ``[odneat]``, ``[controller]``,
``[run]``); keys are the dataclass field names.
"""

from __future__ import annotations

import configparser
import dataclasses
import math
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

CONTROLLER_KINDS = ("random_walk", "preprogrammed", "odneat")
TURN_MODES = ("arc", "spin")


class ConfigError(ValueError):
    """Raised for unknown keys, unparsable values, or values out of domain."""


@dataclass(frozen=True)
class WorldConfig:
    width: float = 4.0
    height: float = 4.0
    n_robots: int = 10
    comm_range: float = 1.0
    sensor_range: float = 0.15
    robot_radius: float = 0.08
    wheel_base: float = 0.095
    max_wheel_speed: float = 0.20
    dt: float = 0.1
    max_steps: int = 10_000
    # None -> opposite corners, inset 0.3 m from both walls
    home_pos: Optional[tuple[float, float]] = None
    sink_pos: Optional[tuple[float, float]] = None
    spawn_radius: float = 0.8
    rng_seed: int = 1

    def __post_init__(self):
        if self.home_pos is None:
            object.__setattr__(self, "home_pos", (-self.width / 2 + 0.3, -self.height / 2 + 0.3))
        if self.sink_pos is None:
            object.__setattr__(self, "sink_pos", (self.width / 2 - 0.3, self.height / 2 - 0.3))
        object.__setattr__(self, "home_pos", tuple(float(v) for v in self.home_pos))
        object.__setattr__(self, "sink_pos", tuple(float(v) for v in self.sink_pos))
        self.validate()

    def validate(self) -> None:
        if not (self.width > 0 and self.height > 0):
            raise ConfigError(f"arena must have positive size, got {self.width}x{self.height}")
        if self.n_robots < 1:
            raise ConfigError("n_robots must be >= 1")
        for name in ("robot_radius", "sensor_range", "wheel_base", "max_wheel_speed", "dt", "spawn_radius"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        if not self.comm_range > 2 * self.robot_radius:
            raise ConfigError("comm_range must exceed 2 * robot_radius")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be >= 1")
        for name in ("home_pos", "sink_pos"):
            x, y = getattr(self, name)
            if not (abs(x) <= self.width / 2 - self.robot_radius
                    and abs(y) <= self.height / 2 - self.robot_radius):
                raise ConfigError(f"{name} {getattr(self, name)} must lie inside the walls "
                                  f"by at least robot_radius")


@dataclass(frozen=True)
class ChainParams:
    """Optimal-range interval for chain members, as fractions of comm_range."""

    r_min_frac: float = 0.5
    r_max_frac: float = 0.9

    def __post_init__(self):
        if not 0 <= self.r_min_frac <= self.r_max_frac:
            raise ConfigError("need 0 <= r_min_frac <= r_max_frac")


@dataclass(frozen=True)
class NeatParams:
    p_weight_perturb: float = 0.8
    weight_sigma: float = 0.25
    p_weight_reset: float = 0.1
    p_add_connection: float = 0.1
    p_add_node: float = 0.05
    p_reenable: float = 0.25
    weight_limit: float = 5.0
    c1: float = 1.0
    c2: float = 1.0
    c3: float = 0.4
    use_bias: bool = True
    add_connection_attempts: int = 20

    def __post_init__(self):
        for name in ("p_weight_perturb", "p_weight_reset", "p_add_connection", "p_add_node", "p_reenable"):
            if not 0 <= getattr(self, name) <= 1:
                raise ConfigError(f"{name} must be a probability in [0, 1]")
        if self.p_weight_perturb + self.p_weight_reset > 1:
            raise ConfigError("p_weight_perturb + p_weight_reset must not exceed 1")


@dataclass(frozen=True)
class OdNeatParams:
    initial_energy: float = 100.0
    max_energy: float = 150.0
    min_energy_threshold: float = 0.0
    decay: float = 0.01
    crash_penalty: float = 1.0
    chain_reward: float = 0.1
    chain_reward_needs_range: bool = True
    maturation_steps: int = 500
    broadcast_period: int = 50
    broadcast_range: float = math.inf
    population_capacity: int = 40
    tabu_capacity: int = 40
    tabu_threshold: float = 1.0
    species_threshold: float = 3.0
    p_crossover: float = 0.25
    offspring_retries: int = 8

    def __post_init__(self):
        if not 0 <= self.min_energy_threshold < self.initial_energy <= self.max_energy:
            raise ConfigError("need 0 <= min_energy_threshold < initial_energy <= max_energy")
        if self.broadcast_period < 1 or self.population_capacity < 1 or self.tabu_capacity < 1:
            raise ConfigError("broadcast_period and capacities must be >= 1")
        if self.offspring_retries < 1:
            raise ConfigError("offspring_retries must be >= 1")


@dataclass(frozen=True)
class ControllerParams:
    kind: str = "random_walk"
    redraw_period: int = 10
    turn_mode: str = "arc"

    def __post_init__(self):
        if self.kind not in CONTROLLER_KINDS:
            raise ConfigError(f"controller kind {self.kind!r} not in {CONTROLLER_KINDS}")
        if self.turn_mode not in TURN_MODES:
            raise ConfigError(f"turn_mode {self.turn_mode!r} not in {TURN_MODES}")
        if self.redraw_period < 1:
            raise ConfigError("redraw_period must be >= 1")


@dataclass(frozen=True)
class RunOptions:
    stop_on_connection: bool = True
    # seconds; 0 disables the guard
    wall_clock_budget: float = 0.0


@dataclass(frozen=True)
class SimConfig:
    world: WorldConfig = field(default_factory=WorldConfig)
    chain: ChainParams = field(default_factory=ChainParams)
    neat: NeatParams = field(default_factory=NeatParams)
    odneat: OdNeatParams = field(default_factory=OdNeatParams)
    controller: ControllerParams = field(default_factory=ControllerParams)
    run: RunOptions = field(default_factory=RunOptions)

    @property
    def r_min(self) -> float:
        return self.chain.r_min_frac * self.world.comm_range

    @property
    def r_max(self) -> float:
        return self.chain.r_max_frac * self.world.comm_range

    def to_dict(self) -> dict[str, dict[str, Any]]:
        return {name: _section_dict(getattr(self, name)) for name in SECTIONS}

    def with_overrides(self, overrides: dict[str, Any]) -> "SimConfig":
        """Return a copy with ``{"section.key" | "key": value}`` applied.

        Bare keys are accepted when they name a field in exactly one section.
        String values are parsed according to the field type.
        """
        grouped: dict[str, dict[str, Any]] = {}
        for raw_key, value in overrides.items():
            section, key = resolve_key(raw_key)
            grouped.setdefault(section, {})[key] = value
        return self._merge(grouped)

    def _merge(self, grouped: dict[str, dict[str, Any]]) -> "SimConfig":
        sections = {}
        for name in SECTIONS:
            current = getattr(self, name)
            updates = grouped.get(name)
            if not updates:
                sections[name] = current
                continue
            kwargs = _section_dict(current)
            hints = typing.get_type_hints(type(current))
            for key, value in updates.items():
                kwargs[key] = parse_value(hints[key], value, f"{name}.{key}")
            if name == "world":
                # corners follow the arena unless set explicitly
                for corner in ("home_pos", "sink_pos"):
                    if corner not in updates and ("width" in updates or "height" in updates):
                        kwargs[corner] = None
            sections[name] = type(current)(**kwargs)
        return SimConfig(**sections)


SECTIONS = ("world", "chain", "neat", "odneat", "controller", "run")
_SECTION_TYPES = {
    "world": WorldConfig,
    "chain": ChainParams,
    "neat": NeatParams,
    "odneat": OdNeatParams,
    "controller": ControllerParams,
    "run": RunOptions,
}


def _section_dict(obj) -> dict[str, Any]:
    return {f.name: getattr(obj, f.name) for f in dataclasses.fields(obj)}


def valid_keys() -> list[str]:
    return [f"{s}.{f.name}" for s in SECTIONS for f in dataclasses.fields(_SECTION_TYPES[s])]


def resolve_key(raw_key: str) -> tuple[str, str]:
    if "." in raw_key:
        section, key = raw_key.split(".", 1)
        if section in _SECTION_TYPES and key in {f.name for f in dataclasses.fields(_SECTION_TYPES[section])}:
            return section, key
    else:
        hits = [s for s in SECTIONS if raw_key in {f.name for f in dataclasses.fields(_SECTION_TYPES[s])}]
        if len(hits) == 1:
            return hits[0], raw_key
    raise ConfigError(f"unknown config key {raw_key!r}; valid keys: {', '.join(valid_keys())}")


def _unwrap_optional(tp):
    origin = typing.get_origin(tp)
    if origin in (typing.Union, types.UnionType):
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if len(args) == 1:
            return args[0], True
    return tp, False


def parse_value(tp, value: Any, where: str = "value") -> Any:
    """Coerce ``value`` (often a string from a file or CLI) to type ``tp``."""
    tp, optional = _unwrap_optional(tp)
    if isinstance(value, str):
        text = value.strip()
        if optional and text.lower() in ("", "none", "auto"):
            return None
        try:
            if tp is bool:
                lowered = text.lower()
                if lowered in ("1", "true", "yes", "on"):
                    return True
                if lowered in ("0", "false", "no", "off"):
                    return False
                raise ValueError(text)
            if tp is int:
                return int(text)
            if tp is float:
                return float(text)
            if tp is str:
                return text
            if typing.get_origin(tp) is tuple:
                parts = [p for p in text.replace("(", "").replace(")", "").split(",") if p.strip()]
                if len(parts) != 2:
                    raise ValueError(text)
                return tuple(float(p) for p in parts)
        except ValueError:
            raise ConfigError(f"invalid value {value!r} for {where}: expected {getattr(tp, '__name__', tp)}") from None
        raise ConfigError(f"cannot parse {where}")
    if value is None and optional:
        return None
    if tp is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if tp is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if tp is bool and isinstance(value, bool):
        return value
    if tp is str and isinstance(value, str):
        return value
    if typing.get_origin(tp) is tuple and len(value) == 2:
        return (float(value[0]), float(value[1]))
    raise ConfigError(f"invalid value {value!r} for {where}: expected {getattr(tp, '__name__', tp)}")


def load_config(path: str | Path, base: SimConfig | None = None) -> SimConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keep key case
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file {path}: {exc}") from None
    grouped: dict[str, dict[str, Any]] = {}
    for section in parser.sections():
        if section not in _SECTION_TYPES:
            raise ConfigError(f"unknown section [{section}]; valid sections: {', '.join(SECTIONS)}")
        for key, value in parser.items(section):
            resolve_key(f"{section}.{key}")
            grouped.setdefault(section, {})[key] = value
    return (base or SimConfig())._merge(grouped)


def dump_config(cfg: SimConfig) -> str:
    """Render a config as INI text that `load_config` reads back identically."""
    lines = []
    for section, values in cfg.to_dict().items():
        lines.append(f"[{section}]")
        for key, value in values.items():
            if isinstance(value, tuple):
                value = ", ".join(repr(v) for v in value)
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{key} = {value}")
        lines.append("")
    return "\n".join(lines)
