"""Run configuration: declarative file plus key=value overrides."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace

import numpy as np

__all__ = ["RunConfig", "ConfigError", "load_config", "apply_overrides"]

PROBLEMS = ("poisson1d", "pentagon", "burgers", "poisson2d_square")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    problem: str = "poisson1d"
    # problem parameters
    omega_pi: float = 3.0  # 1D Poisson frequency in multiples of pi
    s_min: float = 0.05  # 2D mesh refinement target
    n_elements: int = 5  # 1D interval count
    n_time: int = 30  # time collocation nodes
    # discretization
    n_volume: int = 20  # quadrature points per element
    n_edge: int = 20  # quadrature points per 2D edge
    degree: int = 5  # test-function degree
    # architecture
    hidden_layers: int = 2
    width: int = 40
    # training
    max_iters: int = 3000
    adam_fraction: float = 0.2
    learning_rate: float = 1e-4
    top_k: int = 0  # 0 selects every element
    sigma_eq: float = 1.0
    sigma_ic: float = 1.0
    sigma_penalty: float = 1.0
    flux_jump: float = 1.0
    seed: int = 0
    # logging / outputs
    output_dir: str = "runs/out"
    clock: str = "wall"  # wall | none (zeroed column, for bit-exact reruns)
    log_every: int = 1

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}; "
                              f"choose from {PROBLEMS}")
        if not 0 <= self.degree <= 10:
            raise ConfigError(f"test degree {self.degree} outside [0, 10]")
        if not 3 <= self.n_volume <= 64:
            raise ConfigError(f"n_volume {self.n_volume} outside [3, 64]")
        for name in ("n_elements", "n_time", "n_edge", "width",
                     "hidden_layers", "log_every"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.max_iters < 0 or self.top_k < 0:
            raise ConfigError("max_iters and top_k must be nonnegative")
        if not 0.0 <= self.adam_fraction <= 1.0:
            raise ConfigError("adam_fraction must lie in [0, 1]")
        if self.clock not in ("wall", "none"):
            raise ConfigError("clock must be 'wall' or 'none'")
        if self.s_min <= 0 or self.omega_pi <= 0 or self.learning_rate <= 0:
            raise ConfigError("s_min, omega_pi, learning_rate must be positive")

    @property
    def sigma(self) -> tuple[float, float, float]:
        return (self.sigma_eq, self.sigma_ic, self.sigma_penalty)

    @property
    def omega(self) -> float:
        return self.omega_pi * np.pi

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(name: str, raw: str):
    if name not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {name!r}")
    kind = _FIELD_TYPES[name]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return str(raw)
    except ValueError as err:
        raise ConfigError(f"bad value for {name}: {raw!r}") from err


def load_config(path=None, overrides: list[str] | None = None) -> RunConfig:
    """Config from a JSON file of RunConfig keys, then key=value overrides."""
    values = {}
    if path is not None:
        try:
            with open(path) as f:
                values = json.load(f)
        except FileNotFoundError as err:
            raise ConfigError(f"config file not found: {path}") from err
        except json.JSONDecodeError as err:
            raise ConfigError(f"config file is not valid JSON: {err}") from err
        if not isinstance(values, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(values) - set(_FIELD_TYPES)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        config = RunConfig(**values)
    except TypeError as err:
        raise ConfigError(str(err)) from err
    return apply_overrides(config, overrides or [])


def apply_overrides(config: RunConfig, overrides: list[str]) -> RunConfig:
    updates = {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        updates[key.strip()] = _coerce(key.strip(), raw.strip())
    return replace(config, **updates) if updates else config
