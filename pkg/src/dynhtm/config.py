"""Experiment configuration: nested dataclasses parsed strictly from JSON."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import types
import typing
from dataclasses import dataclass, field

from .errors import ConfigError


@dataclass(frozen=True)
class SystemConfig:
    kind: str = "lorenz"
    sigma: float = 10.0
    rho: float = 28.0
    beta: float = 8.0 / 3.0
    x0: tuple[float, ...] = (1.0, 1.0, 1.0)
    dt: float = 0.01
    n_steps: int = 10000
    transient: int = 0
    method: str = "rk4"
    coupling: float = 0.1

    def validate(self, path):
        _choice(path, "kind", self.kind, ("lorenz", "logistic"))
        _choice(path, "method", self.method, ("rk4", "euler"))
        _positive(path, "dt", self.dt)
        _at_least(path, "n_steps", self.n_steps, 1)
        _at_least(path, "transient", self.transient, 0)
        if len(self.x0) != 3:
            raise ConfigError(f"{path}.x0", "expected three initial values")


@dataclass(frozen=True)
class SegmentConfig:
    start_step: int = 0
    sigma: float | None = None
    rho: float | None = None
    beta: float | None = None

    def validate(self, path):
        _at_least(path, "start_step", self.start_step, 0)


@dataclass(frozen=True)
class ScheduleConfig:
    """Parameter changes after step 0; unset fields inherit the ``system`` block."""

    segments: tuple[SegmentConfig, ...] = ()

    def validate(self, path):
        starts = [s.start_step for s in self.segments]
        if any(s <= 0 for s in starts):
            raise ConfigError(f"{path}.segments", "start_step must be positive; step 0 uses the system block")
        if starts != sorted(set(starts)):
            raise ConfigError(f"{path}.segments", "start_step values must be strictly increasing")


@dataclass(frozen=True)
class ObservationBlock:
    weights: tuple[float, ...] = (1.0, 0.0, 0.0)
    noise_std: float = 0.0

    def validate(self, path):
        if len(self.weights) != 3:
            raise ConfigError(f"{path}.weights", "expected three weights")
        if not any(self.weights):
            raise ConfigError(f"{path}.weights", "weights must not all be zero")
        _at_least(path, "noise_std", self.noise_std, 0.0)


@dataclass(frozen=True)
class EmbeddingConfig:
    """``tau`` and ``k`` are estimated from the data when left null."""

    tau: int | None = None
    k: int | None = None
    max_lag: int = 100
    k_max: int = 10

    def validate(self, path):
        if self.tau is not None:
            _at_least(path, "tau", self.tau, 1)
        if self.k is not None:
            _at_least(path, "k", self.k, 1)
        _at_least(path, "max_lag", self.max_lag, 1)
        _at_least(path, "k_max", self.k_max, 1)


@dataclass(frozen=True)
class ForecastConfig:
    kn: int = 8
    horizon: int = 1
    gap_factor: float = 3.0
    library_fraction: float = 0.5
    decay: float = 0.05
    by_label: bool = True

    def validate(self, path):
        _at_least(path, "kn", self.kn, 1)
        _at_least(path, "horizon", self.horizon, 1)
        if not self.gap_factor > 1:
            raise ConfigError(f"{path}.gap_factor", "must exceed 1")
        if not 0 < self.library_fraction < 1:
            raise ConfigError(f"{path}.library_fraction", "must lie in (0, 1)")
        if not 0 < self.decay < 1:
            raise ConfigError(f"{path}.decay", "must lie in (0, 1)")


@dataclass(frozen=True)
class CausalityConfig:
    """``x`` is the primary observable; ``y_weights`` reads the second one from a Lorenz run."""

    y_weights: tuple[float, ...] = (0.0, 1.0, 0.0)
    k: int = 10
    theiler_w: int | None = None
    n_points: int = 1000
    n_surrogates: int = 20
    min_effect: float = 0.1
    library_sizes: tuple[int, ...] = (20, 50, 100, 200, 400, 800)

    def validate(self, path):
        if len(self.y_weights) != 3:
            raise ConfigError(f"{path}.y_weights", "expected three weights")
        _at_least(path, "k", self.k, 1)
        if self.theiler_w is not None:
            _at_least(path, "theiler_w", self.theiler_w, 0)
        _at_least(path, "n_points", self.n_points, 10)
        _at_least(path, "n_surrogates", self.n_surrogates, 1)
        if not self.library_sizes:
            raise ConfigError(f"{path}.library_sizes", "must not be empty")


@dataclass(frozen=True)
class SDRConfig:
    n: int = 2048
    w: int = 40
    min: float = -25.0
    max: float = 25.0
    fields: int = 2
    cells_per_column: int = 8
    activation_threshold: int = 13
    learning_threshold: int = 10
    initial_permanence: float = 0.55
    pool_size: int = 40
    gain: float = 0.5

    def validate(self, path):
        _at_least(path, "n", self.n, 1)
        _at_least(path, "w", self.w, 1)
        _at_least(path, "fields", self.fields, 1)
        if self.w > self.n // self.fields:
            raise ConfigError(f"{path}.w", "must not exceed n / fields")
        if self.w % self.fields or self.n % self.fields:
            raise ConfigError(f"{path}.fields", "must divide both n and w")
        if not self.min < self.max:
            raise ConfigError(f"{path}.max", "must exceed min")
        _at_least(path, "cells_per_column", self.cells_per_column, 1)
        _at_least(path, "pool_size", self.pool_size, 1)
        if not 0 <= self.initial_permanence <= 1:
            raise ConfigError(f"{path}.initial_permanence", "must lie in [0, 1]")


@dataclass(frozen=True)
class IOConfig:
    """``input`` is an optional ``step,t,value`` table used instead of a generated series."""

    input: str | None = None
    out: str = "out"
    format: str = "csv"

    def validate(self, path):
        _choice(path, "format", self.format, ("csv", "jsonl"))


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    system: SystemConfig = field(default_factory=SystemConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    observation: ObservationBlock = field(default_factory=ObservationBlock)
    embedding: EmbeddingConfig = field(default_factory=EmbeddingConfig)
    forecast: ForecastConfig = field(default_factory=ForecastConfig)
    causality: CausalityConfig = field(default_factory=CausalityConfig)
    sdr: SDRConfig = field(default_factory=SDRConfig)
    io: IOConfig = field(default_factory=IOConfig)

    def to_dict(self) -> dict:
        return _to_plain(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def sub_seed(self, stage: str) -> int:
        return derive_seed(self.seed, stage)


def derive_seed(seed: int, stage: str) -> int:
    """Stable per-stage seed, so adding a stage never perturbs another stage's randomness."""
    digest = hashlib.sha256(f"{seed}:{stage}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def _to_plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, tuple):
        return [_to_plain(v) for v in obj]
    return obj


def parse_config(text: str) -> ExperimentConfig:
    """Strictly parse a JSON document; missing fields take their defaults."""
    try:
        data = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError("<document>", f"invalid JSON: {exc}") from None
    return _build(ExperimentConfig, data, "")


def config_from_dict(data: dict) -> ExperimentConfig:
    return _build(ExperimentConfig, data, "")


def _build(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigError(path or "<document>", f"expected an object, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in names:
            raise ConfigError(_join(path, key), "unknown key")
    kwargs = {name: _coerce(hints[name], data[name], _join(path, name)) for name in names if name in data}
    obj = cls(**kwargs)
    if hasattr(obj, "validate"):
        obj.validate(path)
    return obj


def _join(path, key):
    return f"{path}.{key}" if path else str(key)


def _coerce(tp, value, path):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin in (typing.Union, types.UnionType):
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _coerce(inner[0], value, path)
    if origin is tuple:
        if not isinstance(value, list):
            raise ConfigError(path, f"expected a list, got {_name(value)}")
        return tuple(_coerce(args[0], v, f"{path}[{i}]") for i, v in enumerate(value))
    if dataclasses.is_dataclass(tp):
        return _build(tp, value, path)
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected a boolean, got {_name(value)}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {_name(value)}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {_name(value)}")
        if not math.isfinite(value):
            raise ConfigError(path, "must be finite")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {_name(value)}")
        return value
    raise ConfigError(path, f"unsupported field type {tp}")


def _name(value):
    return "null" if value is None else f"{type(value).__name__} {value!r}"


def _choice(path, key, value, options):
    if value not in options:
        raise ConfigError(_join(path, key), f"expected one of {list(options)}, got {value!r}")


def _positive(path, key, value):
    if not value > 0:
        raise ConfigError(_join(path, key), f"must be positive, got {value}")


def _at_least(path, key, value, lo):
    if value < lo:
        raise ConfigError(_join(path, key), f"must be >= {lo}, got {value}")
