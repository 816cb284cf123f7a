"""Experiment configuration: flat key = value files, typed and strict.

The format is deliberately diff-able and seed-stable: one `key = value` pair
per line, `#` comments, no sections. Unknown keys are rejected. The full
configuration is echoed as a single metadata line at the top of every output
CSV, and `kgflow replay` re-parses that line to rerun the experiment
byte-identically (a `timestamp` field in the metadata line is the only
excluded difference).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Iterable


class ConfigError(ValueError):
    """Malformed configuration input (CLI exit code 2)."""


@dataclass
class ExperimentConfig:
    d: int = 100
    n_exponent: float = 1.5
    activation: str = "relu"
    cyclic: bool = False
    K: int = 30
    target: str = "ridge_hermite:0.5,0.7071067811865476,0.3535533905932738"
    sigma_eps2: float = 0.0
    trials: int = 10
    test_set_size: int = 2000
    t_min_exponent: float = 0.1
    t_max_exponent: float = float("nan")  # NaN = auto: s + 1.2
    points_per_decade: int = 12
    seed: int = 0
    output: str = "kgflow_out"
    # random-feature SGD settings (used by the rf-sgd command only)
    rf_features: int = 20000
    rf_learning_rate: float = 0.1
    rf_batch_size: int = 50
    rf_momentum: float = 0.9
    rf_steps: int = 2000
    rf_eval_points: int = 25

    @property
    def n(self) -> int:
        return int(round(self.d**self.n_exponent))

    def validate(self) -> None:
        if self.d < 3:
            raise ConfigError(f"d must be >= 3, got {self.d}")
        if not math.isfinite(self.n_exponent):
            raise ConfigError("n_exponent must be finite")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.test_set_size < 1:
            raise ConfigError("test_set_size must be >= 1")
        if self.points_per_decade < 1:
            raise ConfigError("points_per_decade must be >= 1")
        if not math.isfinite(self.t_min_exponent):
            raise ConfigError("t_min_exponent must be finite")
        if self.sigma_eps2 < 0:
            raise ConfigError("sigma_eps2 must be >= 0")
        if self.K < 1:
            raise ConfigError("K must be >= 1")

    def resolved_t_max_exponent(self) -> float:
        if math.isfinite(self.t_max_exponent):
            return self.t_max_exponent
        s = int(math.floor(math.log(self.n) / math.log(self.d)))
        return s + 1.2

    def time_grid(self):
        import numpy as np

        lo = self.t_min_exponent * math.log10(self.d)
        hi = self.resolved_t_max_exponent() * math.log10(self.d)
        if hi <= lo:
            raise ConfigError("time grid is empty: t_max_exponent <= t_min_exponent")
        npts = max(2, int(round((hi - lo) * self.points_per_decade)) + 1)
        return np.logspace(lo, hi, npts)


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _parse_value(key: str, raw: str):
    ftype = _FIELD_TYPES[key]
    raw = raw.strip()
    try:
        if ftype == "int":
            return int(raw)
        if ftype == "float":
            return float(raw)
        if ftype == "bool":
            low = raw.lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {exc}") from exc


def apply_assignments(cfg: ExperimentConfig, items: Iterable[str]) -> ExperimentConfig:
    """Apply `key=value` strings (CLI --set overrides or file lines)."""
    for item in items:
        if "=" not in item:
            raise ConfigError(f"expected key=value, got {item!r}")
        key, raw = item.split("=", 1)
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown configuration key {key!r}")
        setattr(cfg, key, _parse_value(key, raw))
    return cfg


def load_config(path: str | None, overrides: Iterable[str] = ()) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if path is not None:
        try:
            with open(path) as fh:
                lines = fh.readlines()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        assignments = []
        for ln, line in enumerate(lines, 1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{ln}: expected key = value")
            assignments.append(stripped)
        apply_assignments(cfg, assignments)
    apply_assignments(cfg, overrides)
    cfg.validate()
    return cfg


def to_metadata(cfg: ExperimentConfig, kind: str, timestamp: str) -> str:
    """Single-line config echo placed at the top of output CSVs."""
    parts = [f"kind={kind}"]
    for f in fields(ExperimentConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, float):
            parts.append(f"{f.name}={value!r}")
        else:
            parts.append(f"{f.name}={value}")
    parts.append(f"timestamp={timestamp}")
    return "# " + " ".join(parts)


def from_metadata(line: str) -> tuple[ExperimentConfig, str]:
    """Invert :func:`to_metadata`; returns (config, kind)."""
    if not line.startswith("# "):
        raise ConfigError("metadata line must start with '# '")
    cfg = ExperimentConfig()
    kind = None
    for item in line[2:].split():
        key, _, raw = item.partition("=")
        if key == "kind":
            kind = raw
        elif key == "timestamp":
            continue
        elif key in _FIELD_TYPES:
            setattr(cfg, key, _parse_value(key, raw))
        else:
            raise ConfigError(f"unknown metadata key {key!r}")
    if kind is None:
        raise ConfigError("metadata line lacks a kind field")
    cfg.validate()
    return cfg, kind
