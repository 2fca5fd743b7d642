"""Pipeline configuration.

A run is described by a flat set of keys. They can come from a line-based
``key=value`` config file, from CLI flags (which mirror the keys exactly), or
both, with flags taking precedence. Unknown keys and out-of-range values
raise ConfigError, which the CLI maps to exit code 2.
"""

from __future__ import annotations

from dataclasses import dataclass, fields as dc_fields
from pathlib import Path

from .clustering import INIT_METHODS, ClusterConfig
from .compression import CompressionConfig
from .datagen import StreamConfig


class ConfigError(ValueError):
    """Invalid configuration key or value."""


def _parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {raw!r}")


@dataclass
class PipelineConfig:
    # stream generation
    seed: int = 0
    segments: int = 24
    samples_per_segment: int = 100_000
    num_fields: int = 8
    min_field_size: int = 100
    max_field_size: int = 100_000
    zipf_exponent: float = 1.1
    new_feature_rate: float = 0.01
    signal_scale: float = 1.0
    label_noise: float = 0.5
    # compression
    k: int = 100
    eligibility_multiplier: int = 100
    fast: bool = True
    fast_multiplier: int = 100
    init: str = "kmeanspp"
    max_iters: int = 50
    rel_tolerance: float = 1e-4
    # training
    learning_rate: float = 0.001
    batch_size: int = 256
    holdout_fraction: float = 0.1
    init_std: float = 0.01
    cumulative_frequencies: bool = False
    # orchestration
    compress_every: int = 1
    no_compress: bool = False
    threads: int = 1
    data: str = "data"
    out: str = "out"

    def __post_init__(self):
        try:
            self.stream_config()
            self.compression_config()
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        if self.init not in INIT_METHODS:
            raise ConfigError(f"init must be one of {INIT_METHODS}, got {self.init!r}")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if not 0 <= self.holdout_fraction < 1:
            raise ConfigError("holdout_fraction must be in [0, 1)")
        if self.init_std < 0:
            raise ConfigError("init_std must be >= 0")
        if self.compress_every < 1:
            raise ConfigError("compress_every must be >= 1")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")

    def stream_config(self) -> StreamConfig:
        return StreamConfig(
            num_fields=self.num_fields,
            min_field_size=self.min_field_size,
            max_field_size=self.max_field_size,
            zipf_exponent=self.zipf_exponent,
            segments=self.segments,
            samples_per_segment=self.samples_per_segment,
            new_feature_rate=self.new_feature_rate,
            signal_scale=self.signal_scale,
            label_noise=self.label_noise,
            seed=self.seed,
        )

    def compression_config(self) -> CompressionConfig:
        return CompressionConfig(
            k=self.k,
            eligibility_multiplier=self.eligibility_multiplier,
            fast_multiplier=self.fast_multiplier,
            fast_enabled=self.fast,
            cluster_config=ClusterConfig(
                k=self.k,
                seed=self.seed,
                max_iters=self.max_iters,
                rel_tolerance=self.rel_tolerance,
                init_method=self.init,
            ),
        )


_FIELD_TYPES = {f.name: f.type for f in dc_fields(PipelineConfig)}


def _coerce(key: str, raw) -> object:
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    if not isinstance(raw, str):
        return raw
    kind = _FIELD_TYPES[key]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            return _parse_bool(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def parse_config_file(path: str | Path) -> dict:
    """Read ``key=value`` lines; blank lines and #-comments are skipped."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    values: dict = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {stripped!r}")
        key, _, value = stripped.partition("=")
        values[key.strip()] = _coerce(key.strip(), value.strip())
    return values


def build_config(config_file: str | Path | None = None, **overrides) -> PipelineConfig:
    """Defaults, then config-file values, then non-None overrides."""
    values: dict = {}
    if config_file is not None:
        values.update(parse_config_file(config_file))
    for key, value in overrides.items():
        if value is not None:
            values[key] = _coerce(key, value)
    try:
        return PipelineConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
