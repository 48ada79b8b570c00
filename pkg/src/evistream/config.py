"""Experiment configuration: dataclasses, defaults, and key=value parsing.

Configuration is a flat set of ``key=value`` pairs, either from a config
file (one or more pairs per line, ``#`` starts a comment) or from
command-line override tokens.  Unknown keys and out-of-range values are
rejected with the offending key named in the diagnostic.
"""

import dataclasses
from dataclasses import dataclass, field, replace
from enum import Enum

from .evidence import EvidenceMode
from .generator import ShapeKind


class ConfigError(ValueError):
    """Invalid experiment configuration; maps to CLI exit code 2."""


class Strategy(str, Enum):
    EVIDENTIAL = "evidential"
    SINGLE_LAST_VIEW = "single_last_view"
    LAST_CHUNK = "last_chunk"
    RANDOM_K = "random_k"
    FULL_HISTORY_ORACLE = "full_history_oracle"


@dataclass(frozen=True)
class Seeds:
    """Independent seeds for the stream's stochastic substreams."""

    frozen_prior: int = 2
    per_chunk_latent: int = 3
    scene: int = 1
    noise: int = 4

    def offset(self, delta: int) -> "Seeds":
        """Derived seed tuple for multi-seed benchmark runs."""
        return Seeds(
            frozen_prior=self.frozen_prior + delta,
            per_chunk_latent=self.per_chunk_latent + delta,
            scene=self.scene + delta,
            noise=self.noise + delta,
        )


@dataclass(frozen=True)
class StreamConfig:
    """Chunking, memory, and selection parameters of one stream run."""

    chunk_size: int = 8
    stride: int = 4
    depth: int = 5
    bundle_size: int = 8
    probe_step: int = 9
    evidence_mode: EvidenceMode = EvidenceMode.EVIDENCE
    strategy: Strategy = Strategy.EVIDENTIAL
    stream_length: int = 100
    seeds: Seeds = field(default_factory=Seeds)

    def __post_init__(self):
        if self.stride < 1:
            raise ConfigError("stride must be >= 1")
        if self.stride > self.chunk_size:
            raise ConfigError("stride must not exceed chunk_size")
        if self.chunk_size > self.stream_length:
            raise ConfigError("chunk_size must not exceed stream_length")
        if self.depth < 1:
            raise ConfigError("depth must be >= 1")
        if self.bundle_size < 1:
            raise ConfigError("bundle_size must be >= 1")
        if self.probe_step < 0:
            raise ConfigError("probe_step must be >= 0")


@dataclass(frozen=True)
class ExperimentConfig:
    """Full experiment description: stream settings plus scene, camera,
    probe, sampler, and output parameters."""

    stream: StreamConfig = field(default_factory=StreamConfig)
    shape_kind: ShapeKind = ShapeKind.COMPOSITE
    grid_size: int = 8
    patch_grid: int = 4
    elevation_deg: float = 20.0
    jitter_sigma_deg: float = 5.0
    hallucination_level: float = 0.3
    logit_noise_sigma: float = 0.25
    kappa_vis: float = 6.0
    kappa_near: float = 2.0
    sampler_steps: int = 16
    epsilon: float = 1e-6
    output_path: str = "results.csv"
    format: str = "csv"

    def __post_init__(self):
        if self.grid_size < 4:
            raise ConfigError("grid_size must be >= 4")
        if self.patch_grid < 2:
            raise ConfigError("patch_grid must be >= 2")
        if not -90.0 <= self.elevation_deg <= 90.0:
            raise ConfigError("elevation_deg must lie in [-90, 90]")
        if self.jitter_sigma_deg < 0.0:
            raise ConfigError("jitter_sigma_deg must be >= 0")
        if not 0.0 <= self.hallucination_level <= 1.0:
            raise ConfigError("hallucination_level must lie in [0, 1]")
        if self.logit_noise_sigma < 0.0:
            raise ConfigError("logit_noise_sigma must be >= 0")
        if self.sampler_steps < 1:
            raise ConfigError("sampler_steps must be >= 1")
        if not self.epsilon > 0.0:
            raise ConfigError("epsilon must be > 0")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")

    def with_seed_offset(self, delta: int) -> "ExperimentConfig":
        return replace(
            self, stream=replace(self.stream, seeds=self.stream.seeds.offset(delta))
        )

    def with_strategy(self, strategy) -> "ExperimentConfig":
        return replace(
            self, stream=replace(self.stream, strategy=Strategy(strategy))
        )

    def flat_dict(self) -> dict:
        """All configuration keys, in config-file key names."""
        s = self.stream
        return {
            "chunk_size": s.chunk_size,
            "stride": s.stride,
            "depth": s.depth,
            "bundle_size": s.bundle_size,
            "probe_step": s.probe_step,
            "evidence_mode": s.evidence_mode.value,
            "strategy": s.strategy.value,
            "stream_length": s.stream_length,
            "seed_frozen_prior": s.seeds.frozen_prior,
            "seed_latent": s.seeds.per_chunk_latent,
            "seed_scene": s.seeds.scene,
            "seed_noise": s.seeds.noise,
            "shape_kind": self.shape_kind.value,
            "grid_size": self.grid_size,
            "patch_grid": self.patch_grid,
            "elevation_deg": self.elevation_deg,
            "jitter_sigma_deg": self.jitter_sigma_deg,
            "hallucination_level": self.hallucination_level,
            "logit_noise_sigma": self.logit_noise_sigma,
            "kappa_vis": self.kappa_vis,
            "kappa_near": self.kappa_near,
            "sampler_steps": self.sampler_steps,
            "epsilon": self.epsilon,
            "output_path": self.output_path,
            "format": self.format,
        }


def _parse_int(raw: str) -> int:
    return int(raw, 10)


def _parse_float(raw: str) -> float:
    value = float(raw)
    if value != value:  # NaN
        raise ValueError("not a number")
    return value


def _parse_enum(enum_cls):
    def parse(raw: str):
        try:
            return enum_cls(raw)
        except ValueError:
            options = ", ".join(m.value for m in enum_cls)
            raise ValueError(f"expected one of: {options}") from None

    return parse


_PARSERS = {
    "chunk_size": _parse_int,
    "stride": _parse_int,
    "depth": _parse_int,
    "bundle_size": _parse_int,
    "probe_step": _parse_int,
    "evidence_mode": _parse_enum(EvidenceMode),
    "strategy": _parse_enum(Strategy),
    "stream_length": _parse_int,
    "seed_frozen_prior": _parse_int,
    "seed_latent": _parse_int,
    "seed_scene": _parse_int,
    "seed_noise": _parse_int,
    "shape_kind": _parse_enum(ShapeKind),
    "grid_size": _parse_int,
    "patch_grid": _parse_int,
    "elevation_deg": _parse_float,
    "jitter_sigma_deg": _parse_float,
    "hallucination_level": _parse_float,
    "logit_noise_sigma": _parse_float,
    "kappa_vis": _parse_float,
    "kappa_near": _parse_float,
    "sampler_steps": _parse_int,
    "epsilon": _parse_float,
    "output_path": str,
    "format": str,
}

_STREAM_KEYS = (
    "chunk_size",
    "stride",
    "depth",
    "bundle_size",
    "probe_step",
    "evidence_mode",
    "strategy",
    "stream_length",
)
_SEED_KEYS = {
    "seed_frozen_prior": "frozen_prior",
    "seed_latent": "per_chunk_latent",
    "seed_scene": "scene",
    "seed_noise": "noise",
}


def _collect_pairs(text: str) -> list:
    pairs = []
    for line in text.splitlines():
        line = line.split("#", 1)[0]
        for token in line.split():
            if "=" not in token:
                raise ConfigError(f"expected key=value, got {token!r}")
            key, _, raw = token.partition("=")
            pairs.append((key.strip(), raw.strip()))
    return pairs


def parse_config(text: str = "", overrides=()) -> ExperimentConfig:
    """Build an ExperimentConfig from config text plus override tokens.

    `text` holds whitespace-separated key=value pairs (a file's contents
    or a flag set); `overrides` is a sequence of additional key=value
    strings applied last.  Empty input yields the full default config.
    """
    values = {}
    for key, raw in _collect_pairs(text) + _collect_pairs(" ".join(overrides)):
        parser = _PARSERS.get(key)
        if parser is None:
            raise ConfigError(f"unknown configuration key: {key!r}")
        try:
            values[key] = parser(raw)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"invalid value for {key!r}: {raw!r} ({exc})") from None

    seed_kwargs = {
        attr: values.pop(key) for key, attr in _SEED_KEYS.items() if key in values
    }
    stream_kwargs = {key: values.pop(key) for key in _STREAM_KEYS if key in values}
    if seed_kwargs:
        stream_kwargs["seeds"] = Seeds(**seed_kwargs)
    stream = StreamConfig(**stream_kwargs)
    return ExperimentConfig(stream=stream, **values)
