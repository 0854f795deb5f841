"""Run configuration: nested frozen dataclasses with a strict YAML round
trip. Unknown keys are rejected with their full dotted path so a typo in
a config file fails loudly instead of silently using a default.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .bev import VoxelConfig
from .errors import InputFormatError, InvalidArgumentError
from .synth import AugmentationParams, LidarParams, TownParams

__all__ = [
    "MatchingConfig",
    "ScaleConfig",
    "SynthConfig",
    "RunConfig",
    "load_config",
    "save_config",
    "config_to_dict",
    "config_from_dict",
]

_STAGES = ("both", "features", "skeleton")


@dataclass(frozen=True)
class MatchingConfig:
    """Exhaustive matcher settings."""

    n_rotations: int = 64
    template_size: int = 32
    stride: int | None = None  # None: pick by patch size
    stage: str = "both"
    workers: int = 1

    def __post_init__(self) -> None:
        if self.n_rotations < 1:
            raise InvalidArgumentError(f"n_rotations must be >= 1, got {self.n_rotations}")
        if self.template_size < 2:
            raise InvalidArgumentError(f"template_size must be >= 2, got {self.template_size}")
        if self.stride is not None and self.stride < 1:
            raise InvalidArgumentError(f"stride must be >= 1, got {self.stride}")
        if self.stage not in _STAGES:
            raise InvalidArgumentError(f"stage must be one of {_STAGES}, got {self.stage!r}")
        if self.workers < 1:
            raise InvalidArgumentError(f"workers must be >= 1, got {self.workers}")


@dataclass(frozen=True)
class ScaleConfig:
    """Scale alignment settings."""

    enabled: bool = True
    s_min: float = 0.4
    s_max: float = 5.0
    n_bins: int = 20
    temperature: float = 0.05
    coarse_rotations: int = 32

    def __post_init__(self) -> None:
        if not 0 < self.s_min < self.s_max:
            raise InvalidArgumentError(f"need 0 < s_min < s_max, got {(self.s_min, self.s_max)}")
        if self.n_bins < 2:
            raise InvalidArgumentError(f"n_bins must be >= 2, got {self.n_bins}")
        if self.temperature <= 0:
            raise InvalidArgumentError(f"temperature must be positive, got {self.temperature}")
        if self.coarse_rotations < 1:
            raise InvalidArgumentError(f"coarse_rotations must be >= 1, got {self.coarse_rotations}")


@dataclass(frozen=True)
class SynthConfig:
    """Dataset generation settings."""

    n_scenes: int = 100
    seed: int = 0
    town: TownParams = field(default_factory=TownParams)
    lidar: LidarParams = field(default_factory=LidarParams)
    augmentation: AugmentationParams = field(default_factory=AugmentationParams)

    def __post_init__(self) -> None:
        if self.n_scenes < 1:
            raise InvalidArgumentError(f"n_scenes must be >= 1, got {self.n_scenes}")


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs, in one tree."""

    voxel: VoxelConfig = field(default_factory=VoxelConfig)
    matching: MatchingConfig = field(default_factory=MatchingConfig)
    scale: ScaleConfig = field(default_factory=ScaleConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)


_NESTED: dict[tuple[type, str], type] = {
    (RunConfig, "voxel"): VoxelConfig,
    (RunConfig, "matching"): MatchingConfig,
    (RunConfig, "scale"): ScaleConfig,
    (RunConfig, "synth"): SynthConfig,
    (SynthConfig, "town"): TownParams,
    (SynthConfig, "lidar"): LidarParams,
    (SynthConfig, "augmentation"): AugmentationParams,
}


def _build(cls: type, data: dict, path: str) -> object:
    if not isinstance(data, dict):
        raise InputFormatError(f"config section {path or 'root'} must be a mapping, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        where = f"{path}." if path else ""
        raise InputFormatError(
            f"unknown config key{'s' if len(unknown) > 1 else ''}: "
            + ", ".join(f"{where}{k}" for k in unknown)
        )
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name not in data:
            continue
        value = data[f.name]
        sub = _NESTED.get((cls, f.name))
        if sub is not None:
            kwargs[f.name] = _build(sub, value if value is not None else {},
                                    f"{path}.{f.name}" if path else f.name)
        elif isinstance(value, list):
            kwargs[f.name] = tuple(value)
        else:
            kwargs[f.name] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise InputFormatError(f"bad config section {path or 'root'}: {exc}") from exc


def _listify(obj: object) -> object:
    if isinstance(obj, dict):
        return {k: _listify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_listify(v) for v in obj]
    return obj


def config_from_dict(data: dict | None) -> RunConfig:
    """Build a RunConfig from a (possibly partial) nested mapping."""
    return _build(RunConfig, data or {}, "")  # type: ignore[return-value]


def config_to_dict(cfg: RunConfig) -> dict:
    """Full nested mapping of a RunConfig, YAML-friendly."""
    return _listify(dataclasses.asdict(cfg))  # type: ignore[return-value]


def load_config(path: str | Path) -> RunConfig:
    """Read a YAML config; keys not in the schema are an error."""
    path = Path(path)
    if not path.is_file():
        raise InputFormatError(f"missing config file: {path}")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise InputFormatError(f"unreadable config {path}: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise InputFormatError(f"config {path} must hold a mapping at top level")
    return config_from_dict(data)


def save_config(cfg: RunConfig, path: str | Path) -> None:
    """Write the complete effective configuration as YAML."""
    text = yaml.safe_dump(config_to_dict(cfg), sort_keys=True, default_flow_style=False)
    Path(path).write_text(text)
