"""Controller configuration: one document, every coefficient overridable."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .bandit import DEFAULT_EXPLORATION, DEFAULT_RIDGE
from .commands import DEFAULT_OUTPUT_CAP, DEFAULT_TIMEOUT
from .credit import CreditConfig
from .grace import GraceConfig
from .memory import RETENTION_CAP, TRIGRAM_CAP, SimilarityWeights
from .rewards import RewardConfig
from .skills import LIBRARY_CAP


@dataclass(frozen=True)
class BanditConfig:
    ridge: float = DEFAULT_RIDGE
    exploration: float = DEFAULT_EXPLORATION


@dataclass(frozen=True)
class MemoryConfig:
    weights: SimilarityWeights = field(default_factory=SimilarityWeights)
    trigram_cap: int = TRIGRAM_CAP
    retention_cap: int = RETENTION_CAP
    skill_cap: int = LIBRARY_CAP


@dataclass(frozen=True)
class HistoryConfig:
    max_blocks: int = 2
    block_chars: int = 2000


@dataclass(frozen=True)
class BoundsConfig:
    command_timeout: float = DEFAULT_TIMEOUT
    output_cap: int = DEFAULT_OUTPUT_CAP


@dataclass(frozen=True)
class DecodingConfig:
    enabled: bool = False
    seed: int = 0


@dataclass(frozen=True)
class ControllerConfig:
    reward: RewardConfig = field(default_factory=RewardConfig)
    credit: CreditConfig = field(default_factory=CreditConfig)
    bandit: BanditConfig = field(default_factory=BanditConfig)
    memory: MemoryConfig = field(default_factory=MemoryConfig)
    grace: GraceConfig = field(default_factory=GraceConfig)
    history: HistoryConfig = field(default_factory=HistoryConfig)
    bounds: BoundsConfig = field(default_factory=BoundsConfig)
    decoding: DecodingConfig = field(default_factory=DecodingConfig)


def _merge(cls, defaults, overrides: dict):
    """Rebuild a frozen dataclass with selected fields overridden."""
    valid = {f.name for f in dataclasses.fields(cls)}
    unknown = set(overrides) - valid
    if unknown:
        raise ValueError(f"unknown config keys for {cls.__name__}: {sorted(unknown)}")
    kwargs = {}
    for f in dataclasses.fields(cls):
        current = getattr(defaults, f.name)
        if f.name in overrides:
            value = overrides[f.name]
            if dataclasses.is_dataclass(current) and isinstance(value, dict):
                value = _merge(type(current), current, value)
            kwargs[f.name] = value
        else:
            kwargs[f.name] = current
    return cls(**kwargs)


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> ControllerConfig:
    """Build the controller configuration.

    Starts from defaults, overlays the JSON document at ``path`` (if given),
    then overlays the in-memory ``overrides`` mapping. Either layer may be
    partial; unknown keys are rejected.
    """
    config = ControllerConfig()
    for layer in (_read_layer(path), overrides or {}):
        if layer:
            config = _merge(ControllerConfig, config, layer)
    return config


def _read_layer(path: str | Path | None) -> dict:
    if path is None:
        return {}
    return json.loads(Path(path).read_text(encoding="utf-8"))
