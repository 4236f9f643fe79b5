"""Run configuration: strict JSON documents with CLI overrides.

Unknown keys are rejected so typos cannot silently fall back to defaults.
Every artifact written by the CLI carries the config hash for provenance.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from animech.core.character import CharacterDescription, default_character, load_character
from animech.optim.es import TrainConfig
from animech.refgen import CommandRanges, GaitParams, RefGenConfig
from animech.rewards import RewardWeights
from animech.sim.env import EnvConfig
from animech.thermal import ThermalCbfConfig


class ConfigError(ValueError):
    pass


_SECTION_TYPES = {
    "env": EnvConfig,
    "gait": GaitParams,
    "ranges": CommandRanges,
    "thermal": ThermalCbfConfig,
}
_TOP_KEYS = {
    "character",
    "seed",
    "output_dir",
    "env",
    "gait",
    "ranges",
    "thermal",
    "weights",
    "train",
}
_TRAIN_KEYS = {f.name for f in dataclasses.fields(TrainConfig)} - {"seed", "mode"}


@dataclass
class RunConfig:
    character_path: str = "default"
    seed: int = 0
    output_dir: str = "out"
    env: EnvConfig = field(default_factory=EnvConfig)
    gait: GaitParams = field(default_factory=GaitParams)
    ranges: CommandRanges = field(default_factory=CommandRanges)
    thermal: ThermalCbfConfig = field(default_factory=ThermalCbfConfig)
    weights: RewardWeights = field(default_factory=RewardWeights)
    train_overrides: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    def character(self) -> CharacterDescription:
        if self.character_path == "default":
            return default_character()
        return load_character(self.character_path)

    def refgen(self) -> RefGenConfig:
        return RefGenConfig(gait=self.gait, ranges=self.ranges)

    def train_config(self, mode: str, **extra) -> TrainConfig:
        kw = dict(self.train_overrides)
        kw.update(extra)
        return TrainConfig(mode=mode, seed=self.seed, **kw)

    def config_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:12]


def _build_section(cls, doc: dict, path: str):
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in doc.items():
        if key not in names:
            raise ConfigError(f"unknown key '{path}.{key}'")
        if isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid section '{path}': {e}") from e


def parse_config(doc: dict) -> RunConfig:
    for key in doc:
        if key not in _TOP_KEYS:
            raise ConfigError(f"unknown config key '{key}'")
    cfg = RunConfig(raw=doc)
    cfg.character_path = doc.get("character", "default")
    cfg.seed = int(doc.get("seed", 0))
    cfg.output_dir = doc.get("output_dir", "out")
    for name, cls in _SECTION_TYPES.items():
        if name in doc:
            setattr(cfg, name, _build_section(cls, doc[name], name))
    if "weights" in doc:
        try:
            cfg.weights = RewardWeights().override(doc["weights"])
        except KeyError as e:
            raise ConfigError(f"weights: {e}") from e
    if "train" in doc:
        for key in doc["train"]:
            if key not in _TRAIN_KEYS:
                raise ConfigError(f"unknown key 'train.{key}'")
        overrides = dict(doc["train"])
        for key, value in overrides.items():
            if isinstance(value, list):
                overrides[key] = tuple(value)
        cfg.train_overrides = overrides
    return cfg


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig(raw={})
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    return parse_config(doc)
