"""Run configuration: a single JSON document driving train/evaluate."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .learn import LossConfig, SamplerConfig, TrainConfig
from .model import ModelConfig

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    dataset_path: str
    split_path: str
    props_path: str = None
    embeddings_path: str = None       # RPEM file; None -> hashing encoder
    hash_dim: int = 64
    hash_seed: int = 0
    model: ModelConfig = field(default_factory=ModelConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    optimizer: TrainConfig = field(default_factory=TrainConfig)

    def resolved(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "dataset": self.dataset_path,
            "split": self.split_path,
            "props": self.props_path,
            "embeddings": self.embeddings_path,
            "hash_dim": self.hash_dim,
            "hash_seed": self.hash_seed,
            "model": vars(self.model).copy(),
            "loss": vars(self.loss).copy(),
            "sampler": vars(self.sampler).copy(),
            "optimizer": vars(self.optimizer).copy(),
        }

    def config_hash(self):
        blob = json.dumps(self.resolved(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


def _section(obj, name, cls):
    data = obj.get(name, {})
    if not isinstance(data, dict):
        raise ConfigError(f"config section {name!r} must be an object")
    try:
        return cls(**data)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid {name} config: {e}")


def load_run_config(path):
    try:
        with open(path, "r", encoding="utf-8") as f:
            obj = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}")
    version = obj.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported config schema_version {version}")
    for key in ("dataset", "split"):
        if key not in obj:
            raise ConfigError(f"config is missing required field {key!r}")
    return RunConfig(
        dataset_path=obj["dataset"],
        split_path=obj["split"],
        props_path=obj.get("props"),
        embeddings_path=obj.get("embeddings"),
        hash_dim=int(obj.get("hash_dim", 64)),
        hash_seed=int(obj.get("hash_seed", 0)),
        model=_section(obj, "model", ModelConfig),
        loss=_section(obj, "loss", LossConfig),
        sampler=_section(obj, "sampler", SamplerConfig),
        optimizer=_section(obj, "optimizer", TrainConfig),
    )


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
