"""
Experiment configuration.

A run is described by an ExperimentConfig: JSON file values first, command-line flags
on top. The only environment-controlled setting is HCRNN_OUTPUT_ROOT (default "runs"),
read through python-dotenv so a project-level .env works too.
"""

import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from dotenv import load_dotenv

from .errors import ConfigurationError, UsageError
from .hcrnn_model import VARIANTS, ModelConfig
from .train_eval import DEFAULT_THRESHOLDS, TrainConfig

SEED_STREAMS = ("data", "init", "augment", "synth")
MODEL_SIZES = ("full", "tiny")
CENTER_MODES = ("palm", "mass")
DEFAULT_TOPOLOGY = "msra"


def load_environment():
    """Load .env (if present) and return the default output root"""
    load_dotenv()
    return Path(os.getenv("HCRNN_OUTPUT_ROOT", "runs"))


def split_seeds(root_seed):
    """One child seed per subsystem, all derived from ``root_seed``"""
    children = np.random.SeedSequence(int(root_seed)).spawn(len(SEED_STREAMS))
    return {name: int(child.generate_state(1)[0]) for name, child in zip(SEED_STREAMS, children)}


@dataclass
class ExperimentConfig:
    topology: str = None  # unset: msra for new data, the checkpoint's own for eval/infer
    variant: str = "full"
    model_size: str = "full"
    manifest: str = None
    synth_frames: int = 64
    synth_subjects: int = 4
    synth_noise_mm: float = 0.0
    output_dir: str = None
    seed: int = 0
    cube_size: float = 300.0
    center: str = "palm"
    workers: int = 1
    thresholds: list = field(default_factory=lambda: list(DEFAULT_THRESHOLDS))
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if isinstance(self.train, dict):
            self.train = TrainConfig.from_dict(self.train)
        self.validate()

    def validate(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown variant '{self.variant}', expected one of {list(VARIANTS)}")
        if self.model_size not in MODEL_SIZES:
            raise ConfigurationError(f"unknown model size '{self.model_size}', expected one of {list(MODEL_SIZES)}")
        if self.center not in CENTER_MODES:
            raise ConfigurationError(f"unknown centre mode '{self.center}', expected one of {list(CENTER_MODES)}")
        if self.synth_frames < 1:
            raise UsageError(f"synthetic frame count must be at least 1, got {self.synth_frames}")
        if self.synth_subjects < 1 or self.workers < 1 or not self.cube_size > 0:
            raise ConfigurationError("synth_subjects, workers and cube_size must be positive")
        if not self.thresholds:
            raise ConfigurationError("at least one success threshold is required")

    @classmethod
    def from_dict(cls, document):
        unknown = set(document) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**document)

    @classmethod
    def load(cls, path):
        path = Path(path)
        if not path.exists():
            raise UsageError(f"config file not found: {path}")
        try:
            document = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as error:
            raise ConfigurationError(f"{path}: invalid JSON ({error})") from error
        if not isinstance(document, dict):
            raise ConfigurationError(f"{path}: config must be a JSON object")
        return cls.from_dict(document)

    def with_overrides(self, overrides, train_overrides=None):
        """Copy with every non-None override applied; flags win over file values"""
        document = self.to_dict()
        document.update({k: v for k, v in overrides.items() if v is not None})
        document["train"].update({k: v for k, v in (train_overrides or {}).items() if v is not None})
        return ExperimentConfig.from_dict(document)

    def to_dict(self):
        document = asdict(self)
        document["thresholds"] = [float(t) for t in self.thresholds]
        return document

    def model_config(self):
        return ModelConfig.full() if self.model_size == "full" else ModelConfig.tiny()

    def seeds(self):
        return split_seeds(self.seed)

    def resolve_output_dir(self, command, output_root=None):
        if self.output_dir:
            return Path(self.output_dir)
        root = output_root if output_root is not None else Path(os.getenv("HCRNN_OUTPUT_ROOT", "runs"))
        return Path(root) / f"{command}-seed{self.seed}"

    def echo(self, output_dir):
        """Write the resolved configuration next to the run's outputs"""
        output_dir = Path(output_dir)
        output_dir.mkdir(parents=True, exist_ok=True)
        path = output_dir / "resolved_config.json"
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path
