"""Experiment configuration: defaults, optional YAML file, overrides.

Precedence is overrides > file > built-in defaults.  Unknown keys are
rejected rather than ignored so a typo in a config file fails loudly.
The short `config_hash` of the merged result is what training stamps
into its metrics log and checkpoint metadata.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

import yaml

from .model import ModelConfig
from .train import TrainConfig
from .util import canonical_hash

_METRIC_DEFAULTS = {
    "alignment": "strict_equal_length",
    "layer_names": None,
    "checkpoint": None,
}


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelConfig
    train: TrainConfig
    out_dir: str = "runs"
    metric_alignment: str = "strict_equal_length"
    metric_layers: Optional[Tuple[str, ...]] = None
    metric_checkpoint: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "train": self.train.to_dict(),
            "out_dir": self.out_dir,
            "metric": {
                "alignment": self.metric_alignment,
                "layer_names": list(self.metric_layers) if self.metric_layers else None,
                "checkpoint": self.metric_checkpoint,
            },
        }

    @property
    def config_hash(self) -> str:
        return canonical_hash(self.to_dict())


def _merge_section(
    defaults: Dict[str, Any], given: Mapping[str, Any], section: str
) -> Dict[str, Any]:
    out = dict(defaults)
    for key, value in given.items():
        if key not in defaults:
            raise ValueError(f"unknown config key {section}.{key}" if section else
                             f"unknown config key {key}")
        out[key] = value
    return out


def _apply_override(tree: Dict[str, Any], dotted: str, value: Any):
    parts = dotted.split(".")
    node = tree
    for part in parts[:-1]:
        if part not in node or not isinstance(node[part], dict):
            raise ValueError(f"unknown config key {dotted}")
        node = node[part]
    if parts[-1] not in node:
        raise ValueError(f"unknown config key {dotted}")
    node[parts[-1]] = value


def load_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> ExperimentConfig:
    """Build the experiment config from defaults, a YAML file, overrides.

    `overrides` uses dotted keys ("train.learning_rate") and wins over
    the file, which wins over defaults.
    """
    tree: Dict[str, Any] = {
        "model": ModelConfig().to_dict(),
        "train": TrainConfig().to_dict(),
        "out_dir": "runs",
        "metric": dict(_METRIC_DEFAULTS),
    }
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"no config file at {path}")
        loaded = yaml.safe_load(path.read_text()) or {}
        if not isinstance(loaded, dict):
            raise ValueError(f"{path}: config must be a mapping")
        for section, value in loaded.items():
            if section not in tree:
                raise ValueError(f"unknown config key {section}")
            if isinstance(tree[section], dict):
                if not isinstance(value, dict):
                    raise ValueError(f"config section {section!r} must be a mapping")
                tree[section] = _merge_section(tree[section], value, section)
            else:
                tree[section] = value
    for dotted, value in (overrides or {}).items():
        _apply_override(tree, dotted, value)
    metric = tree["metric"]
    layers = metric["layer_names"]
    return ExperimentConfig(
        model=ModelConfig.from_dict(tree["model"]),
        train=TrainConfig.from_dict(tree["train"]),
        out_dir=str(tree["out_dir"]),
        metric_alignment=metric["alignment"],
        metric_layers=tuple(layers) if layers else None,
        metric_checkpoint=metric["checkpoint"],
    )
