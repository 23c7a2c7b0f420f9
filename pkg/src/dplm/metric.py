"""Full-reference localization similarity from network activations.

The distance between two binaural signals is the sum, over a set of
capture layers, of the mean absolute difference of their activation
tensors: for layer l with activations of shape (T_l, B_l, C_l),

    D(x1, x2) = sum_l  1 / (T_l * B_l * C_l) * ||F_l(x1) - F_l(x2)||_1

which is exactly `abs(diff).mean()` per layer.  Two alignment modes are
supported: `strict_equal_length` evaluates the sum as written and
requires equal frame counts; `time_pooled` first averages each layer
over its time axis, so signals of unequal duration remain comparable at
the cost of temporal resolution.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
import torch

from .checkpoint import load_checkpoint
from .model import DoaNet
from .signal import BinauralSignal

ALIGNMENTS = ("strict_equal_length", "time_pooled")


@dataclass(frozen=True)
class MetricConfig:
    """How to turn a trained network into a distance.

    Exactly one of `checkpoint` and `model` must be set.  `layer_names`
    selects a subset of the capture layers (None means all of them, the
    six block outputs plus both recurrent layers).
    """

    checkpoint: Optional[Union[str, Path]] = None
    model: Optional[DoaNet] = None
    layer_names: Optional[Tuple[str, ...]] = None
    alignment: str = "strict_equal_length"

    def __post_init__(self):
        if (self.checkpoint is None) == (self.model is None):
            raise ValueError("set exactly one of checkpoint and model")
        if self.alignment not in ALIGNMENTS:
            raise ValueError(f"alignment must be one of {ALIGNMENTS}")
        if self.layer_names is not None:
            object.__setattr__(self, "layer_names", tuple(self.layer_names))
            if not self.layer_names:
                raise ValueError("layer_names may not be empty")

    def resolve_model(self) -> DoaNet:
        if self.model is not None:
            return self.model
        model, _, _ = load_checkpoint(self.checkpoint)
        object.__setattr__(self, "model", model)
        object.__setattr__(self, "checkpoint", None)
        return model

    def resolved_layers(self, model: DoaNet) -> Tuple[str, ...]:
        available = model.cfg.layer_names()
        if self.layer_names is None:
            return tuple(available)
        unknown = [n for n in self.layer_names if n not in available]
        if unknown:
            raise ValueError(f"unknown layer names {unknown}; available: {available}")
        return self.layer_names


class PairwiseDistanceError(RuntimeError):
    """A distance inside a batch matrix failed; carries the pair indices."""

    def __init__(self, i: int, j: int, cause: Exception):
        super().__init__(f"distance failed for pair ({i}, {j}): {cause}")
        self.pair = (i, j)


def _captured_layers(
    model: DoaNet, signal: BinauralSignal, requires_grad: bool = False
) -> Tuple[Dict[str, torch.Tensor], Optional[torch.Tensor]]:
    """Run the network and keep the capture-layer tensors as (T, B, C)."""
    dtype = next(model.parameters()).dtype
    samples = torch.as_tensor(signal.samples, dtype=dtype)
    if requires_grad:
        samples = samples.requires_grad_(True)
    feats = model.features_from_signal(samples)
    _, _, acts = model(feats, capture=True)
    out = {}
    for name, tensor in zip(model.cfg.layer_names(), acts):
        if tensor.ndim == 4:
            # conv maps (1, C, T, F) -> time, bins, channels
            out[name] = tensor[0].permute(1, 2, 0)
        else:
            # recurrent output (1, T, C) -> a single spatial bin
            out[name] = tensor[0].unsqueeze(1)
    return out, (samples if requires_grad else None)


def _layer_terms(
    a: Dict[str, torch.Tensor],
    b: Dict[str, torch.Tensor],
    layers: Sequence[str],
    alignment: str,
) -> Dict[str, torch.Tensor]:
    terms = {}
    for name in layers:
        ta, tb = a[name], b[name]
        if alignment == "strict_equal_length":
            if ta.shape[0] != tb.shape[0]:
                raise ValueError(
                    f"frame counts differ at layer {name} ({ta.shape[0]} vs "
                    f"{tb.shape[0]}); equalize the inputs or use time_pooled"
                )
            terms[name] = (ta - tb).abs().mean()
        else:
            terms[name] = (ta.mean(dim=0) - tb.mean(dim=0)).abs().mean()
    return terms


def deep_feature_distance(
    x1: BinauralSignal,
    x2: BinauralSignal,
    cfg: MetricConfig,
    per_layer: bool = False,
) -> Union[float, Tuple[float, Dict[str, float]]]:
    """Distance between two signals; optionally also the per-layer terms."""
    if x1.sample_rate != x2.sample_rate:
        raise ValueError("sample rates differ")
    model = cfg.resolve_model()
    layers = cfg.resolved_layers(model)
    with torch.no_grad():
        acts1, _ = _captured_layers(model, x1)
        acts2, _ = _captured_layers(model, x2)
        terms = _layer_terms(acts1, acts2, layers, cfg.alignment)
    breakdown = {name: float(t) for name, t in terms.items()}
    total = float(sum(breakdown.values()))
    if per_layer:
        return total, breakdown
    return total


def distance_with_gradient(
    x1: BinauralSignal,
    x2: BinauralSignal,
    cfg: MetricConfig,
) -> Tuple[float, np.ndarray]:
    """Distance and its gradient with respect to the samples of x1.

    The full pipeline (analysis transform included) is differentiated, so
    the gradient has the shape of `x1.samples`.
    """
    if x1.sample_rate != x2.sample_rate:
        raise ValueError("sample rates differ")
    model = cfg.resolve_model()
    layers = cfg.resolved_layers(model)
    acts1, samples = _captured_layers(model, x1, requires_grad=True)
    with torch.no_grad():
        acts2, _ = _captured_layers(model, x2)
    total = sum(_layer_terms(acts1, acts2, layers, cfg.alignment).values())
    total.backward()
    grad = samples.grad.detach().numpy().astype(np.float64)
    return float(total.detach()), grad


def batch_distance_matrix(
    signals: Sequence[BinauralSignal], cfg: MetricConfig
) -> np.ndarray:
    """Symmetric matrix of pairwise distances with an exact zero diagonal."""
    n = len(signals)
    out = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        for j in range(i + 1, n):
            try:
                d = deep_feature_distance(signals[i], signals[j], cfg)
            except Exception as exc:
                raise PairwiseDistanceError(i, j, exc) from exc
            out[i, j] = out[j, i] = d
    return out
