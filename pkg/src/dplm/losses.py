"""Training objectives: label-smoothed cross-entropy, great-circle distance,
and their average, in both a numpy form (scalar contracts) and a torch form
(differentiable, batched, used by the training loop).

The torch great-circle term clamps its radicand at 1e-12: the square root
is not differentiable at zero, and near-perfect predictions would otherwise
produce non-finite gradients.  The clamp bounds the loss floor at
2*asin(1e-6), which is negligible against every stated tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import torch

from .geometry import BinGrid, SourceLocation, haversine
from .model import PredictionFrame, decode_azimuth_torch, decode_elevation_torch

PROB_FLOOR = 1e-12
RADICAND_FLOOR = 1e-12
# asin'(sqrt(r)) = 1/(2 sqrt(r) sqrt(1-r)) blows up at both ends; float32
# rounding can land the radicand on exactly 1.0 for near-antipodal decodes,
# which turns the backward pass into inf.  The ceiling costs ~0.11 deg of
# range at the antipode and keeps the gradient below ~500.
RADICAND_CEIL = 1.0 - 1e-6


@dataclass(frozen=True)
class ClassTarget:
    """A one-hot class target with label smoothing."""

    bin_index: int
    smoothing_alpha: float
    n_classes: int

    def __post_init__(self):
        if not 0 <= self.bin_index < self.n_classes:
            raise ValueError(f"bin_index {self.bin_index} outside [0, {self.n_classes})")
        if not 0.0 <= self.smoothing_alpha < 1.0:
            raise ValueError("smoothing_alpha must lie in [0, 1)")

    def weights(self) -> np.ndarray:
        """Smoothed target weights y_k*(1-alpha) + alpha/K; they sum to 1."""
        w = np.full(self.n_classes, self.smoothing_alpha / self.n_classes)
        w[self.bin_index] += 1.0 - self.smoothing_alpha
        return w


def label_smoothed_ce(target: ClassTarget, probs: np.ndarray) -> float:
    """Cross-entropy against the smoothed target, probabilities floored at 1e-12."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.shape != (target.n_classes,):
        raise ValueError(
            f"class count mismatch: {probs.shape[0] if probs.ndim else 0} probs "
            f"vs K={target.n_classes}"
        )
    if np.any(probs < 0):
        raise ValueError("probabilities must be non-negative")
    return float(-np.dot(target.weights(), np.log(np.maximum(probs, PROB_FLOOR))))


def combined_loss(
    frames: Sequence[PredictionFrame],
    decoded: Sequence[SourceLocation],
    targets: Sequence[ClassTarget],
    truths: Sequence[SourceLocation],
    azimuth_only: bool = True,
    elevation_targets: Optional[Sequence[ClassTarget]] = None,
) -> float:
    """Average of mean label-smoothed CE and mean great-circle distance.

    The static variant passes length-1 sequences (one time-averaged
    prediction); the moving variant passes one entry per frame.  With
    azimuth-only heads both elevations are zeroed in the distance term.
    """
    if not (len(frames) == len(decoded) == len(targets) == len(truths)) or not frames:
        raise ValueError("frames, decodes, targets and truths must align and be nonempty")
    ce_terms = []
    for i, (frame, target) in enumerate(zip(frames, targets)):
        ce = label_smoothed_ce(target, frame.azimuth_probs)
        if elevation_targets is not None:
            if frame.elevation_probs is None:
                raise ValueError("elevation targets given but frames carry no elevation probs")
            ce = 0.5 * (ce + label_smoothed_ce(elevation_targets[i], frame.elevation_probs))
        ce_terms.append(ce)
    hav_terms = []
    for d, t in zip(decoded, truths):
        if azimuth_only:
            d = SourceLocation(d.azimuth, 0.0)
            t = SourceLocation(t.azimuth, 0.0)
        hav_terms.append(haversine(d, t))
    return 0.5 * float(np.mean(ce_terms)) + 0.5 * float(np.mean(hav_terms))


# --- torch forms -----------------------------------------------------------


def label_smoothed_ce_torch(
    logits: torch.Tensor, bin_index: torch.Tensor, alpha: float
) -> torch.Tensor:
    """Per-row smoothed CE from logits; shapes (..., K) and (...,)."""
    k = logits.shape[-1]
    log_p = torch.log_softmax(logits, dim=-1)
    log_p = torch.clamp(log_p, min=float(np.log(PROB_FLOOR)))
    one_hot = torch.nn.functional.one_hot(bin_index, num_classes=k).to(logits.dtype)
    weights = one_hot * (1.0 - alpha) + alpha / k
    return -(weights * log_p).sum(dim=-1)


def haversine_torch(
    az1: torch.Tensor, el1: torch.Tensor, az2: torch.Tensor, el2: torch.Tensor
) -> torch.Tensor:
    """Great-circle distance with the radicand clamped away from 0 and 1 so
    the asin gradient stays finite at coincident and antipodal decodes."""
    radicand = (
        torch.sin((el1 - el2) / 2) ** 2
        + torch.cos(el1) * torch.cos(el2) * torch.sin((az1 - az2) / 2) ** 2
    )
    radicand = torch.clamp(radicand, min=RADICAND_FLOOR, max=RADICAND_CEIL)
    return 2.0 * torch.asin(torch.sqrt(radicand))


def combined_loss_torch(
    az_logits: torch.Tensor,
    truth_az: torch.Tensor,
    az_bins: torch.Tensor,
    grid: BinGrid,
    alpha: float,
    variant: str,
    el_logits: Optional[torch.Tensor] = None,
    truth_el: Optional[torch.Tensor] = None,
    el_bins: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    """Batched combined objective.

    Moving variant: az_logits (B, T, K) with per-frame truths/bins (B, T).
    Static variant: logits are first averaged over time; truths/bins are
    per sample (B,).  Elevation arguments engage the two-head form; without
    them the distance term runs at zero elevation.
    """
    dtype = az_logits.dtype
    az_centers = torch.as_tensor(grid.azimuth_centers(), dtype=dtype)
    if variant == "static":
        if az_logits.ndim != 3:
            raise ValueError("expected (B, T, K) logits")
        az_logits = az_logits.mean(dim=1)
        el_logits = el_logits.mean(dim=1) if el_logits is not None else None
    elif variant != "moving":
        raise ValueError("variant must be 'static' or 'moving'")
    ce = label_smoothed_ce_torch(az_logits, az_bins, alpha)
    dec_az = decode_azimuth_torch(az_logits, az_centers)
    if el_logits is not None:
        if truth_el is None or el_bins is None:
            raise ValueError("elevation logits need elevation truths and bins")
        el_centers = torch.as_tensor(grid.elevation_centers(), dtype=dtype)
        ce = 0.5 * (ce + label_smoothed_ce_torch(el_logits, el_bins, alpha))
        dec_el = decode_elevation_torch(el_logits, el_centers)
        hav = haversine_torch(dec_az, dec_el, truth_az, truth_el)
    else:
        zero = torch.zeros_like(dec_az)
        hav = haversine_torch(dec_az, zero, truth_az, zero)
    return 0.5 * ce.mean() + 0.5 * hav.mean()
