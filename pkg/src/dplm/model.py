"""The binaural DOA network: Inception feature blocks, BiLSTM aggregation,
and per-frame localization heads over a direction-bin grid.

The same architecture serves both the static-source and moving-source
variants; the variant only changes how predictions are aggregated for
training and decoding.  Hidden activations of the feature and aggregation
layers can be captured as an :class:`ActivationStack`, the operands of the
deep-feature localization distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import torch
from torch import nn

from .features import DFT_SIZE, HOP, FeatureTensor
from .geometry import BinGrid, SourceLocation

VARIANTS = ("static", "moving")
HEAD_MODES = ("azimuth_only", "azimuth_and_elevation")
LEAKY_SLOPE = 0.01


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters for the DOA network."""

    n_inception_blocks: int = 6
    base_filters: int = 64
    lstm_layers: int = 2
    lstm_embedding: int = 64
    grid: BinGrid = field(default_factory=BinGrid)
    variant: str = "moving"
    heads: str = "azimuth_only"
    dft_size: int = DFT_SIZE
    hop: int = HOP

    def __post_init__(self):
        if min(self.n_inception_blocks, self.base_filters, self.lstm_layers) < 1:
            raise ValueError("block, filter and layer counts must be positive")
        if self.lstm_embedding < 2 or self.lstm_embedding % 2:
            raise ValueError("lstm_embedding must be even (bidirectional halves)")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.heads not in HEAD_MODES:
            raise ValueError(f"heads must be one of {HEAD_MODES}")
        if self.freq_bins_out() < 1:
            raise ValueError("too many frequency poolings for this dft_size")

    @property
    def n_freq(self) -> int:
        return self.dft_size // 2 + 1

    def freq_bins_out(self) -> int:
        f = self.n_freq
        for _ in range(self.n_inception_blocks):
            f //= 2
        return f

    def layer_names(self) -> list[str]:
        return [f"inception_{i + 1}" for i in range(self.n_inception_blocks)] + [
            f"bilstm_{i + 1}" for i in range(self.lstm_layers)
        ]

    def to_dict(self) -> dict:
        return {
            "n_inception_blocks": self.n_inception_blocks,
            "base_filters": self.base_filters,
            "lstm_layers": self.lstm_layers,
            "lstm_embedding": self.lstm_embedding,
            "grid": {"n_azimuth": self.grid.n_azimuth, "n_elevation": self.grid.n_elevation},
            "variant": self.variant,
            "heads": self.heads,
            "dft_size": self.dft_size,
            "hop": self.hop,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["grid"] = BinGrid(**d["grid"])
        return cls(**d)


@dataclass(frozen=True)
class PredictionFrame:
    """Per-frame class probabilities over the direction bins."""

    azimuth_probs: np.ndarray
    elevation_probs: Optional[np.ndarray] = None
    frame_index: int = 0

    def __post_init__(self):
        p = np.asarray(self.azimuth_probs, dtype=np.float64)
        if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-6:
            raise ValueError("azimuth_probs must be a probability vector")
        object.__setattr__(self, "azimuth_probs", p)
        if self.elevation_probs is not None:
            q = np.asarray(self.elevation_probs, dtype=np.float64)
            if q.ndim != 1 or np.any(q < 0) or abs(q.sum() - 1.0) > 1e-6:
                raise ValueError("elevation_probs must be a probability vector")
            object.__setattr__(self, "elevation_probs", q)


@dataclass(frozen=True)
class ActivationStack:
    """Named hidden-layer activations, each of shape (T_l, B_l, C_l)."""

    layers: tuple[tuple[str, np.ndarray], ...]

    def names(self) -> list[str]:
        return [name for name, _ in self.layers]

    def get(self, name: str) -> np.ndarray:
        for n, a in self.layers:
            if n == name:
                return a
        raise KeyError(name)


class InceptionBlock(nn.Module):
    """Parallel 1x1 / 3x3 / 5x5 convolutions plus a pooled projection branch,
    concatenated and max-pooled 1x2 along frequency."""

    def __init__(self, in_channels: int, width: int):
        super().__init__()

        def branch(kernel: int) -> nn.Sequential:
            return nn.Sequential(
                nn.Conv2d(in_channels, width, kernel, padding=kernel // 2),
                nn.BatchNorm2d(width),
                nn.LeakyReLU(LEAKY_SLOPE),
            )

        self.b1 = branch(1)
        self.b3 = branch(3)
        self.b5 = branch(5)
        self.pool_proj = nn.Sequential(
            nn.MaxPool2d(3, stride=1, padding=1),
            nn.Conv2d(in_channels, width, 1),
            nn.BatchNorm2d(width),
            nn.LeakyReLU(LEAKY_SLOPE),
        )
        self.freq_pool = nn.MaxPool2d((1, 2))
        self.out_channels = 4 * width

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        y = torch.cat([self.b1(x), self.b3(x), self.b5(x), self.pool_proj(x)], dim=1)
        return self.freq_pool(y)


class DoaNet(nn.Module):
    """Inception feature extractor, BiLSTM temporal aggregation, bin heads.

    Input layout is (batch, 4, T, F); time resolution is preserved through
    the feature blocks so framewise labels align 1:1 with LSTM frames.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        blocks = []
        in_ch = 4
        for _ in range(cfg.n_inception_blocks):
            block = InceptionBlock(in_ch, cfg.base_filters)
            blocks.append(block)
            in_ch = block.out_channels
        self.blocks = nn.ModuleList(blocks)
        lstm_in = in_ch * cfg.freq_bins_out()
        lstms = []
        for i in range(cfg.lstm_layers):
            lstms.append(
                nn.LSTM(
                    lstm_in if i == 0 else cfg.lstm_embedding,
                    cfg.lstm_embedding // 2,
                    batch_first=True,
                    bidirectional=True,
                )
            )
        self.lstms = nn.ModuleList(lstms)
        self.head_az = nn.Linear(cfg.lstm_embedding, cfg.grid.n_azimuth)
        self.head_el = (
            nn.Linear(cfg.lstm_embedding, cfg.grid.n_elevation)
            if cfg.heads == "azimuth_and_elevation"
            else None
        )

    def n_parameters(self) -> int:
        return sum(p.numel() for p in self.parameters())

    def features_from_signal(self, samples: torch.Tensor) -> torch.Tensor:
        """Differentiable STFT features from a (2, N) sample tensor.

        Mirrors :func:`dplm.features.extract_features`: log1p magnitude and
        principal phase of both ears, shape (1, 4, T, F).
        """
        dft, hop = self.cfg.dft_size, self.cfg.hop
        if samples.ndim != 2 or samples.shape[0] != 2:
            raise ValueError("expected a (2, N) sample tensor")
        if samples.shape[1] < dft:
            raise ValueError("signal too short")
        window = torch.hann_window(
            dft, periodic=True, dtype=samples.dtype, device=samples.device
        )
        frames = samples.unfold(-1, dft, hop) * window
        spec = torch.fft.rfft(frames, dim=-1)
        feat = torch.stack(
            [
                torch.log1p(spec[0].abs()),
                torch.log1p(spec[1].abs()),
                torch.angle(spec[0]),
                torch.angle(spec[1]),
            ],
            dim=0,
        )
        return feat.unsqueeze(0)

    def forward(
        self, x: torch.Tensor, capture: bool = False
    ) -> tuple[torch.Tensor, Optional[torch.Tensor], Optional[list[torch.Tensor]]]:
        """Run the network on (batch, 4, T, F) features.

        Returns (azimuth logits (B, T, K), elevation logits or None, and,
        when capture is set, the feature/aggregation layer outputs).
        """
        if x.ndim != 4 or x.shape[1] != 4 or x.shape[3] != self.cfg.n_freq:
            raise ValueError(
                f"feature/model shape mismatch: got {tuple(x.shape)}, "
                f"expected (B, 4, T, {self.cfg.n_freq})"
            )
        acts: list[torch.Tensor] = []
        for block in self.blocks:
            x = block(x)
            if capture:
                acts.append(x)
        b, c, t, f = x.shape
        seq = x.permute(0, 2, 1, 3).reshape(b, t, c * f)
        for lstm in self.lstms:
            seq, _ = lstm(seq)
            if capture:
                acts.append(seq)
        az = self.head_az(seq)
        el = self.head_el(seq) if self.head_el is not None else None
        return az, el, (acts if capture else None)


def build_model(cfg: ModelConfig, seed: int = 0, dtype: torch.dtype = torch.float32) -> DoaNet:
    """Construct a DOA network with seed-deterministic initialization."""
    torch.manual_seed(seed)
    model = DoaNet(cfg).to(dtype)
    model.eval()
    return model


def feature_tensor_to_torch(feat: FeatureTensor, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """(T, F, 4) numpy features to the model's (1, 4, T, F) layout."""
    return torch.from_numpy(np.ascontiguousarray(feat.data.transpose(2, 0, 1))).to(dtype).unsqueeze(0)


def _stack_from_tensors(cfg: ModelConfig, acts: Sequence[torch.Tensor]) -> ActivationStack:
    layers = []
    names = cfg.layer_names()
    for name, a in zip(names, acts):
        if a.ndim == 4:  # (1, C, T, F) -> (T, F, C)
            arr = a[0].permute(1, 2, 0).detach().cpu().numpy()
        else:  # (1, T, C) -> (T, 1, C)
            arr = a[0].unsqueeze(1).detach().cpu().numpy() if a.ndim == 3 else a.detach().cpu().numpy()
            arr = arr.reshape(arr.shape[0], 1, arr.shape[-1])
        layers.append((name, np.asarray(arr, dtype=np.float64)))
    return ActivationStack(tuple(layers))


def forward(
    model: DoaNet, feat: FeatureTensor, capture: bool = False
) -> tuple[list[PredictionFrame], Optional[ActivationStack]]:
    """Framewise predictions (and optionally the activation stack) for one input."""
    model.eval()
    dtype = next(model.parameters()).dtype
    with torch.no_grad():
        az, el, acts = model(feature_tensor_to_torch(feat, dtype), capture=capture)
        az_probs = torch.softmax(az[0], dim=-1).cpu().numpy().astype(np.float64)
        el_probs = (
            torch.softmax(el[0], dim=-1).cpu().numpy().astype(np.float64)
            if el is not None
            else None
        )
    frames = [
        PredictionFrame(
            azimuth_probs=az_probs[t] / az_probs[t].sum(),
            elevation_probs=None if el_probs is None else el_probs[t] / el_probs[t].sum(),
            frame_index=t,
        )
        for t in range(az_probs.shape[0])
    ]
    stack = _stack_from_tensors(model.cfg, acts) if capture else None
    return frames, stack


def circular_mean_azimuth(probs: np.ndarray, centers: np.ndarray) -> float:
    """Probability-weighted circular mean of bin-center azimuths."""
    s = float(np.dot(probs, np.sin(centers)))
    c = float(np.dot(probs, np.cos(centers)))
    return math.atan2(s, c)


def _decode_one(az_probs: np.ndarray, el_probs: Optional[np.ndarray], grid: BinGrid) -> SourceLocation:
    az = circular_mean_azimuth(az_probs, grid.azimuth_centers())
    el = float(np.dot(el_probs, grid.elevation_centers())) if el_probs is not None else 0.0
    return SourceLocation(az, el)


def decode_doa(
    frames: Sequence[PredictionFrame], grid: BinGrid, variant: str
) -> SourceLocation | list[SourceLocation]:
    """Decode bin probabilities to locations.

    The moving variant decodes every frame; the static variant averages
    log-probabilities over frames (equivalent to averaging logits, by
    softmax shift invariance), renormalizes once, then decodes.
    """
    if len(frames) == 0:
        raise ValueError("no frames to decode")
    if variant == "moving":
        return [_decode_one(f.azimuth_probs, f.elevation_probs, grid) for f in frames]
    if variant != "static":
        raise ValueError(f"variant must be one of {VARIANTS}")
    az_probs = _mean_logit_probs(np.stack([f.azimuth_probs for f in frames]))
    el_probs = None
    if frames[0].elevation_probs is not None:
        el_probs = _mean_logit_probs(np.stack([f.elevation_probs for f in frames]))
    return _decode_one(az_probs, el_probs, grid)


def _mean_logit_probs(probs: np.ndarray) -> np.ndarray:
    logit_mean = np.mean(np.log(np.maximum(probs, 1e-300)), axis=0)
    logit_mean -= logit_mean.max()
    p = np.exp(logit_mean)
    return p / p.sum()


def decode_azimuth_torch(az_logits: torch.Tensor, centers: torch.Tensor) -> torch.Tensor:
    """Differentiable circular decode of (..., K) azimuth logits to angles."""
    p = torch.softmax(az_logits, dim=-1)
    s = p @ torch.sin(centers)
    c = p @ torch.cos(centers)
    return torch.atan2(s, c)


def decode_elevation_torch(el_logits: torch.Tensor, centers: torch.Tensor) -> torch.Tensor:
    p = torch.softmax(el_logits, dim=-1)
    return p @ centers
