"""Manifest-driven training.

The loop is deterministic end to end: dataset synthesis draws every
random quantity (excerpt offsets, noise placement, SNRs) from seed
sequences spawned off the training seed in manifest order, weight
initialization is seeded in `build_model`, and epoch shuffles come from
their own generator.  Two runs with the same seed, manifest and config
therefore produce byte-identical metrics logs and checkpoints.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch

from .checkpoint import save_checkpoint
from .evaluate import rmse_folded_azimuth
from .features import extract_features
from .geometry import (
    SourceLocation,
    Trajectory,
    azimuth_to_bin,
    elevation_to_bin,
    sample_trajectory,
)
from .losses import combined_loss_torch
from .manifest import DatasetRecord
from .model import (
    DoaNet,
    decode_azimuth_torch,
    feature_tensor_to_torch,
)
from .render import (
    Brir,
    mix_noise,
    render_trajectory,
    spatialize_brir,
    spatialize_parametric,
)
from .signal import SAMPLE_RATE, BinauralSignal, load_mono
from .util import canonical_hash, file_sha256

METRICS_COLUMNS = ("epoch", "train_loss", "val_loss", "val_rmse_deg")


class TrainingDivergedError(RuntimeError):
    """Training hit a non-finite loss."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 32
    alpha: float = 0.25
    epochs: int = 100
    patience: int = 10
    excerpt_sec: float = 3.0
    train_fraction: float = 0.8
    snr_range_db: Tuple[float, float] = (0.0, 30.0)
    grad_clip: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 1:
            raise ValueError("learning_rate, batch_size and epochs must be positive")
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError("alpha must lie in [0, 1)")
        if self.excerpt_sec <= 0:
            raise ValueError("excerpt_sec must be positive")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")
        lo, hi = self.snr_range_db
        if hi < lo:
            raise ValueError("snr_range_db must be (low, high)")
        if self.patience < 1 or self.grad_clip <= 0:
            raise ValueError("patience and grad_clip must be positive")
        object.__setattr__(self, "snr_range_db", (float(lo), float(hi)))

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "alpha": self.alpha,
            "epochs": self.epochs,
            "patience": self.patience,
            "excerpt_sec": self.excerpt_sec,
            "train_fraction": self.train_fraction,
            "snr_range_db": list(self.snr_range_db),
            "grad_clip": self.grad_clip,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "snr_range_db" in d:
            d["snr_range_db"] = tuple(d["snr_range_db"])
        return cls(**d)


@dataclass
class DatasetItem:
    features: torch.Tensor  # (4, T, F) float32
    truth_az: np.ndarray  # scalar () for static labels, (T,) for moving
    az_bins: np.ndarray
    truth_el: np.ndarray
    el_bins: np.ndarray
    split: str


def _is_static_record(rec: DatasetRecord) -> bool:
    if rec.brir_id is not None:
        return True
    locs = [loc for _, loc in rec.trajectory.locations]
    return all(
        abs(l.azimuth - locs[0].azimuth) < 1e-12
        and abs(l.elevation - locs[0].elevation) < 1e-12
        for l in locs
    )


def _fit_length(x: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    if len(x) < n:
        x = np.tile(x, int(np.ceil(n / len(x))))
    if len(x) == n:
        return x
    start = int(rng.integers(0, len(x) - n + 1))
    return x[start : start + n]


def synthesize_record(
    rec: DatasetRecord,
    cfg: TrainConfig,
    rng: np.random.Generator,
    brirs: Optional[Dict[str, Brir]] = None,
    sample_rate: int = SAMPLE_RATE,
) -> Tuple[BinauralSignal, Union[SourceLocation, Trajectory]]:
    """Render one manifest record to a binaural signal plus its label.

    Returns the signal and either a SourceLocation (static record) or the
    record's trajectory.  Noise, when present, is spatialized at a seeded
    random azimuth and mixed at the record SNR (drawn from the configured
    range when the record leaves it null).
    """
    src = load_mono(rec.resolved_source, target_rate=sample_rate)
    n_target = int(round(cfg.excerpt_sec * sample_rate))
    src = _fit_length(src, n_target, rng)
    if rec.brir_id is not None:
        if brirs is None or rec.brir_id not in brirs:
            raise ValueError(f"record needs BRIR {rec.brir_id!r} but it was not loaded")
        brir = brirs[rec.brir_id]
        sig = spatialize_brir(src, brir, sample_rate=sample_rate)
        label = brir.source_location
    else:
        locs = rec.trajectory.locations
        if len(locs) == 1 or _is_static_record(rec):
            sig = spatialize_parametric(src, locs[0][1], sample_rate=sample_rate)
            label = locs[0][1]
        else:
            sig = render_trajectory(src, rec.trajectory, sample_rate=sample_rate)
            label = rec.trajectory
    if rec.resolved_noise is not None:
        noise = load_mono(rec.resolved_noise, target_rate=sample_rate)
        noise = _fit_length(noise, n_target, rng)
        noise_az = rng.uniform(-np.pi, np.pi)
        noise_sig = spatialize_parametric(
            noise, SourceLocation.wrapped(noise_az), sample_rate=sample_rate
        )
        snr = rec.snr_db if rec.snr_db is not None else float(rng.uniform(*cfg.snr_range_db))
        sig = mix_noise(sig, noise_sig, snr)
    return sig, label


def build_dataset(
    records: Sequence[DatasetRecord],
    model: DoaNet,
    cfg: TrainConfig,
    brirs: Optional[Dict[str, Brir]] = None,
    sample_rate: int = SAMPLE_RATE,
) -> Tuple[List[DatasetItem], List[DatasetItem]]:
    """Synthesize and featurize every record; returns (train, val) items."""
    mcfg = model.cfg
    grid = mcfg.grid
    seeds = np.random.SeedSequence(cfg.seed).spawn(len(records))
    train_items, val_items = [], []
    for rec, seed in zip(records, seeds):
        if mcfg.variant == "static" and not _is_static_record(rec):
            raise ValueError(
                "static variant cannot train on a moving record; give it a "
                "brir_id or a constant trajectory"
            )
        rng = np.random.default_rng(seed)
        sig, label = synthesize_record(rec, cfg, rng, brirs=brirs, sample_rate=sample_rate)
        feat = extract_features(sig, dft_size=mcfg.dft_size, hop=mcfg.hop)
        tensor = feature_tensor_to_torch(feat)[0]
        if isinstance(label, SourceLocation):
            if mcfg.variant == "static":
                truth_az = np.float64(label.azimuth)
                truth_el = np.float64(label.elevation)
                az_bins = np.int64(azimuth_to_bin(label.azimuth, grid))
                el_bins = np.int64(elevation_to_bin(label.elevation, grid))
            else:
                t = feat.data.shape[0]
                truth_az = np.full(t, label.azimuth)
                truth_el = np.full(t, label.elevation)
                az_bins = np.full(t, azimuth_to_bin(label.azimuth, grid), dtype=np.int64)
                el_bins = np.full(t, elevation_to_bin(label.elevation, grid), dtype=np.int64)
        else:
            times = np.clip(feat.frame_times(), 0.0, label.duration_sec)
            locs = [sample_trajectory(label, t) for t in times]
            truth_az = np.array([l.azimuth for l in locs])
            truth_el = np.array([l.elevation for l in locs])
            az_bins = np.array([azimuth_to_bin(l.azimuth, grid) for l in locs], dtype=np.int64)
            el_bins = np.array([elevation_to_bin(l.elevation, grid) for l in locs], dtype=np.int64)
        item = DatasetItem(
            features=tensor,
            truth_az=truth_az,
            az_bins=az_bins,
            truth_el=truth_el,
            el_bins=el_bins,
            split=rec.split,
        )
        (train_items if rec.split == "train" else val_items).append(item)
    return train_items, val_items


def _collate(items: Sequence[DatasetItem], dtype: torch.dtype):
    feats = torch.stack([it.features for it in items]).to(dtype)
    truth_az = torch.as_tensor(np.stack([it.truth_az for it in items]), dtype=dtype)
    az_bins = torch.as_tensor(np.stack([it.az_bins for it in items]))
    truth_el = torch.as_tensor(np.stack([it.truth_el for it in items]), dtype=dtype)
    el_bins = torch.as_tensor(np.stack([it.el_bins for it in items]))
    return feats, truth_az, az_bins, truth_el, el_bins


def _batch_loss(model: DoaNet, batch, cfg: TrainConfig) -> torch.Tensor:
    feats, truth_az, az_bins, truth_el, el_bins = batch
    az_logits, el_logits, _ = model(feats)
    dual = model.cfg.heads == "azimuth_and_elevation"
    return combined_loss_torch(
        az_logits,
        truth_az,
        az_bins,
        model.cfg.grid,
        cfg.alpha,
        model.cfg.variant,
        el_logits=el_logits if dual else None,
        truth_el=truth_el if dual else None,
        el_bins=el_bins if dual else None,
    )


def _validate(
    model: DoaNet, items: Sequence[DatasetItem], cfg: TrainConfig
) -> Tuple[float, float]:
    """Mean loss and folded-azimuth RMSE (degrees) over a split."""
    dtype = next(model.parameters()).dtype
    model.eval()
    centers = torch.as_tensor(model.cfg.grid.azimuth_centers(), dtype=dtype)
    losses, preds, truths = [], [], []
    with torch.no_grad():
        for lo in range(0, len(items), cfg.batch_size):
            chunk = items[lo : lo + cfg.batch_size]
            batch = _collate(chunk, dtype)
            losses.append(float(_batch_loss(model, batch, cfg)) * len(chunk))
            az_logits, _, _ = model(batch[0])
            if model.cfg.variant == "static":
                az_logits = az_logits.mean(dim=1)
            dec = decode_azimuth_torch(az_logits, centers)
            preds.append(dec.reshape(-1).numpy())
            truths.append(batch[1].reshape(-1).numpy())
    loss = sum(losses) / len(items)
    rmse = rmse_folded_azimuth(np.concatenate(preds), np.concatenate(truths))
    return loss, rmse


@dataclass
class TrainResult:
    checkpoint_path: Path
    metrics_path: Path
    history: List[dict] = field(default_factory=list)
    best_epoch: int = 0
    best_val_loss: float = float("inf")


def write_metrics_csv(
    path: Union[str, Path], history: Sequence[dict], config_hash: str, seed: int
) -> Path:
    path = Path(path)
    lines = [f"# config_hash={config_hash} seed={seed}", ",".join(METRICS_COLUMNS)]
    for row in history:
        lines.append(
            "%d,%.6f,%.6f,%.6f"
            % (row["epoch"], row["train_loss"], row["val_loss"], row["val_rmse_deg"])
        )
    path.write_text("\n".join(lines) + "\n")
    return path


def train(
    model: DoaNet,
    records: Sequence[DatasetRecord],
    cfg: TrainConfig,
    out_dir: Union[str, Path],
    brirs: Optional[Dict[str, Brir]] = None,
    manifest_path: Optional[Union[str, Path]] = None,
    sample_rate: int = SAMPLE_RATE,
    quiet: bool = False,
) -> TrainResult:
    """Train on a validated manifest; returns paths to the best checkpoint
    and the per-epoch metrics log."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(cfg.seed)
    train_items, val_items = build_dataset(
        records, model, cfg, brirs=brirs, sample_rate=sample_rate
    )
    if not train_items or not val_items:
        raise ValueError(
            f"need both splits: {len(train_items)} train / {len(val_items)} val items"
        )
    dtype = next(model.parameters()).dtype
    shuffle_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))
    opt = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
    cfg_hash = canonical_hash({"model": model.cfg.to_dict(), "train": cfg.to_dict()})
    manifest_hash = file_sha256(manifest_path) if manifest_path else None
    ckpt_path = out_dir / "best.ckpt"
    metrics_path = out_dir / "metrics.csv"
    result = TrainResult(checkpoint_path=ckpt_path, metrics_path=metrics_path)
    since_best = 0
    for epoch in range(1, cfg.epochs + 1):
        model.train()
        perm = shuffle_rng.permutation(len(train_items))
        total = 0.0
        for lo in range(0, len(perm), cfg.batch_size):
            chunk = [train_items[i] for i in perm[lo : lo + cfg.batch_size]]
            batch = _collate(chunk, dtype)
            loss = _batch_loss(model, batch, cfg)
            if not torch.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch {lo // cfg.batch_size}"
                )
            opt.zero_grad()
            loss.backward()
            grad_norm = torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
            # a bad step would poison every parameter through the clip scaling
            if not torch.isfinite(grad_norm):
                raise TrainingDivergedError(
                    f"non-finite gradients at epoch {epoch}, batch {lo // cfg.batch_size}"
                )
            opt.step()
            total += float(loss.detach()) * len(chunk)
        train_loss = total / len(train_items)
        val_loss, val_rmse = _validate(model, val_items, cfg)
        row = {
            "epoch": epoch,
            "train_loss": train_loss,
            "val_loss": val_loss,
            "val_rmse_deg": val_rmse,
        }
        result.history.append(row)
        if not quiet:
            # progress is diagnostics; stdout stays reserved for results
            print(
                "epoch %3d  train %.4f  val %.4f  rmse %.2f deg"
                % (epoch, train_loss, val_loss, val_rmse),
                file=sys.stderr,
            )
        if val_loss < result.best_val_loss:
            result.best_val_loss = val_loss
            result.best_epoch = epoch
            since_best = 0
            save_checkpoint(
                ckpt_path,
                model,
                metadata={
                    "seed": cfg.seed,
                    "epoch": epoch,
                    "val_loss": val_loss,
                    "val_rmse_deg": val_rmse,
                    "config_hash": cfg_hash,
                    "manifest_sha256": manifest_hash,
                    "train_config": cfg.to_dict(),
                },
            )
        else:
            since_best += 1
            if since_best >= cfg.patience:
                break
    write_metrics_csv(metrics_path, result.history, cfg_hash, cfg.seed)
    model.eval()
    return result


def evaluate_on_manifest(
    model: DoaNet,
    records: Sequence[DatasetRecord],
    cfg: TrainConfig,
    brirs: Optional[Dict[str, Brir]] = None,
    split: str = "test",
    sample_rate: int = SAMPLE_RATE,
) -> dict:
    """Loss and folded RMSE of a trained model on one manifest split."""
    subset = [r for r in records if r.split == split]
    if not subset:
        raise ValueError(f"manifest has no {split!r} records")
    train_items, val_items = build_dataset(
        subset, model, cfg, brirs=brirs, sample_rate=sample_rate
    )
    items = train_items + val_items
    loss, rmse = _validate(model, items, cfg)
    return {"split": split, "n_items": len(items), "loss": loss, "rmse_deg": rmse}
