"""JSONL manifests for BRIR inventories and training datasets.

Every validation error names the manifest and line it came from.
Relative paths resolve against the manifest's own directory first and
the DPLM_DATA_DIR environment variable second.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Set, Union

from .geometry import SourceLocation, Trajectory
from .render import Brir
from .signal import SAMPLE_RATE, load_wav

SPLITS = ("train", "test")


class ManifestError(ValueError):
    """Invalid manifest content, with file and line context in the message."""


def data_dir() -> Optional[Path]:
    """Optional data root from the DPLM_DATA_DIR environment variable."""
    raw = os.environ.get("DPLM_DATA_DIR")
    return Path(raw) if raw else None


def resolve_path(raw: str, base: Path, ctx: str) -> Path:
    p = Path(raw)
    if p.is_absolute():
        if p.is_file():
            return p
        raise ManifestError(f"{ctx}: file not found: {p}")
    tried = []
    for root in (base, data_dir()):
        if root is None:
            continue
        candidate = root / p
        if candidate.is_file():
            return candidate
        tried.append(str(candidate))
    raise ManifestError(f"{ctx}: file not found: {raw} (tried {', '.join(tried)})")


def _iter_jsonl(path: Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{lineno}: invalid JSON: {exc}") from None
            if not isinstance(obj, dict):
                raise ManifestError(f"{path}:{lineno}: expected a JSON object")
            yield lineno, obj


def _number(obj: dict, key: str, ctx: str, required: bool = True) -> Optional[float]:
    if key not in obj or obj[key] is None:
        if required:
            raise ManifestError(f"{ctx}: missing field {key!r}")
        return None
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ManifestError(f"{ctx}: field {key!r} must be a number, got {v!r}")
    return float(v)


def _string(obj: dict, key: str, ctx: str, required: bool = True) -> Optional[str]:
    if key not in obj or obj[key] is None:
        if required:
            raise ManifestError(f"{ctx}: missing field {key!r}")
        return None
    v = obj[key]
    if not isinstance(v, str) or not v:
        raise ManifestError(f"{ctx}: field {key!r} must be a nonempty string")
    return v


# --- BRIR manifests ----------------------------------------------------------


@dataclass(frozen=True)
class BrirRecord:
    """One measured response.  The manifest `path` doubles as the brir_id."""

    path: str
    resolved_path: Path
    azimuth_deg: float
    elevation_deg: float
    room_id: str
    dataset_id: str

    @property
    def brir_id(self) -> str:
        return self.path


def load_brir_manifest(path: Union[str, Path]) -> List[BrirRecord]:
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"no manifest at {path}")
    base = path.parent
    records = []
    seen: Set[str] = set()
    for lineno, obj in _iter_jsonl(path):
        ctx = f"{path}:{lineno}"
        raw = _string(obj, "path", ctx)
        if raw in seen:
            raise ManifestError(f"{ctx}: duplicate path {raw!r}")
        seen.add(raw)
        az = _number(obj, "azimuth_deg", ctx)
        el = _number(obj, "elevation_deg", ctx)
        if not -180.0 <= az <= 180.0:
            raise ManifestError(f"{ctx}: azimuth_deg {az} outside [-180, 180]")
        if not -90.0 <= el <= 90.0:
            raise ManifestError(f"{ctx}: elevation_deg {el} outside [-90, 90]")
        records.append(
            BrirRecord(
                path=raw,
                resolved_path=resolve_path(raw, base, ctx),
                azimuth_deg=az,
                elevation_deg=el,
                room_id=_string(obj, "room_id", ctx),
                dataset_id=_string(obj, "dataset_id", ctx),
            )
        )
    if not records:
        raise ManifestError(f"{path}: manifest is empty")
    return records


def load_brirs(
    records: Sequence[BrirRecord], sample_rate: int = SAMPLE_RATE
) -> Dict[str, Brir]:
    """Load the impulse responses behind a BRIR manifest, keyed by brir_id."""
    out = {}
    for rec in records:
        samples = load_wav(rec.resolved_path, target_rate=sample_rate)
        if samples.shape[0] != 2:
            raise ManifestError(
                f"{rec.resolved_path}: BRIR must have 2 channels, got {samples.shape[0]}"
            )
        out[rec.brir_id] = Brir(
            impulse_responses=samples,
            source_location=SourceLocation.from_degrees(
                rec.azimuth_deg, rec.elevation_deg
            ),
            room_id=rec.room_id,
            sample_rate=sample_rate,
        )
    return out


# --- dataset manifests --------------------------------------------------------


@dataclass(frozen=True)
class DatasetRecord:
    source_wav: str
    resolved_source: Path
    split: str
    brir_id: Optional[str] = None
    trajectory: Optional[Trajectory] = None
    noise_wav: Optional[str] = None
    resolved_noise: Optional[Path] = None
    snr_db: Optional[float] = None


def parse_trajectory(obj, ctx: str) -> Trajectory:
    if not isinstance(obj, dict):
        raise ManifestError(f"{ctx}: trajectory must be an object")
    duration = _number(obj, "duration_sec", ctx)
    keyframes = obj.get("keyframes")
    if not isinstance(keyframes, list) or not keyframes:
        raise ManifestError(f"{ctx}: trajectory.keyframes must be a nonempty array")
    points = []
    for i, kf in enumerate(keyframes):
        kctx = f"{ctx}: keyframes[{i}]"
        if not isinstance(kf, dict):
            raise ManifestError(f"{kctx}: expected an object")
        t = _number(kf, "time_sec", kctx)
        az = _number(kf, "azimuth_deg", kctx)
        el = _number(kf, "elevation_deg", kctx, required=False)
        el = el if el is not None else 0.0
        # from_degrees wraps and clamps, which would hide manifest typos
        if not -180.0 <= az <= 180.0:
            raise ManifestError(f"{kctx}: azimuth_deg {az} outside [-180, 180]")
        if not -90.0 <= el <= 90.0:
            raise ManifestError(f"{kctx}: elevation_deg {el} outside [-90, 90]")
        loc = SourceLocation.from_degrees(az, el)
        points.append((t, loc))
    try:
        return Trajectory(locations=tuple(points), duration_sec=duration)
    except ValueError as exc:
        raise ManifestError(f"{ctx}: {exc}") from None


def load_dataset_manifest(
    path: Union[str, Path], brir_ids: Optional[Set[str]] = None
) -> List[DatasetRecord]:
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"no manifest at {path}")
    base = path.parent
    records = []
    for lineno, obj in _iter_jsonl(path):
        ctx = f"{path}:{lineno}"
        source_raw = _string(obj, "source_wav", ctx)
        split = _string(obj, "split", ctx)
        if split not in SPLITS:
            raise ManifestError(f"{ctx}: split must be one of {SPLITS}, got {split!r}")
        brir_id = _string(obj, "brir_id", ctx, required=False)
        traj_obj = obj.get("trajectory")
        if (brir_id is None) == (traj_obj is None):
            raise ManifestError(f"{ctx}: need exactly one of brir_id and trajectory")
        if brir_id is not None and brir_ids is not None and brir_id not in brir_ids:
            raise ManifestError(f"{ctx}: unknown brir_id {brir_id!r}")
        trajectory = parse_trajectory(traj_obj, ctx) if traj_obj is not None else None
        noise_raw = _string(obj, "noise_wav", ctx, required=False)
        snr_db = _number(obj, "snr_db", ctx, required=False)
        records.append(
            DatasetRecord(
                source_wav=source_raw,
                resolved_source=resolve_path(source_raw, base, ctx),
                split=split,
                brir_id=brir_id,
                trajectory=trajectory,
                noise_wav=noise_raw,
                resolved_noise=(
                    resolve_path(noise_raw, base, ctx) if noise_raw is not None else None
                ),
                snr_db=snr_db,
            )
        )
    if not records:
        raise ManifestError(f"{path}: manifest is empty")
    return records


def write_jsonl(path: Union[str, Path], rows: Sequence[dict]) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    return path
