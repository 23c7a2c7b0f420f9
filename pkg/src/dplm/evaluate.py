"""Evaluation: folded-azimuth error, rank correlation, angular sweeps,
framewise trajectory comparison and listening-test correlation."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import rankdata

from .features import extract_features
from .geometry import (
    SourceLocation,
    Trajectory,
    angular_separation_deg,
    fold_front_back,
    sample_trajectory,
)
from .model import DoaNet, decode_doa, forward
from .render import spatialize_parametric
from .signal import BinauralSignal

RATINGS_COLUMNS = ("condition_id", "reference_wav", "test_wav", "rating", "study_id")


def rmse_folded_azimuth(pred_az: np.ndarray, true_az: np.ndarray) -> float:
    """RMSE in degrees after front/back folding of both arguments.

    Folding maps each azimuth onto the front hemisphere, so a front/back
    confusion (which binaural cues cannot resolve) does not count as a
    half-turn error.
    """
    pred_az = np.asarray(pred_az, dtype=np.float64)
    true_az = np.asarray(true_az, dtype=np.float64)
    if pred_az.shape != true_az.shape or pred_az.size == 0:
        raise ValueError("prediction and truth must be nonempty and equally shaped")
    diff = fold_front_back(pred_az) - fold_front_back(true_az)
    return float(np.degrees(np.sqrt(np.mean(diff**2))))


def spearman(a: np.ndarray, b: np.ndarray) -> float:
    """Spearman rank correlation: Pearson correlation of average ranks."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise ValueError("need two equally sized vectors of at least 2 entries")
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        raise ValueError("rank correlation is undefined for a constant vector")
    ra = rankdata(a, method="average")
    rb = rankdata(b, method="average")
    return float(np.corrcoef(ra, rb)[0, 1])


@dataclass(frozen=True)
class SweepPoint:
    offset_deg: float
    separation_deg: float
    distance: float


def angular_sweep(
    source: np.ndarray,
    reference: SourceLocation,
    offsets_deg: Sequence[float],
    sample_rate: int,
    distance_fn: Callable[[BinauralSignal, BinauralSignal], float],
) -> List[SweepPoint]:
    """Distance between a reference rendering and azimuth-offset probes.

    The same mono source is rendered at the reference location and at
    reference + offset for each offset; `distance_fn` scores each probe
    against the reference.
    """
    if len(offsets_deg) == 0:
        raise ValueError("need at least one offset")
    ref_sig = spatialize_parametric(source, reference, sample_rate=sample_rate)
    points = []
    for off in offsets_deg:
        probe_loc = SourceLocation.wrapped(reference.azimuth + np.radians(off))
        probe = spatialize_parametric(source, probe_loc, sample_rate=sample_rate)
        points.append(
            SweepPoint(
                offset_deg=float(off),
                separation_deg=angular_separation_deg(reference, probe_loc),
                distance=float(distance_fn(ref_sig, probe)),
            )
        )
    return points


def sweep_spearman(points: Sequence[SweepPoint]) -> float:
    """Spearman correlation of distance against angular separation.

    Points sharing a separation (two-sided offsets, repeated probes) are
    averaged first, so the correlation is over the mean distance at each
    distinct separation; zero-separation anchors are excluded.
    """
    groups: dict = {}
    for p in points:
        if p.separation_deg <= 1e-9:
            continue
        groups.setdefault(round(p.separation_deg, 6), []).append(p.distance)
    if len(groups) < 2:
        raise ValueError("need at least two distinct nonzero separations")
    seps = np.array(sorted(groups))
    means = np.array([np.mean(groups[s]) for s in sorted(groups)])
    return spearman(means, seps)


# --- framewise trajectory comparison ---------------------------------------


@dataclass
class FramewiseReport:
    frame_times: np.ndarray
    truth_az: np.ndarray
    moving_pred_az: Optional[np.ndarray]
    static_pred_az: Optional[np.ndarray]
    interval_pred_az: Optional[np.ndarray]
    rmse_moving: Optional[float]
    rmse_static: Optional[float]
    rmse_static_within_intervals: Optional[float]
    rmse_interval_static: Optional[float]
    intervals: List[Tuple[float, float, SourceLocation]]


def constant_intervals(
    trajectory: Trajectory, tol: float = 1e-9
) -> List[Tuple[float, float, SourceLocation]]:
    """Spans between consecutive keyframes that share one location."""
    out = []
    pts = trajectory.locations
    for (t0, a), (t1, b) in zip(pts[:-1], pts[1:]):
        if abs(a.azimuth - b.azimuth) <= tol and abs(a.elevation - b.elevation) <= tol:
            out.append((t0, t1, a))
    return out


def framewise_truth(trajectory: Trajectory, frame_times: np.ndarray) -> np.ndarray:
    """True azimuth at each frame center; times are clamped to the span."""
    times = np.clip(frame_times, 0.0, trajectory.duration_sec)
    return np.array([sample_trajectory(trajectory, t).azimuth for t in times])


def compare_on_trajectory(
    signal: BinauralSignal,
    trajectory: Trajectory,
    moving_model: Optional[DoaNet] = None,
    static_model: Optional[DoaNet] = None,
) -> FramewiseReport:
    """Framewise accuracy of moving and static decoding on one recording.

    The moving model is decoded per frame.  The static model yields one
    direction for the whole signal (broadcast over frames) and, where the
    trajectory holds still, one direction per constant interval.  All
    errors are folded-azimuth RMSE in degrees; the interval figures are
    restricted to frames inside constant intervals so they stay
    comparable with each other.
    """
    if moving_model is None and static_model is None:
        raise ValueError("need at least one model")
    some_model = moving_model if moving_model is not None else static_model
    cfg = some_model.cfg
    feat = extract_features(signal, dft_size=cfg.dft_size, hop=cfg.hop)
    times = feat.frame_times()
    truth = framewise_truth(trajectory, times)

    moving_pred = None
    rmse_moving = None
    if moving_model is not None:
        frames, _ = forward(moving_model, feat)
        decoded = decode_doa(frames, moving_model.cfg.grid, "moving")
        moving_pred = np.array([loc.azimuth for loc in decoded])
        rmse_moving = rmse_folded_azimuth(moving_pred, truth)

    static_pred = None
    interval_pred = None
    rmse_static = None
    rmse_static_within = None
    rmse_interval = None
    intervals = constant_intervals(trajectory)
    if static_model is not None:
        frames, _ = forward(static_model, feat)
        whole = decode_doa(frames, static_model.cfg.grid, "static")
        static_pred = np.full(len(times), whole.azimuth)
        rmse_static = rmse_folded_azimuth(static_pred, truth)
        if intervals:
            interval_pred = np.full(len(times), np.nan)
            for t0, t1, _loc in intervals:
                mask = (times >= t0) & (times <= t1)
                if not np.any(mask):
                    continue
                sub = [frames[i] for i in np.flatnonzero(mask)]
                loc = decode_doa(sub, static_model.cfg.grid, "static")
                interval_pred[mask] = loc.azimuth
            inside = ~np.isnan(interval_pred)
            if np.any(inside):
                rmse_interval = rmse_folded_azimuth(interval_pred[inside], truth[inside])
                rmse_static_within = rmse_folded_azimuth(
                    static_pred[inside], truth[inside]
                )
    return FramewiseReport(
        frame_times=times,
        truth_az=truth,
        moving_pred_az=moving_pred,
        static_pred_az=static_pred,
        interval_pred_az=interval_pred,
        rmse_moving=rmse_moving,
        rmse_static=rmse_static,
        rmse_static_within_intervals=rmse_static_within,
        rmse_interval_static=rmse_interval,
        intervals=intervals,
    )


# --- listening-test correlation ---------------------------------------------


@dataclass(frozen=True)
class RatingRecord:
    condition_id: str
    reference_wav: str
    test_wav: str
    rating: float
    study_id: str


def load_ratings_csv(path: Union[str, Path]) -> List[RatingRecord]:
    """Read rating rows; the header must match the documented columns."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty ratings file") from None
        if tuple(h.strip() for h in header) != RATINGS_COLUMNS:
            raise ValueError(
                f"{path}: header must be {','.join(RATINGS_COLUMNS)}, got {header}"
            )
        records = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(RATINGS_COLUMNS):
                raise ValueError(f"{path}:{lineno}: expected {len(RATINGS_COLUMNS)} columns")
            try:
                rating = float(row[3])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: rating {row[3]!r} is not a number") from None
            records.append(
                RatingRecord(
                    condition_id=row[0].strip(),
                    reference_wav=row[1].strip(),
                    test_wav=row[2].strip(),
                    rating=rating,
                    study_id=row[4].strip(),
                )
            )
    if not records:
        raise ValueError(f"{path}: no rating rows")
    return records


def correlate_ratings(
    records: Sequence[RatingRecord],
    distances: Mapping[str, float],
) -> Dict[str, Tuple[float, int]]:
    """Per-study Spearman correlation between distances and mean ratings.

    `distances` maps condition_id to a metric distance.  Ratings sharing
    a condition within a study are averaged before correlating, and every
    condition must have a distance.
    """
    by_study: Dict[str, Dict[str, List[float]]] = {}
    for rec in records:
        missing = rec.condition_id not in distances
        if missing:
            raise KeyError(f"no distance for condition {rec.condition_id!r}")
        by_study.setdefault(rec.study_id, {}).setdefault(rec.condition_id, []).append(
            rec.rating
        )
    out = {}
    for study, conditions in sorted(by_study.items()):
        ids = sorted(conditions)
        if len(ids) < 2:
            raise ValueError(f"study {study!r} has fewer than 2 conditions")
        mean_ratings = np.array([np.mean(conditions[c]) for c in ids])
        dist = np.array([distances[c] for c in ids])
        out[study] = (spearman(dist, mean_ratings), len(ids))
    return out
