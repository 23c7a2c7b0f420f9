"""Seeded test-signal synthesis and small self-contained datasets.

Everything here is driven by an explicit seed so that a manifest built
twice is identical on disk, wav content included.  The generated corpora
are deliberately small: broadband noise excerpts rendered with the
parametric head model, enough to exercise the full training and
evaluation paths on a single CPU.
"""

from __future__ import annotations

from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .geometry import wrap_azimuth
from .manifest import write_jsonl
from .signal import SAMPLE_RATE, save_wav

SOURCE_KINDS = ("pink", "am")


def pink_noise(
    n: int, rng: np.random.Generator, exponent: float = 1.0, peak: float = 0.5
) -> np.ndarray:
    """Spectrally tilted noise, 1/f^exponent in power, peak-normalized."""
    if n < 2:
        raise ValueError("need at least 2 samples")
    white = rng.standard_normal(n)
    spectrum = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(n)
    freqs[0] = freqs[1]
    spectrum *= freqs ** (-exponent / 2.0)
    x = np.fft.irfft(spectrum, n)
    return peak * x / np.max(np.abs(x))


def am_noise(
    n: int,
    rng: np.random.Generator,
    sample_rate: int = SAMPLE_RATE,
    peak: float = 0.5,
) -> np.ndarray:
    """White noise with slow raised-cosine amplitude modulation."""
    rate_hz = rng.uniform(2.0, 8.0)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    t = np.arange(n) / sample_rate
    envelope = 0.55 + 0.45 * np.cos(2.0 * np.pi * rate_hz * t + phase)
    x = rng.standard_normal(n) * envelope
    return peak * x / np.max(np.abs(x))


def make_source(
    n: int,
    rng: np.random.Generator,
    kind: Optional[str] = None,
    sample_rate: int = SAMPLE_RATE,
) -> np.ndarray:
    if kind is None:
        kind = SOURCE_KINDS[int(rng.integers(len(SOURCE_KINDS)))]
    if kind == "pink":
        return pink_noise(n, rng, exponent=rng.uniform(0.3, 1.2))
    if kind == "am":
        return am_noise(n, rng, sample_rate=sample_rate)
    raise ValueError(f"unknown source kind {kind!r}")


def _static_trajectory(azimuth_deg: float, duration_sec: float) -> dict:
    return {
        "duration_sec": duration_sec,
        "keyframes": [
            {"time_sec": 0.0, "azimuth_deg": float(azimuth_deg), "elevation_deg": 0.0}
        ],
    }


def piecewise_static_trajectory(
    azimuths_deg: Sequence[float],
    duration_sec: float,
    transition_sec: float = 0.05,
) -> dict:
    """A trajectory that dwells at each azimuth with short moves between."""
    k = len(azimuths_deg)
    if k < 2:
        raise ValueError("need at least two azimuths")
    span = (duration_sec - (k - 1) * transition_sec) / k
    if span <= 0:
        raise ValueError("duration too short for the requested intervals")
    keyframes = []
    t = 0.0
    for i, az in enumerate(azimuths_deg):
        keyframes.append({"time_sec": round(t, 6), "azimuth_deg": float(az), "elevation_deg": 0.0})
        t += span
        keyframes.append({"time_sec": round(t, 6), "azimuth_deg": float(az), "elevation_deg": 0.0})
        if i < k - 1:
            t += transition_sec
    keyframes[-1]["time_sec"] = duration_sec
    return {"duration_sec": duration_sec, "keyframes": keyframes}


def make_static_dataset(
    out_dir: Union[str, Path],
    azimuths_deg: Sequence[float],
    n_per_class: int = 4,
    duration_sec: float = 1.0,
    seed: int = 0,
    train_fraction: float = 0.75,
    snr_db: Optional[float] = None,
    with_noise: bool = False,
    sample_rate: int = SAMPLE_RATE,
) -> Path:
    """Write wav excerpts plus a manifest of static (one-keyframe) records."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if n_per_class < 2:
        raise ValueError("need at least 2 excerpts per class to fill both splits")
    for az in azimuths_deg:
        if not -180.0 <= az <= 180.0:
            raise ValueError(f"azimuth {az} outside [-180, 180]")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 91]))
    n = int(round(duration_sec * sample_rate))
    n_train = max(1, min(n_per_class - 1, int(round(train_fraction * n_per_class))))
    rows = []
    for ci, az in enumerate(azimuths_deg):
        for j in range(n_per_class):
            name = f"src_{ci:02d}_{j:02d}.wav"
            save_wav(out_dir / name, make_source(n, rng)[None, :], sample_rate)
            row = {
                "source_wav": name,
                "trajectory": _static_trajectory(az, duration_sec),
                "snr_db": snr_db,
                "split": "train" if j < n_train else "test",
            }
            if with_noise:
                noise_name = f"noise_{ci:02d}_{j:02d}.wav"
                save_wav(out_dir / noise_name, pink_noise(n, rng)[None, :], sample_rate)
                row["noise_wav"] = noise_name
            rows.append(row)
    return write_jsonl(out_dir / "manifest.jsonl", rows)


def make_moving_dataset(
    out_dir: Union[str, Path],
    n_items: int = 24,
    duration_sec: float = 1.0,
    seed: int = 0,
    train_fraction: float = 0.75,
    azimuth_span_deg: float = 180.0,
    arc_deg: Tuple[float, float] = (30.0, 120.0),
    snr_db: Optional[float] = None,
    with_noise: bool = False,
    sample_rate: int = SAMPLE_RATE,
) -> Path:
    """Write a manifest of two-keyframe sweeps.

    Start azimuths are uniform over the span; each sweep covers an arc
    drawn from `arc_deg` in a random direction, wrapped around the circle,
    so the set covers all azimuths with a controlled angular rate.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    # the span is a half-width: 180 already reaches every azimuth once
    if not 0.0 < azimuth_span_deg <= 180.0:
        raise ValueError(f"azimuth_span_deg {azimuth_span_deg} outside (0, 180]")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 17]))
    n = int(round(duration_sec * sample_rate))
    n_train = max(1, min(n_items - 1, int(round(train_fraction * n_items))))
    rows: List[dict] = []
    for i in range(n_items):
        name = f"mov_{i:03d}.wav"
        save_wav(out_dir / name, make_source(n, rng)[None, :], sample_rate)
        a0 = float(rng.uniform(-azimuth_span_deg, azimuth_span_deg))
        arc = float(rng.uniform(*arc_deg)) * (1 if rng.integers(2) else -1)
        a1 = float(np.degrees(wrap_azimuth(np.radians(a0 + arc))))
        row = {
            "source_wav": name,
            "trajectory": {
                "duration_sec": duration_sec,
                "keyframes": [
                    {"time_sec": 0.0, "azimuth_deg": a0, "elevation_deg": 0.0},
                    {"time_sec": duration_sec, "azimuth_deg": a1, "elevation_deg": 0.0},
                ],
            },
            "snr_db": snr_db,
            "split": "train" if i < n_train else "test",
        }
        if with_noise:
            noise_name = f"noise_{i:03d}.wav"
            save_wav(out_dir / noise_name, pink_noise(n, rng)[None, :], sample_rate)
            row["noise_wav"] = noise_name
        rows.append(row)
    return write_jsonl(out_dir / "manifest.jsonl", rows)
