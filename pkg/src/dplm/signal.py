"""Two-channel signal container and WAV ingestion.

Everything in the pipeline canonicalizes to 16 kHz; WAV files at other
rates are resampled on load.  16-bit, 32-bit integer and float PCM are
accepted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

SAMPLE_RATE = 16000


@dataclass(frozen=True)
class BinauralSignal:
    """Left/right pressure signals as a (2, N) float array in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 2 or samples.shape[0] != 2:
            raise ValueError(f"expected a (2, N) array, got shape {samples.shape}")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "samples", samples)

    @property
    def left(self) -> np.ndarray:
        return self.samples[0]

    @property
    def right(self) -> np.ndarray:
        return self.samples[1]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_sec(self) -> float:
        return self.n_samples / self.sample_rate

    @classmethod
    def from_mono(cls, mono: np.ndarray, sample_rate: int = SAMPLE_RATE) -> "BinauralSignal":
        """Duplicate a mono signal into both ears (diotic presentation)."""
        mono = np.asarray(mono, dtype=np.float64)
        if mono.ndim != 1:
            raise ValueError("mono signal must be 1-D")
        return cls(np.vstack([mono, mono]), sample_rate)

    def swapped(self) -> "BinauralSignal":
        """Mirror the signal by exchanging the two ears."""
        return BinauralSignal(self.samples[::-1].copy(), self.sample_rate)


def _to_float(data: np.ndarray) -> np.ndarray:
    if data.dtype == np.int16:
        return data.astype(np.float64) / 32768.0
    if data.dtype == np.int32:
        return data.astype(np.float64) / 2147483648.0
    if data.dtype == np.uint8:
        return (data.astype(np.float64) - 128.0) / 128.0
    if data.dtype in (np.float32, np.float64):
        return data.astype(np.float64)
    raise ValueError(f"unsupported WAV sample format {data.dtype}")


def resample(x: np.ndarray, rate_in: int, rate_out: int) -> np.ndarray:
    """Polyphase resampling along the last axis."""
    if rate_in == rate_out:
        return x
    g = math.gcd(rate_in, rate_out)
    return resample_poly(x, rate_out // g, rate_in // g, axis=-1)


def load_wav(path: str | Path, target_rate: int = SAMPLE_RATE) -> np.ndarray:
    """Read a WAV file as a (channels, N) float array at *target_rate*."""
    rate, data = wavfile.read(str(path))
    data = _to_float(np.atleast_2d(data.T if data.ndim == 2 else data))
    data = resample(data, rate, target_rate)
    return np.clip(data, -1.0, 1.0)


def load_mono(path: str | Path, target_rate: int = SAMPLE_RATE) -> np.ndarray:
    """Read a single-channel WAV (sources, noise beds)."""
    data = load_wav(path, target_rate)
    if data.shape[0] != 1:
        raise ValueError(f"{path}: expected mono, got {data.shape[0]} channels")
    return data[0]


def load_binaural(path: str | Path, target_rate: int = SAMPLE_RATE) -> BinauralSignal:
    """Read a two-channel WAV (binaural recordings, BRIRs)."""
    data = load_wav(path, target_rate)
    if data.shape[0] != 2:
        raise ValueError(f"{path}: expected 2 channels, got {data.shape[0]}")
    return BinauralSignal(data, target_rate)


def save_wav(path: str | Path, samples: np.ndarray, sample_rate: int = SAMPLE_RATE) -> None:
    """Write mono (N,) or multichannel (C, N) float samples as float32 PCM."""
    samples = np.asarray(samples, dtype=np.float32)
    if samples.ndim == 2:
        samples = samples.T
    wavfile.write(str(path), sample_rate, samples)
