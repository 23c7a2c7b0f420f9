"""STFT feature tensors: log-magnitude and phase of both ears.

A signal of N samples yields T = floor((N - dft_size) / hop) + 1 frames,
no padding.  Channel layout is (logmag L, logmag R, phase L, phase R) so
convolution kernels are shared across ears.  Magnitude uses log(1 + |X|),
which stays finite at silence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signal import BinauralSignal

DFT_SIZE = 512
HOP = 256


@dataclass(frozen=True)
class FeatureTensor:
    """T x F x 4 input representation, F = dft_size/2 + 1."""

    data: np.ndarray
    dft_size: int = DFT_SIZE
    hop: int = HOP
    sample_rate: int = 16000

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3 or data.shape[2] != 4:
            raise ValueError(f"expected (T, F, 4), got {data.shape}")
        if data.shape[1] != self.dft_size // 2 + 1:
            raise ValueError("frequency axis inconsistent with dft_size")
        object.__setattr__(self, "data", data)

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    @property
    def n_bins(self) -> int:
        return self.data.shape[1]

    def frame_times(self) -> np.ndarray:
        """Window-center time of each frame, in seconds."""
        idx = np.arange(self.n_frames)
        return (idx * self.hop + self.dft_size / 2.0) / self.sample_rate


def frame_count(n_samples: int, dft_size: int = DFT_SIZE, hop: int = HOP) -> int:
    """Closed-form frame count for an unpadded STFT."""
    if n_samples < dft_size:
        return 0
    return (n_samples - dft_size) // hop + 1


def hann_window(n: int) -> np.ndarray:
    # periodic Hann, matching the torch twin in model.py
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def stft(x: np.ndarray, dft_size: int = DFT_SIZE, hop: int = HOP) -> np.ndarray:
    """Complex STFT of a 1-D signal, shape (T, dft_size/2 + 1)."""
    n = x.shape[-1]
    t = frame_count(n, dft_size, hop)
    if t < 1:
        raise ValueError("signal too short for one analysis window")
    idx = np.arange(t)[:, None] * hop + np.arange(dft_size)[None, :]
    frames = x[idx] * hann_window(dft_size)
    return np.fft.rfft(frames, axis=-1)


def extract_features(
    x: BinauralSignal, dft_size: int = DFT_SIZE, hop: int = HOP
) -> FeatureTensor:
    """Extract the T x F x 4 feature tensor from a binaural signal.

    Raises ValueError("signal too short") if the signal does not cover a
    single analysis window.  Phase of an exactly-zero bin is 0 by
    convention (numpy's angle already does this).
    """
    if dft_size <= 0 or (dft_size & (dft_size - 1)) != 0:
        raise ValueError("dft_size must be a power of two")
    if not (0 < hop <= dft_size):
        raise ValueError("hop must lie in (0, dft_size]")
    if x.n_samples < dft_size:
        raise ValueError("signal too short")
    spec_l = stft(x.left, dft_size, hop)
    spec_r = stft(x.right, dft_size, hop)
    data = np.stack(
        [
            np.log1p(np.abs(spec_l)),
            np.log1p(np.abs(spec_r)),
            np.angle(spec_l),
            np.angle(spec_r),
        ],
        axis=-1,
    )
    return FeatureTensor(data, dft_size=dft_size, hop=hop, sample_rate=x.sample_rate)
