"""Classical interaural cues: ITD, ILD and IACC per analysis frame.

ITD comes from the peak of the normalized interaural cross-correlation
with parabolic interpolation around the discrete maximum; positive ITD
means the left ear leads.  ILD is the left/right power ratio in dB and
IACC the clamped correlation maximum.  Frames in which either channel
falls below a silence floor carry no usable cues and are skipped.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .signal import BinauralSignal

MAX_LAG_MS = 1.0
SILENCE_DBFS = -60.0
CUE_WEIGHTS = (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)
# one ITD span, a large ILD, the full IACC range
CUE_NORMALIZERS = (1e-3, 20.0, 1.0)


@dataclass(frozen=True)
class CueFrame:
    frame_index: int
    itd_sec: float
    ild_db: float
    iacc: float

    def __post_init__(self):
        if not 0.0 <= self.iacc <= 1.0:
            raise ValueError("iacc must lie in [0, 1]")


def _frames(x: np.ndarray, frame_size: int, hop: int) -> np.ndarray:
    n = 1 + (len(x) - frame_size) // hop
    idx = np.arange(frame_size)[None, :] + hop * np.arange(n)[:, None]
    return x[idx]


def _parabolic_offset(y0: float, y1: float, y2: float) -> float:
    denom = y0 - 2.0 * y1 + y2
    if abs(denom) < 1e-12:
        return 0.0
    return float(np.clip(0.5 * (y0 - y2) / denom, -0.5, 0.5))


def extract_cues(
    signal: BinauralSignal,
    frame_size: int = 512,
    hop: int = 256,
    max_lag_ms: float = MAX_LAG_MS,
    silence_dbfs: float = SILENCE_DBFS,
) -> List[CueFrame]:
    """Framewise cues; silent frames are omitted from the result."""
    if frame_size <= 0 or hop <= 0 or hop > frame_size:
        raise ValueError("need 0 < hop <= frame_size")
    if signal.n_samples < frame_size:
        raise ValueError("signal too short for one analysis frame")
    max_lag = int(round(max_lag_ms * 1e-3 * signal.sample_rate))
    if max_lag < 1 or max_lag >= frame_size:
        raise ValueError("max lag outside the usable range for this frame size")
    frames_l = _frames(signal.left, frame_size, hop)
    frames_r = _frames(signal.right, frame_size, hop)
    out: List[CueFrame] = []
    for i in range(frames_l.shape[0]):
        l, r = frames_l[i], frames_r[i]
        p_l = float(np.dot(l, l))
        p_r = float(np.dot(r, r))
        rms_l_db = 10.0 * np.log10(p_l / frame_size + 1e-30)
        rms_r_db = 10.0 * np.log10(p_r / frame_size + 1e-30)
        if rms_l_db < silence_dbfs or rms_r_db < silence_dbfs:
            continue
        # np.correlate(r, l)[tau + N - 1] = sum_n r[n + tau] * l[n]:
        # positive tau means the left channel leads
        corr = np.correlate(r, l, mode="full")
        center = frame_size - 1
        window = corr[center - max_lag : center + max_lag + 1]
        window = window / np.sqrt(p_l * p_r)
        k = int(np.argmax(window))
        iacc = float(np.clip(window[k], 0.0, 1.0))
        offset = 0.0
        if 0 < k < len(window) - 1:
            offset = _parabolic_offset(window[k - 1], window[k], window[k + 1])
        itd_sec = (k - max_lag + offset) / signal.sample_rate
        ild_db = 10.0 * np.log10(p_l / p_r)
        out.append(CueFrame(frame_index=i, itd_sec=itd_sec, ild_db=ild_db, iacc=iacc))
    return out


def median_cues(frames: Sequence[CueFrame]) -> Tuple[float, float, float]:
    """Median (itd_sec, ild_db, iacc) over the voiced frames."""
    if not frames:
        raise ValueError("no voiced frames to summarize")
    itd = float(np.median([f.itd_sec for f in frames]))
    ild = float(np.median([f.ild_db for f in frames]))
    iacc = float(np.median([f.iacc for f in frames]))
    return itd, ild, iacc


def cue_distance(
    x1: BinauralSignal,
    x2: BinauralSignal,
    weights: Tuple[float, float, float] = CUE_WEIGHTS,
    normalizers: Tuple[float, float, float] = CUE_NORMALIZERS,
    frame_size: int = 512,
    hop: int = 256,
) -> float:
    """Weighted absolute difference of per-signal median cues.

    Each cue difference is scaled by a fixed normalizer (1 ms, 20 dB,
    full IACC range) so the three terms are commensurate before the
    weights apply.
    """
    if any(w < 0 for w in weights):
        raise ValueError("weights must be non-negative")
    if any(s <= 0 for s in normalizers):
        raise ValueError("normalizers must be positive")
    m1 = median_cues(extract_cues(x1, frame_size=frame_size, hop=hop))
    m2 = median_cues(extract_cues(x2, frame_size=frame_size, hop=hop))
    return float(
        sum(w * abs(a - b) / s for w, s, a, b in zip(weights, normalizers, m1, m2))
    )
