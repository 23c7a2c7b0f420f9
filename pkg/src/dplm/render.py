"""Binaural spatialization: BRIR convolution, a parametric head model, and
noise mixing.

The parametric renderer is a self-contained desk-scale alternative to
measured BRIRs: the interaural delay follows the spherical-head formula
ITD = (a/c) * (theta + sin theta) applied over the full azimuth range, and
the far ear is shadowed by a first-order high-shelf cut.  Positive azimuth
(source to the left) makes the left ear lead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve, lfilter

from .geometry import SourceLocation, Trajectory, sample_trajectory
from .signal import SAMPLE_RATE, BinauralSignal

HEAD_RADIUS_M = 0.0875
SPEED_OF_SOUND = 343.0
SHADOW_DB = 10.0
SHELF_FC_HZ = 1500.0
DELAY_HALF_WIDTH = 16
DELAY_RESOLUTION = 1.0 / 32.0


@dataclass(frozen=True)
class Brir:
    """A measured two-ear impulse response with its source location."""

    impulse_responses: np.ndarray
    source_location: SourceLocation
    room_id: str = ""
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        irs = np.asarray(self.impulse_responses, dtype=np.float64)
        if irs.ndim != 2 or irs.shape[0] != 2 or irs.shape[1] < 1:
            raise ValueError(f"expected (2, M) impulse responses, got {irs.shape}")
        object.__setattr__(self, "impulse_responses", irs)


def spatialize_brir(src: np.ndarray, brir: Brir, sample_rate: int = SAMPLE_RATE) -> BinauralSignal:
    """Convolve a mono source with a BRIR, truncated to the source length.

    The output is rescaled to peak 0.99 only if it would clip.
    """
    if sample_rate != brir.sample_rate:
        raise ValueError(
            f"sample-rate mismatch: source {sample_rate} Hz vs BRIR {brir.sample_rate} Hz"
        )
    src = np.asarray(src, dtype=np.float64)
    n = src.shape[-1]
    out = np.stack([
        fftconvolve(src, brir.impulse_responses[0])[:n],
        fftconvolve(src, brir.impulse_responses[1])[:n],
    ])
    peak = np.max(np.abs(out))
    if peak > 1.0:
        out *= 0.99 / peak
    return BinauralSignal(out, sample_rate)


def woodworth_itd(
    azimuth: float, head_radius: float = HEAD_RADIUS_M, c: float = SPEED_OF_SOUND
) -> float:
    """Signed interaural delay in seconds; positive means the left ear leads."""
    theta = abs(azimuth)
    itd = (head_radius / c) * (theta + math.sin(theta))
    return math.copysign(itd, azimuth) if azimuth != 0.0 else 0.0


def fractional_delay(
    x: np.ndarray, delay_samples: float, half_width: int = DELAY_HALF_WIDTH
) -> np.ndarray:
    """Delay a signal by a non-negative, possibly fractional sample count.

    Windowed-sinc interpolation; the delay is quantized to DELAY_RESOLUTION
    (1/32 sample) first.  Output has the input's length.
    """
    if delay_samples < 0:
        raise ValueError("delay must be non-negative")
    delay_samples = round(delay_samples / DELAY_RESOLUTION) * DELAY_RESOLUTION
    d_int = int(math.floor(delay_samples))
    d_frac = delay_samples - d_int
    if d_frac == 0.0 and d_int == 0:
        return x.copy()
    n = np.arange(2 * half_width + 1)
    t = n - half_width - d_frac
    kernel = np.sinc(t)
    # continuous Blackman taper centred on the delay point
    w = 0.42 + 0.5 * np.cos(np.pi * t / (half_width + 1)) + 0.08 * np.cos(2 * np.pi * t / (half_width + 1))
    kernel *= np.where(np.abs(t) <= half_width + 1, w, 0.0)
    full = np.convolve(x, kernel)
    start = half_width - d_int
    out = np.zeros_like(x)
    if start >= 0:
        seg = full[start:start + x.shape[-1]]
        out[: seg.shape[-1]] = seg
    else:
        seg = full[: x.shape[-1] + start]
        out[-start:-start + seg.shape[-1]] = seg
    return out


def _shelf_gain_db(azimuth: float, shadow_db: float) -> float:
    # head shadow saturates at the interaural axis
    return -shadow_db * math.sin(min(abs(azimuth), math.pi / 2))


def _high_shelf(x: np.ndarray, gain_db: float, fc: float, sample_rate: int) -> np.ndarray:
    """First-order high shelf: unity at DC, `gain_db` toward Nyquist."""
    if gain_db == 0.0:
        return x
    g = 10.0 ** (gain_db / 20.0)
    a = math.exp(-2.0 * math.pi * fc / sample_rate)
    low = lfilter([1.0 - a], [1.0, -a], x)
    return g * x + (1.0 - g) * low


def spatialize_parametric(
    src: np.ndarray,
    loc: SourceLocation,
    head_radius: float = HEAD_RADIUS_M,
    c: float = SPEED_OF_SOUND,
    sample_rate: int = SAMPLE_RATE,
    shadow_db: float = SHADOW_DB,
    shelf_fc: float = SHELF_FC_HZ,
) -> BinauralSignal:
    """Render a mono source at a fixed location with the parametric head model.

    Azimuth 0 returns identical channels; mirrored azimuths swap channels
    exactly.  Elevation carries no cue in this model (azimuth-only renderer).
    """
    if head_radius <= 0:
        raise ValueError("head_radius must be positive")
    src = np.asarray(src, dtype=np.float64)
    if loc.azimuth == 0.0:
        return BinauralSignal(np.vstack([src, src]), sample_rate)
    itd = abs(woodworth_itd(loc.azimuth, head_radius, c))
    far = fractional_delay(src, itd * sample_rate)
    far = _high_shelf(far, _shelf_gain_db(loc.azimuth, shadow_db), shelf_fc, sample_rate)
    if loc.azimuth > 0:  # source left: right ear is far
        return BinauralSignal(np.vstack([src, far]), sample_rate)
    return BinauralSignal(np.vstack([far, src]), sample_rate)


def render_trajectory(
    src: np.ndarray,
    traj: Trajectory,
    sample_rate: int = SAMPLE_RATE,
    chunk: int = 256,
    **renderer_kwargs,
) -> BinauralSignal:
    """Render a moving source by overlap-adding parametrically rendered chunks.

    Hann-windowed chunks at 50% overlap sum to unity, so a static
    trajectory reproduces the static renderer exactly (by linearity).
    Each chunk carries tail padding so delayed content is not truncated.
    """
    src = np.asarray(src, dtype=np.float64)
    n = src.shape[-1]
    hop = chunk // 2
    # leading margin absorbs the delay kernel's acausal pre-ring, the tail
    # padding its post-ring plus the integer delay
    lead = DELAY_HALF_WIDTH + 2
    pad = 2 * DELAY_HALF_WIDTH + 16
    window = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(chunk) / chunk)
    out = np.zeros((2, n))
    for start in range(-hop, n, hop):
        lo, hi = max(start, 0), min(start + chunk, n)
        if hi <= lo:
            continue
        piece = np.zeros(lead + chunk + pad)
        piece[lead + lo - start:lead + hi - start] = src[lo:hi]
        piece[lead:lead + chunk] *= window
        t_center = min(max((start + chunk / 2.0) / sample_rate, 0.0), traj.duration_sec)
        loc = sample_trajectory(traj, [t_center])[0]
        rendered = spatialize_parametric(piece, loc, sample_rate=sample_rate, **renderer_kwargs)
        # buffer index b lands at output sample start - lead + b
        b0 = max(0, lead - start)
        b1 = min(lead + chunk + pad, n + lead - start)
        if b1 <= b0:
            continue
        o0 = start - lead + b0
        out[:, o0:o0 + (b1 - b0)] += rendered.samples[:, b0:b1]
    return BinauralSignal(np.clip(out, -1.0, 1.0), sample_rate)


def mix_noise(clean: BinauralSignal, noise: BinauralSignal, snr_db: float) -> BinauralSignal:
    """Add noise scaled to the requested SNR (power over both channels jointly).

    snr_db = +inf is the no-noise sentinel and returns the clean signal.
    """
    if math.isinf(snr_db) and snr_db > 0:
        return clean
    if clean.n_samples != noise.n_samples or clean.sample_rate != noise.sample_rate:
        raise ValueError("clean and noise must share length and sample rate")
    p_clean = float(np.mean(clean.samples ** 2))
    p_noise = float(np.mean(noise.samples ** 2))
    if p_clean == 0.0:
        raise ValueError("undefined SNR: clean signal is silent")
    if p_noise == 0.0:
        raise ValueError("undefined SNR: noise signal is silent")
    gain = math.sqrt(p_clean / (p_noise * 10.0 ** (snr_db / 10.0)))
    return BinauralSignal(clean.samples + gain * noise.samples, clean.sample_rate)
