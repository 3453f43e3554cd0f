"""Positional perturbations: random zero-padding with frame trimming, and
speed perturbation by windowed-sinc resampling.

Padding lengths are locked to multiples of the encoder hop so padding shifts
whole frames; trimming the shifted frames restores content alignment while
leaving absolute positions displaced.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .encoder import RepSequence
from .signal import Waveform

HOP = 320

# Windowed-sinc resampler: zero crossings per side of the (cutoff-scaled)
# kernel, the Kaiser shape parameter, the fractional-phase grid size, and
# the quantization grid for the anti-aliasing cutoff (tap tables are cached
# per quantized cutoff).
SINC_ZERO_CROSSINGS = 16
KAISER_BETA = 8.6
PHASE_STEPS = 4096
CUTOFF_STEPS = 256


@dataclass(frozen=True)
class PadPlan:
    """Resolved zero-padding amounts for one waveform."""

    fraction: float
    pad_samples: int
    trim: int

    def __post_init__(self):
        if self.pad_samples % HOP != 0:
            raise ValueError("pad length must be a multiple of the frame hop")
        if self.trim != self.pad_samples // HOP:
            raise ValueError("trim count must equal pad length / hop")


def sample_pad_fraction(rng: np.random.Generator, low: float = 0.02, high: float = 0.05) -> float:
    """Draw the pad fraction uniformly from [low, high]."""
    return float(rng.uniform(low, high))


def pad_length(n_samples: int, fraction: float, hop: int = HOP) -> PadPlan:
    """Quantize fraction * length down to a whole number of hops."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"pad fraction {fraction} out of [0, 1]")
    pad = int(np.floor(fraction * n_samples / hop)) * hop
    return PadPlan(fraction=fraction, pad_samples=pad, trim=pad // hop)


def zero_pad(w: Waveform, pad_samples: int) -> Waveform:
    """Surround the waveform with `pad_samples` zeros on each side."""
    if pad_samples < 0:
        raise ValueError("pad_samples must be >= 0")
    if pad_samples == 0:
        return Waveform(w.samples.copy())
    return Waveform(np.concatenate([np.zeros(pad_samples), w.samples, np.zeros(pad_samples)]))


def trim_frames(reps: RepSequence, trim: int) -> RepSequence:
    """Drop `trim` frames from each end; rows are copied, input untouched."""
    if trim < 0:
        raise ValueError("trim must be >= 0")
    n = reps.n_frames
    if n <= 2 * trim:
        raise ValueError(f"trim exceeds sequence: {n} frames, trim {trim} per side")
    if trim == 0:
        return RepSequence(reps.data.copy(), normalized=reps.normalized)
    return RepSequence(reps.data[trim : n - trim].copy(), normalized=reps.normalized)


def sample_speed_factor(rng: np.random.Generator, low: float = 0.9, high: float = 1.1) -> float:
    """Draw the speed factor uniformly from [low, high]."""
    return float(rng.uniform(low, high))


@lru_cache(maxsize=32)
def _polyphase_taps(cutoff: float) -> np.ndarray:
    # Exact Kaiser-windowed sinc taps on a dense fractional-phase grid,
    # one row per phase in [0, 1]. Row p covers integer offsets
    # [-reach, reach] around the floor of the sampling position.
    half_width = SINC_ZERO_CROSSINGS / cutoff
    reach = int(np.ceil(half_width))
    phases = np.arange(PHASE_STEPS + 1)[:, None] / PHASE_STEPS
    u = phases - np.arange(-reach, reach + 1)[None, :]
    frac = np.clip(np.abs(u) / half_width, 0.0, 1.0)
    window = np.i0(KAISER_BETA * np.sqrt(1.0 - frac**2)) / np.i0(KAISER_BETA)
    taps = cutoff * np.sinc(cutoff * u) * window
    taps[np.abs(u) > half_width] = 0.0
    taps.setflags(write=False)
    return taps


def speed_perturb(w: Waveform, alpha: float) -> Waveform:
    """Resample the waveform to alpha-times speed (tempo and pitch scale).

    Output sample n is the input evaluated at position n * alpha via a
    Kaiser-windowed sinc kernel; for alpha > 1 the kernel cutoff drops to
    1/alpha for anti-aliasing. Sampling phases are quantized to a 1/4096
    grid and the cutoff to a 1/256 grid (rounded down, so aliasing never
    increases), which keeps the kernel exact while allowing tap reuse.
    alpha == 1 returns the input bit-exactly.
    """
    if not 0.5 <= alpha <= 2.0:
        raise ValueError(f"speed factor {alpha} out of range [0.5, 2.0]")
    if alpha == 1.0:
        return Waveform(w.samples.copy())

    n_in = len(w)
    n_out = int(round(n_in / alpha))
    cutoff = 1.0 if alpha <= 1.0 else float(np.floor(CUTOFF_STEPS / alpha) / CUTOFF_STEPS)
    taps = _polyphase_taps(cutoff)
    reach = (taps.shape[1] - 1) // 2

    positions = alpha * np.arange(n_out)
    base = np.floor(positions).astype(np.int64)
    phase_idx = np.round((positions - base) * PHASE_STEPS).astype(np.int64)

    padded = np.concatenate([np.zeros(reach), w.samples, np.zeros(reach)])
    windows = np.lib.stride_tricks.sliding_window_view(padded, taps.shape[1])[base]
    return Waveform(np.einsum("ij,ij->i", taps[phase_idx], windows))
