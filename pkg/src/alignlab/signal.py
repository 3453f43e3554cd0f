"""Waveform synthesis, WAV I/O, SNR mixing, framing, and quality metrics.

Everything here operates on mono 16 kHz audio held in float64 arrays with
nominal range [-1, 1]. All synthesis is deterministic given a seed.
"""

from __future__ import annotations

import math
import wave
from dataclasses import dataclass

import numpy as np

SAMPLE_RATE = 16000
PCM_SCALE = 32768.0  # 16-bit full scale
SI_SNR_CAP_DB = 60.0

NOISE_KINDS = ("white", "pink", "tonal-babble")


@dataclass(frozen=True, eq=False)
class Waveform:
    """Mono audio signal at 16 kHz."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size < 1:
            raise ValueError("waveform must be a non-empty 1-D sample array")
        if self.sample_rate != SAMPLE_RATE:
            raise ValueError(f"unsupported sample rate {self.sample_rate}, expected {SAMPLE_RATE}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("waveform contains non-finite samples")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True, eq=False)
class FrameMatrix:
    """Contiguous sample slices stacked row-wise, one frame per row."""

    data: np.ndarray
    hop: int
    window: int

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]


def rms(x: np.ndarray | Waveform) -> float:
    """Root-mean-square amplitude."""
    samples = x.samples if isinstance(x, Waveform) else np.asarray(x, dtype=np.float64)
    return float(np.sqrt(np.mean(np.square(samples))))


def read_wav(path) -> Waveform:
    """Read a 16-bit PCM mono 16 kHz WAV file, scaling samples to [-1, 1)."""
    try:
        with wave.open(str(path), "rb") as handle:
            channels = handle.getnchannels()
            width = handle.getsampwidth()
            rate = handle.getframerate()
            n_frames = handle.getnframes()
            raw = handle.readframes(n_frames)
    except wave.Error as exc:
        raise ValueError(f"malformed WAV file {path}: {exc}") from None
    except EOFError:
        raise ValueError(f"malformed WAV file {path}: truncated header") from None
    if channels != 1:
        raise ValueError(f"unsupported channel count {channels}, expected mono")
    if width != 2:
        raise ValueError(f"unsupported bit depth {8 * width}, expected 16-bit PCM")
    if rate != SAMPLE_RATE:
        raise ValueError(f"unsupported sample rate {rate}, expected {SAMPLE_RATE} (no resampling on ingest)")
    pcm = np.frombuffer(raw, dtype="<i2")
    if pcm.size < 1:
        raise ValueError(f"malformed WAV file {path}: no audio frames")
    return Waveform(pcm.astype(np.float64) / PCM_SCALE)


def write_wav(path, w: Waveform) -> None:
    """Write 16-bit PCM mono 16 kHz with a canonical 44-byte header.

    Samples are clamped to [-1, 1 - 2**-15] before quantization so the full
    int16 range round-trips exactly.
    """
    clipped = np.clip(w.samples, -1.0, (PCM_SCALE - 1.0) / PCM_SCALE)
    pcm = np.round(clipped * PCM_SCALE).astype("<i2")
    with wave.open(str(path), "wb") as handle:
        handle.setnchannels(1)
        handle.setsampwidth(2)
        handle.setframerate(SAMPLE_RATE)
        handle.writeframes(pcm.tobytes())


def synth_speechlike(seed: int, duration_s: float) -> Waveform:
    """Synthesize a deterministic speech-like harmonic signal.

    A stack of 3-6 harmonics rides on a slowly wobbling fundamental in
    [90, 300] Hz under a slow amplitude envelope that includes at least one
    silent gap of >= 50 ms. Peak amplitude lands in [0.3, 0.9].
    """
    if not 0.2 <= duration_s <= 30.0:
        raise ValueError(f"duration_s {duration_s} out of range [0.2, 30]")
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * SAMPLE_RATE))
    t = np.arange(n) / SAMPLE_RATE

    pitch_base = rng.uniform(105.0, 260.0)
    wobble_hz = rng.uniform(0.5, 2.0)
    wobble_depth = rng.uniform(0.02, 0.12)
    wobble_phase = rng.uniform(0.0, 2.0 * np.pi)
    pitch = pitch_base * (1.0 + wobble_depth * np.sin(2.0 * np.pi * wobble_hz * t + wobble_phase))
    phase = 2.0 * np.pi * np.cumsum(pitch) / SAMPLE_RATE

    n_harmonics = int(rng.integers(3, 7))
    out = np.zeros(n)
    for h in range(1, n_harmonics + 1):
        amp = rng.uniform(0.4, 1.0) / h
        out += amp * np.sin(h * phase + rng.uniform(0.0, 2.0 * np.pi))

    env_hz = rng.uniform(1.0, 3.0)
    env_phase = rng.uniform(0.0, 2.0 * np.pi)
    envelope = 0.55 + 0.45 * np.sin(2.0 * np.pi * env_hz * t + env_phase)

    # Carve one hard silent gap with 5 ms raised-cosine edges.
    gap_len = int(rng.uniform(0.055, 0.09) * SAMPLE_RATE)
    edge = int(0.005 * SAMPLE_RATE)
    lo = int(0.1 * n)
    hi = max(lo + 1, int(0.8 * n) - gap_len - 2 * edge)
    gap_start = int(rng.integers(lo, hi))
    gate = np.ones(n)
    gate[gap_start : gap_start + gap_len] = 0.0
    ramp = 0.5 + 0.5 * np.cos(np.linspace(0.0, np.pi, edge))
    gate[gap_start - edge : gap_start] = ramp
    gate[gap_start + gap_len : gap_start + gap_len + edge] = ramp[::-1]

    out *= envelope * gate
    peak_target = rng.uniform(0.5, 0.8)
    out *= peak_target / np.max(np.abs(out))
    return Waveform(out)


def synth_noise(kind: str, seed: int, duration_s: float) -> Waveform:
    """Synthesize deterministic noise of the given kind at RMS 0.1.

    Kinds: "white" (gaussian), "pink" (1/f spectral shaping), and
    "tonal-babble" (eight amplitude-modulated tones above the speech band,
    standing in for structured indoor noise).
    """
    if kind not in NOISE_KINDS:
        raise ValueError(f"unknown noise kind {kind!r}, expected one of {NOISE_KINDS}")
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * SAMPLE_RATE))
    if kind == "white":
        out = rng.standard_normal(n)
    elif kind == "pink":
        white = rng.standard_normal(n)
        spectrum = np.fft.rfft(white)
        freqs = np.fft.rfftfreq(n, d=1.0 / SAMPLE_RATE)
        freqs[0] = freqs[1] if n > 1 else 1.0
        spectrum /= np.sqrt(freqs)
        out = np.fft.irfft(spectrum, n=n)
    else:  # tonal-babble
        t = np.arange(n) / SAMPLE_RATE
        out = np.zeros(n)
        for _ in range(8):
            freq = rng.uniform(2000.0, 7200.0)
            amp = rng.uniform(0.5, 1.0)
            am_rate = rng.uniform(2.0, 8.0)
            am_depth = rng.uniform(0.3, 0.9)
            am_phase = rng.uniform(0.0, 2.0 * np.pi)
            phase = rng.uniform(0.0, 2.0 * np.pi)
            out += amp * (1.0 + am_depth * np.sin(2.0 * np.pi * am_rate * t + am_phase)) * np.sin(
                2.0 * np.pi * freq * t + phase
            )
    out *= 0.1 / rms(out)
    return Waveform(out)


def mix_at_snr(clean: Waveform, noise: Waveform, snr_db: float) -> Waveform:
    """Add noise to clean speech at an exact target SNR in dB.

    Noise shorter than the clean signal is tiled cyclically before the
    leading segment is used, so the achieved SNR matches the request to
    floating-point precision.
    """
    n = len(clean)
    clean_rms = rms(clean)
    if clean_rms == 0.0:
        raise ValueError("clean signal is all zeros; SNR undefined")
    segment = noise.samples
    if segment.size < n:
        reps = -(-n // segment.size)
        segment = np.tile(segment, reps)
    segment = segment[:n]
    noise_rms = rms(segment)
    if noise_rms == 0.0:
        raise ValueError("noise segment is all zeros; cannot scale to target SNR")
    gain = clean_rms / (noise_rms * 10.0 ** (snr_db / 20.0))
    return Waveform(clean.samples + gain * segment)


def frame(w: Waveform, hop: int, window: int) -> FrameMatrix:
    """Slice the waveform into frames of `window` samples every `hop` samples.

    The incomplete tail is dropped: n = floor((T - window) / hop) + 1.
    """
    if hop < 1 or window < 1:
        raise ValueError("hop and window must be >= 1")
    n_samples = len(w)
    if n_samples < window:
        raise ValueError(f"waveform length {n_samples} shorter than window {window}")
    n = (n_samples - window) // hop + 1
    idx = hop * np.arange(n)[:, None] + np.arange(window)[None, :]
    return FrameMatrix(w.samples[idx], hop=hop, window=window)


def si_snr(estimate: Waveform, reference: Waveform) -> float:
    """Scale-invariant SNR in dB: project the estimate onto the reference
    and compare projected energy to residual energy. Capped at +60 dB."""
    if len(estimate) != len(reference):
        raise ValueError(f"length mismatch: estimate {len(estimate)} vs reference {len(reference)}")
    ref = reference.samples
    est = estimate.samples
    ref_energy = float(np.dot(ref, ref))
    if ref_energy == 0.0:
        raise ValueError("reference signal is all zeros")
    target = (float(np.dot(est, ref)) / ref_energy) * ref
    residual = est - target
    target_energy = float(np.dot(target, target))
    residual_energy = float(np.dot(residual, residual))
    if residual_energy == 0.0:
        return SI_SNR_CAP_DB
    if target_energy == 0.0:
        return -math.inf
    return min(10.0 * math.log10(target_energy / residual_energy), SI_SNR_CAP_DB)
