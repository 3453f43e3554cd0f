"""Trainable waveform enhancer: a gained FIR filter with exact gradients.

Small enough to train in seconds, yet its optimum under noisy-to-clean
supervision is a meaningful denoiser, so every gradient path of the
fine-tuning pipeline gets exercised.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .signal import Waveform

DEFAULT_TAPS = 17
CHECKPOINT_MAGIC = "alignlab-ckpt v1"


@dataclass(eq=False)
class EnhancerParams:
    """FIR taps (odd length, center-indexed) and an output gain."""

    taps: np.ndarray
    gain: float

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=np.float64)
        if taps.ndim != 1 or taps.size % 2 == 0:
            raise ValueError("taps must be a 1-D array of odd length")
        if not (np.all(np.isfinite(taps)) and np.isfinite(self.gain)):
            raise ValueError("parameters must be finite")
        self.taps = taps
        self.gain = float(self.gain)

    @property
    def n_taps(self) -> int:
        return self.taps.size

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.taps, [self.gain]])

    @classmethod
    def from_vector(cls, vec: np.ndarray) -> "EnhancerParams":
        vec = np.asarray(vec, dtype=np.float64)
        return cls(taps=vec[:-1].copy(), gain=float(vec[-1]))


def init_params(seed: int, n_taps: int = DEFAULT_TAPS, noise_scale: float = 1e-3) -> EnhancerParams:
    """Near-identity initialization: a centered delta plus small uniform noise."""
    if n_taps % 2 == 0 or not 3 <= n_taps <= 127:
        raise ValueError(f"n_taps must be odd and in [3, 127], got {n_taps}")
    taps = np.zeros(n_taps)
    taps[n_taps // 2] = 1.0
    if noise_scale != 0.0:
        rng = np.random.default_rng(seed)
        taps += rng.uniform(-noise_scale, noise_scale, size=n_taps)
    return EnhancerParams(taps=taps, gain=1.0)


def enhance(params: EnhancerParams, noisy: Waveform) -> Waveform:
    """Apply the filter: gain * (taps convolved with the zero-padded input).

    Output length equals input length.
    """
    if len(noisy) < params.n_taps:
        raise ValueError(f"input length {len(noisy)} shorter than filter length {params.n_taps}")
    return Waveform(params.gain * np.convolve(noisy.samples, params.taps, mode="same"))


def enhance_backward(
    params: EnhancerParams, noisy: Waveform, grad_wrt_output: np.ndarray
) -> tuple[np.ndarray, float]:
    """Exact gradients of the filter output against (taps, gain).

    grad_wrt_output is the upstream gradient on the enhanced waveform.
    """
    grad = np.asarray(grad_wrt_output, dtype=np.float64)
    if grad.shape != (len(noisy),) :
        raise ValueError(f"gradient shape {grad.shape} does not match waveform length {len(noisy)}")
    x = noisy.samples
    n = x.size
    k = params.n_taps
    center = k // 2

    # d output[t] / d taps[j] = gain * x[t + center - j] (zero outside).
    grad_taps = np.empty(k)
    for j in range(k):
        shift = center - j
        if shift >= 0:
            grad_taps[j] = float(np.dot(grad[: n - shift], x[shift:])) if shift < n else 0.0
        else:
            grad_taps[j] = float(np.dot(grad[-shift:], x[: n + shift])) if -shift < n else 0.0
    grad_taps *= params.gain

    filtered = np.convolve(x, params.taps, mode="same")
    grad_gain = float(np.dot(filtered, grad))
    return grad_taps, grad_gain


def save_checkpoint(path, params: EnhancerParams) -> None:
    """Write the versioned text checkpoint: header, taps, then gain, one
    value per line with 17 significant digits."""
    lines = [f"{CHECKPOINT_MAGIC} K={params.n_taps}"]
    lines.extend(f"{v:.17g}" for v in params.taps)
    lines.append(f"{params.gain:.17g}")
    with open(path, "w", encoding="ascii") as handle:
        handle.write("\n".join(lines) + "\n")


def load_checkpoint(path) -> EnhancerParams:
    """Parse a checkpoint written by save_checkpoint."""
    with open(path, "r", encoding="ascii") as handle:
        lines = [line.strip() for line in handle if line.strip()]
    if not lines:
        raise ValueError(f"corrupt checkpoint {path}: empty file")
    match = re.fullmatch(re.escape(CHECKPOINT_MAGIC) + r" K=(\d+)", lines[0])
    if not match:
        raise ValueError(f"corrupt checkpoint {path}: bad header {lines[0]!r}")
    n_taps = int(match.group(1))
    if len(lines) != 1 + n_taps + 1:
        raise ValueError(f"corrupt checkpoint {path}: expected {n_taps + 1} values, found {len(lines) - 1}")
    try:
        values = [float(v) for v in lines[1:]]
    except ValueError:
        raise ValueError(f"corrupt checkpoint {path}: non-numeric parameter line") from None
    return EnhancerParams(taps=np.array(values[:-1]), gain=values[-1])
