"""Frozen per-frame encoder with tunable absolute positional encodings.

Each frame is mapped independently through a fixed random affine layer and
tanh, then a sinusoidal position vector scaled by `beta` is added. Because
no cross-frame context exists, the positional term is the only signal that
distinguishes identical content at different positions, which makes
position-shortcut effects directly measurable.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .signal import Waveform, frame

DEFAULT_HOP = 320
DEFAULT_DIM = 16


@dataclass(frozen=True)
class EncoderConfig:
    """Frozen encoder hyperparameters; weights derive deterministically from seed."""

    hop: int = DEFAULT_HOP
    window: int = DEFAULT_HOP
    dim: int = DEFAULT_DIM
    beta: float = 1.0
    seed: int = 0
    normalize: bool = True

    def __post_init__(self):
        if self.dim % 2 != 0:
            raise ValueError(f"dim must be even for sin/cos pairing, got {self.dim}")
        if self.hop < 1 or self.window < 1:
            raise ValueError("hop and window must be >= 1")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")


@dataclass(eq=False)
class RepSequence:
    """Frame-level representation matrix, one d-vector per row."""

    data: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ValueError("representation data must be a 2-D matrix")
        if not np.all(np.isfinite(data)):
            raise ValueError("representation data contains non-finite entries")
        self.data = data

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


@lru_cache(maxsize=32)
def _frozen_weights(seed: int, dim: int, window: int) -> tuple[np.ndarray, np.ndarray]:
    # Weight matrix first, then bias: the draw order is part of the contract.
    rng = np.random.default_rng(seed)
    scale = 1.0 / np.sqrt(window)
    weights = rng.uniform(-scale, scale, size=(dim, window))
    bias = rng.uniform(-scale, scale, size=dim)
    weights.setflags(write=False)
    bias.setflags(write=False)
    return weights, bias


def positional_encoding(index: int, dim: int) -> np.ndarray:
    """Sinusoidal position vector: pairs (sin, cos) of index / 10000^(2k/d)."""
    if index < 0:
        raise ValueError("frame index must be >= 0")
    if dim % 2 != 0:
        raise ValueError(f"dim must be even, got {dim}")
    return _positional_matrix(index + 1, dim)[index].copy()


@lru_cache(maxsize=8)
def _positional_denominators(dim: int) -> np.ndarray:
    k = np.arange(dim // 2)
    denom = 10000.0 ** (2.0 * k / dim)
    denom.setflags(write=False)
    return denom


def _positional_matrix(n: int, dim: int) -> np.ndarray:
    angles = np.arange(n)[:, None] / _positional_denominators(dim)[None, :]
    out = np.empty((n, dim))
    out[:, 0::2] = np.sin(angles)
    out[:, 1::2] = np.cos(angles)
    return out


def _normalize_rows(data: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(data, axis=1, keepdims=True)
    safe = np.where(norms == 0.0, 1.0, norms)
    return data / safe


def l2_normalize(reps: RepSequence) -> RepSequence:
    """Scale each nonzero row to unit L2 norm; zero rows pass through."""
    return RepSequence(_normalize_rows(reps.data), normalized=True)


def encode(w: Waveform, cfg: EncoderConfig) -> RepSequence:
    """Encode a waveform into per-frame representations.

    Per frame i: tanh(W f_i + b) + beta * position(i), optionally row
    L2-normalized. The weights are frozen functions of cfg.seed.
    """
    frames = frame(w, cfg.hop, cfg.window).data
    weights, bias = _frozen_weights(cfg.seed, cfg.dim, cfg.window)
    hidden = np.tanh(frames @ weights.T + bias)
    out = hidden + cfg.beta * _positional_matrix(frames.shape[0], cfg.dim)
    if cfg.normalize:
        out = _normalize_rows(out)
    return RepSequence(out, normalized=cfg.normalize)


def encode_backward(w: Waveform, cfg: EncoderConfig, grad_reps: np.ndarray) -> np.ndarray:
    """Exact reverse-mode gradient of `encode` with respect to the samples.

    `grad_reps` is the upstream gradient on the encoder output (n x d).
    Samples in the dropped tail frame receive gradient zero.
    """
    frames = frame(w, cfg.hop, cfg.window).data
    n, window = frames.shape
    grad_reps = np.asarray(grad_reps, dtype=np.float64)
    if grad_reps.shape != (n, cfg.dim):
        raise ValueError(f"grad_reps shape {grad_reps.shape} does not match encoder output ({n}, {cfg.dim})")

    weights, bias = _frozen_weights(cfg.seed, cfg.dim, cfg.window)
    pre = frames @ weights.T + bias
    hidden = np.tanh(pre)
    raw = hidden + cfg.beta * _positional_matrix(n, cfg.dim)

    if cfg.normalize:
        norms = np.linalg.norm(raw, axis=1, keepdims=True)
        nonzero = norms[:, 0] > 0.0
        unit = np.where(norms == 0.0, 0.0, raw / np.where(norms == 0.0, 1.0, norms))
        inner = np.sum(unit * grad_reps, axis=1, keepdims=True)
        grad_raw = grad_reps.copy()
        grad_raw[nonzero] = (grad_reps[nonzero] - inner[nonzero] * unit[nonzero]) / norms[nonzero]
    else:
        grad_raw = grad_reps

    grad_pre = grad_raw * (1.0 - hidden**2)
    grad_frames = grad_pre @ weights

    out = np.zeros(len(w))
    idx = cfg.hop * np.arange(n)[:, None] + np.arange(window)[None, :]
    np.add.at(out, idx.ravel(), grad_frames.ravel())
    return out
