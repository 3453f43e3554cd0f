"""Representation-matching losses: framewise MSE, its pad/trim variant, and a
differentiable soft-DTW alignment loss with divergence and length
normalization.

The soft-DTW forward pass fills the accumulated-cost table along
anti-diagonals with a log-sum-exp soft minimum; the backward pass runs the
reverse recursion over expected path occupancies. Both use a true +inf
boundary sentinel, which the soft minimum ignores, so no overflow-prone
large-constant tricks are needed. A classic hard-DTW oracle (DP and
exhaustive path enumeration) is included for verification.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .encoder import RepSequence
from .perturb import trim_frames

DEFAULT_GAMMA = 0.1


@dataclass(eq=False)
class SdtwTables:
    """Forward-pass state kept for the backward recursion.

    acc is the (m+1) x (n+1) accumulated-cost table with acc[0][0] == 0 and
    +inf sentinels along the first row and column; cost is the m x n pairwise
    squared-Euclidean matrix.
    """

    acc: np.ndarray
    cost: np.ndarray
    gamma: float


@dataclass(eq=False)
class AlignmentWeights:
    """Expected soft-alignment path occupancy per cell, each in [0, 1]."""

    occupancy: np.ndarray


@dataclass(eq=False)
class LossOutput:
    value: float
    grad_wrt_enhanced: np.ndarray


def _as_matrix(x) -> np.ndarray:
    data = x.data if isinstance(x, RepSequence) else np.asarray(x, dtype=np.float64)
    if data.ndim != 2:
        raise ValueError("representations must be 2-D (frames x dim)")
    return data


def softmin(values, gamma: float) -> float:
    """Soft minimum -gamma * ln(sum exp(-v / gamma)), max-shift stabilized.

    +inf entries are ignored; an all-inf input yields +inf.
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    vals = np.asarray(values, dtype=np.float64)
    if vals.size == 0:
        raise ValueError("softmin of an empty collection")
    if np.any(np.isnan(vals)) or np.any(vals == -np.inf):
        raise ValueError("softmin values must be finite or +inf")
    lowest = float(np.min(vals))
    if lowest == np.inf:
        return math.inf
    return lowest - gamma * math.log(float(np.sum(np.exp((lowest - vals) / gamma))))


def _softmin3(a: np.ndarray, b: np.ndarray, c: np.ndarray, gamma: float) -> np.ndarray:
    # Vectorized three-way soft minimum; any +inf argument contributes zero.
    lowest = np.minimum(np.minimum(a, b), c)
    finite = np.isfinite(lowest)
    with np.errstate(invalid="ignore"):
        total = (
            np.exp((lowest - a) / gamma)
            + np.exp((lowest - b) / gamma)
            + np.exp((lowest - c) / gamma)
        )
    return np.where(finite, lowest - gamma * np.log(np.where(finite, total, 1.0)), np.inf)


def _pairwise_sq_dist(xp: np.ndarray, xh: np.ndarray) -> np.ndarray:
    diff = xp[:, None, :] - xh[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def mse_loss(xp, x) -> LossOutput:
    """Framewise MSE between same-length sequences: mean row squared distance.

    The gradient is taken with respect to the first (enhanced) argument.
    """
    enhanced = _as_matrix(xp)
    reference = _as_matrix(x)
    if enhanced.shape != reference.shape:
        raise ValueError(f"shape mismatch: {enhanced.shape} vs {reference.shape}")
    m = enhanced.shape[0]
    diff = enhanced - reference
    value = float(np.sum(diff * diff)) / m
    return LossOutput(value=value, grad_wrt_enhanced=(2.0 / m) * diff)


def ssl_mse_pad_loss(xp, x_padded, trim: int) -> LossOutput:
    """MSE against a padded reference sequence after trimming `trim` frames
    from each end of it."""
    enhanced = _as_matrix(xp)
    padded = x_padded if isinstance(x_padded, RepSequence) else RepSequence(np.asarray(x_padded, dtype=np.float64))
    if padded.n_frames - 2 * trim != enhanced.shape[0]:
        raise ValueError(
            f"pad/trim mismatch: {padded.n_frames} padded frames minus 2*{trim} "
            f"!= {enhanced.shape[0]} enhanced frames"
        )
    return mse_loss(enhanced, trim_frames(padded, trim))


def sdtw_forward(xp, xh, gamma: float = DEFAULT_GAMMA) -> tuple[float, SdtwTables]:
    """Soft-DTW accumulated cost between two sequences.

    Returns the scalar value (possibly slightly negative) and the tables
    needed by sdtw_backward.
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    a = _as_matrix(xp)
    b = _as_matrix(xh)
    m, n = a.shape[0], b.shape[0]
    if m < 1 or n < 1:
        raise ValueError("soft-DTW requires non-empty sequences")
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")

    cost = _pairwise_sq_dist(a, b)
    acc = np.full((m + 1, n + 1), np.inf)
    acc[0, 0] = 0.0
    for k in range(2, m + n + 1):
        i = np.arange(max(1, k - n), min(m, k - 1) + 1)
        j = k - i
        acc[i, j] = cost[i - 1, j - 1] + _softmin3(acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1], gamma)
    return float(acc[m, n]), SdtwTables(acc=acc, cost=cost, gamma=gamma)


def sdtw_backward(tables: SdtwTables, xp, xh) -> tuple[AlignmentWeights, np.ndarray]:
    """Reverse recursion over the forward tables.

    Returns the expected path-occupancy matrix E and the exact gradient of
    the soft-DTW value with respect to the first sequence:
    grad_i = sum_j E[i][j] * 2 * (xp_i - xh_j).
    """
    a = _as_matrix(xp)
    b = _as_matrix(xh)
    m, n = a.shape[0], b.shape[0]
    if tables.cost.shape != (m, n) or tables.acc.shape != (m + 1, n + 1):
        raise ValueError("tables do not match the given sequences")
    gamma = tables.gamma

    acc = np.full((m + 2, n + 2), -np.inf)
    acc[: m + 1, : n + 1] = tables.acc
    acc[m + 1, n + 1] = tables.acc[m, n]
    cost = np.zeros((m + 2, n + 2))
    cost[1 : m + 1, 1 : n + 1] = tables.cost

    occ = np.zeros((m + 2, n + 2))
    occ[m + 1, n + 1] = 1.0
    for k in range(m + n, 1, -1):
        i = np.arange(max(1, k - n), min(m, k - 1) + 1)
        j = k - i
        # Each exponent is <= 0 by the forward recursion, so no overflow.
        down = np.exp((acc[i + 1, j] - acc[i, j] - cost[i + 1, j]) / gamma)
        right = np.exp((acc[i, j + 1] - acc[i, j] - cost[i, j + 1]) / gamma)
        diag = np.exp((acc[i + 1, j + 1] - acc[i, j] - cost[i + 1, j + 1]) / gamma)
        occ[i, j] = down * occ[i + 1, j] + right * occ[i, j + 1] + diag * occ[i + 1, j + 1]

    occupancy = occ[1 : m + 1, 1 : n + 1]
    grad = 2.0 * (occupancy.sum(axis=1)[:, None] * a - occupancy @ b)
    return AlignmentWeights(occupancy=occupancy), grad


def sdtw_divergence(xp, xh, gamma: float = DEFAULT_GAMMA) -> LossOutput:
    """Divergence-normalized soft-DTW: d(x,y) - (d(x,x) + d(y,y)) / 2.

    Exactly zero for identical inputs. The gradient with respect to the
    first argument carries the total derivative of the self term through
    both of its slots, which by symmetry equals its one-sided gradient.
    """
    a = _as_matrix(xp)
    b = _as_matrix(xh)
    value_xy, tables_xy = sdtw_forward(a, b, gamma)
    value_xx, tables_xx = sdtw_forward(a, a, gamma)
    value_yy, _ = sdtw_forward(b, b, gamma)
    _, grad_xy = sdtw_backward(tables_xy, a, b)
    _, grad_xx = sdtw_backward(tables_xx, a, a)
    return LossOutput(
        value=value_xy - 0.5 * (value_xx + value_yy),
        grad_wrt_enhanced=grad_xy - grad_xx,
    )


def ssl_softdtw_loss(xp, xh, gamma: float = DEFAULT_GAMMA, divergence: bool = True) -> LossOutput:
    """Length-normalized soft-DTW alignment loss between two sequences.

    Uses the divergence form by default; `divergence=False` exposes the raw
    soft-DTW value for ablations. Both are scaled by 1 / (m + n).
    """
    a = _as_matrix(xp)
    b = _as_matrix(xh)
    scale = 1.0 / (a.shape[0] + b.shape[0])
    if divergence:
        out = sdtw_divergence(a, b, gamma)
        return LossOutput(value=out.value * scale, grad_wrt_enhanced=out.grad_wrt_enhanced * scale)
    value, tables = sdtw_forward(a, b, gamma)
    _, grad = sdtw_backward(tables, a, b)
    return LossOutput(value=value * scale, grad_wrt_enhanced=grad * scale)


def hard_dtw_oracle(xp, xh, mode: str = "dp") -> float:
    """Classic hard-minimum DTW cost, as an independent reference.

    mode "dp" runs the plain nested-loop recursion; mode "enumerate"
    exhaustively scores every monotone alignment path (requires m + n <= 12).
    Both accumulate path costs left to right, so they agree bit-exactly.
    """
    a = _as_matrix(xp)
    b = _as_matrix(xh)
    m, n = a.shape[0], b.shape[0]
    if m < 1 or n < 1:
        raise ValueError("DTW requires non-empty sequences")
    cost = [[float(v) for v in row] for row in _pairwise_sq_dist(a, b)]

    if mode == "dp":
        prev = [math.inf] * (n + 1)
        prev[0] = 0.0
        for i in range(1, m + 1):
            cur = [math.inf] * (n + 1)
            for j in range(1, n + 1):
                cur[j] = cost[i - 1][j - 1] + min(prev[j - 1], prev[j], cur[j - 1])
            prev = cur
        return prev[n]

    if mode == "enumerate":
        if m + n > 12:
            raise ValueError(f"enumerate mode limited to m + n <= 12, got {m + n}")
        best = math.inf

        def walk(i: int, j: int, total: float) -> None:
            nonlocal best
            total = total + cost[i][j]
            if i == m - 1 and j == n - 1:
                best = min(best, total)
                return
            if i + 1 < m:
                walk(i + 1, j, total)
            if j + 1 < n:
                walk(i, j + 1, total)
            if i + 1 < m and j + 1 < n:
                walk(i + 1, j + 1, total)

        walk(0, 0, 0.0)
        return best

    raise ValueError(f"unknown mode {mode!r}, expected 'dp' or 'enumerate'")
