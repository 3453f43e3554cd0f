"""Deterministic fine-tuning loops for the three alignment objectives, the
optimizer, evaluation, and the positional-shortcut diagnostic.

Every random draw (data order, pad fraction, speed factor) comes from one
generator seeded by the run config, so a run is bit-reproducible.
"""

from __future__ import annotations

import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .data import SEEN_NOISE_KIND, UNSEEN_NOISE_KIND, UtterancePair
from .encoder import EncoderConfig, encode, encode_backward
from .enhancer import EnhancerParams, enhance, enhance_backward, init_params
from .losses import mse_loss, ssl_mse_pad_loss, ssl_softdtw_loss
from .perturb import pad_length, sample_pad_fraction, sample_speed_factor, speed_perturb, zero_pad
from .signal import si_snr, synth_speechlike

log = logging.getLogger(__name__)

OBJECTIVES = ("ssl-mse", "ssl-mse-pad", "ssl-softdtw")

THREADS_ENV_VAR = "ALIGNLAB_THREADS"


class NonFiniteLossError(RuntimeError):
    """Raised when a training loss or gradient goes non-finite."""

    def __init__(self, message: str, context: dict):
        super().__init__(message)
        self.context = context


@dataclass(frozen=True)
class TrainConfig:
    objective: str = "ssl-mse"
    lr: float = 1e-4
    effective_batch: int = 16
    accumulation_steps: int = 16
    clip_max_norm: float = 1.0
    gamma: float = 0.1
    snr_set: tuple = (0.0, 5.0, 10.0, 20.0)
    pad_range: tuple = (0.02, 0.05)
    alpha_range: tuple = (0.9, 1.1)
    steps: int = 0  # 0 means one epoch over the dataset
    seed: int = 0
    checkpoint_interval: int = 50
    enhancer_taps: int = 17
    encoder: EncoderConfig = field(default_factory=EncoderConfig)

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ValueError(f"unknown objective {self.objective!r}, expected one of {OBJECTIVES}")
        if self.lr <= 0:
            raise ValueError("lr must be > 0")
        if self.effective_batch < 1 or self.accumulation_steps < 1:
            raise ValueError("effective_batch and accumulation_steps must be >= 1")
        if self.effective_batch % self.accumulation_steps != 0:
            raise ValueError(
                f"effective_batch {self.effective_batch} not divisible by "
                f"accumulation_steps {self.accumulation_steps}"
            )
        if not (0 <= self.pad_range[0] <= self.pad_range[1] <= 0.05):
            raise ValueError(f"pad_range {self.pad_range} outside [0, 0.05]")
        if not (0.5 <= self.alpha_range[0] <= self.alpha_range[1] <= 2.0):
            raise ValueError(f"alpha_range {self.alpha_range} outside [0.5, 2.0]")
        if self.gamma <= 0 or self.clip_max_norm <= 0:
            raise ValueError("gamma and clip_max_norm must be > 0")
        if self.checkpoint_interval < 1:
            raise ValueError("checkpoint_interval must be >= 1")


@dataclass(frozen=True)
class AdamState:
    """Adam moment accumulators over the flattened parameter vector."""

    mean: np.ndarray
    variance: np.ndarray
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass(frozen=True)
class CheckpointRecord:
    step: int
    train_loss: float
    eval_loss_seen: float
    eval_loss_unseen: float
    sisnr_seen_db: float
    sisnr_unseen_db: float
    wallclock_s: float


@dataclass
class RunMetrics:
    objective: str
    records: list = field(default_factory=list)


def adam_init(n_params: int) -> AdamState:
    return AdamState(mean=np.zeros(n_params), variance=np.zeros(n_params))


def adam_step(
    state: AdamState, params: np.ndarray, grads: np.ndarray, lr: float = 1e-4
) -> tuple[AdamState, np.ndarray]:
    """One bias-corrected Adam update; pure in state and parameters."""
    if params.shape != grads.shape or params.shape != state.mean.shape:
        raise ValueError("parameter, gradient, and state shapes must match")
    step = state.step + 1
    mean = state.beta1 * state.mean + (1.0 - state.beta1) * grads
    variance = state.beta2 * state.variance + (1.0 - state.beta2) * grads**2
    mean_hat = mean / (1.0 - state.beta1**step)
    variance_hat = variance / (1.0 - state.beta2**step)
    new_params = params - lr * mean_hat / (np.sqrt(variance_hat) + state.eps)
    new_state = replace(state, mean=mean, variance=variance, step=step)
    return new_state, new_params


def clip_grad_norm(grads: np.ndarray, max_norm: float = 1.0) -> np.ndarray:
    """Scale the gradient vector so its global L2 norm is at most max_norm."""
    norm = float(np.linalg.norm(grads))
    if norm > max_norm:
        return grads * (max_norm / norm)
    return grads


def _sample_loss_and_grad(
    cfg: TrainConfig, params: EnhancerParams, pair: UtterancePair, rng: np.random.Generator
) -> tuple[float, np.ndarray]:
    """Forward/backward for one utterance; returns (loss, flat param grad)."""
    enc = cfg.encoder
    enhanced = enhance(params, pair.noisy)

    if cfg.objective == "ssl-mse":
        reference = encode(pair.clean, enc)
        enhanced_reps = encode(enhanced, enc)
        out = mse_loss(enhanced_reps, reference)
    elif cfg.objective == "ssl-mse-pad":
        fraction = sample_pad_fraction(rng, *cfg.pad_range)
        plan = pad_length(len(pair.clean), fraction, enc.hop)
        enhanced_reps = encode(enhanced, enc)
        padded_reps = encode(zero_pad(pair.clean, plan.pad_samples), enc)
        usable = padded_reps.n_frames - 2 * plan.trim
        if usable < 1 or usable != enhanced_reps.n_frames:
            log.warning("utterance %s: degenerate pad (trim %d of %d frames); padding skipped",
                        pair.uid, plan.trim, padded_reps.n_frames)
            plan = pad_length(len(pair.clean), 0.0, enc.hop)
            padded_reps = encode(pair.clean, enc)
        out = ssl_mse_pad_loss(enhanced_reps, padded_reps, plan.trim)
    else:  # ssl-softdtw
        alpha = sample_speed_factor(rng, *cfg.alpha_range)
        perturbed = speed_perturb(pair.clean, alpha)
        perturbed_reps = encode(perturbed, enc)
        enhanced_reps = encode(enhanced, enc)
        out = ssl_softdtw_loss(enhanced_reps, perturbed_reps, cfg.gamma)

    grad_samples = encode_backward(enhanced, enc, out.grad_wrt_enhanced)
    grad_taps, grad_gain = enhance_backward(params, pair.noisy, grad_samples)
    return out.value, np.concatenate([grad_taps, [grad_gain]])


def train_objective(
    cfg: TrainConfig, dataset: list, evalset: list | None = None
) -> tuple[EnhancerParams, RunMetrics]:
    """Run the per-sample fine-tuning loop for the configured objective.

    Gradients are accumulated over effective_batch single-utterance
    forward/backward passes (summed in index order), averaged, clipped to
    the global max-norm, and applied with Adam. Checkpoint records land in
    the returned RunMetrics every cfg.checkpoint_interval steps; held-out
    columns are NaN when no evalset is given.
    """
    if not dataset:
        raise ValueError("dataset must be non-empty")
    rng = np.random.default_rng(cfg.seed)
    params = init_params(int(rng.integers(0, 2**31)), cfg.enhancer_taps)
    param_vec = params.to_vector()
    state = adam_init(param_vec.size)

    total_steps = cfg.steps if cfg.steps > 0 else max(1, len(dataset) // cfg.effective_batch)
    micro_size = cfg.effective_batch // cfg.accumulation_steps
    metrics = RunMetrics(objective=cfg.objective)
    start = time.perf_counter()

    order: list[int] = []
    interval_losses: list[float] = []

    def next_pair() -> UtterancePair:
        if not order:
            order.extend(rng.permutation(len(dataset)).tolist())
        return dataset[order.pop(0)]

    for step in range(1, total_steps + 1):
        params = EnhancerParams.from_vector(param_vec)
        grad_sum = np.zeros_like(param_vec)
        for _ in range(cfg.accumulation_steps):
            micro_sum = np.zeros_like(param_vec)
            for _ in range(micro_size):
                pair = next_pair()
                loss, grad = _sample_loss_and_grad(cfg, params, pair, rng)
                if not (math.isfinite(loss) and np.all(np.isfinite(grad))):
                    raise NonFiniteLossError(
                        f"non-finite loss at step {step} on utterance {pair.uid}",
                        context={
                            "step": step,
                            "utterance": pair.uid,
                            "objective": cfg.objective,
                            "loss": loss,
                            "params": param_vec.tolist(),
                        },
                    )
                micro_sum += grad
                interval_losses.append(loss)
            grad_sum += micro_sum
        grad_mean = grad_sum / cfg.effective_batch
        clipped = clip_grad_norm(grad_mean, cfg.clip_max_norm)
        state, param_vec = adam_step(state, param_vec, clipped, cfg.lr)

        if step % cfg.checkpoint_interval == 0 or step == total_steps:
            current = EnhancerParams.from_vector(param_vec)
            record = _checkpoint_record(cfg, current, evalset, step, interval_losses, start)
            metrics.records.append(record)
            interval_losses = []

    return EnhancerParams.from_vector(param_vec), metrics


def _checkpoint_record(cfg, params, evalset, step, interval_losses, start) -> CheckpointRecord:
    train_loss = float(np.mean(interval_losses)) if interval_losses else math.nan
    eval_rows = evaluate(params, evalset, cfg.encoder, cfg.objective, cfg.gamma) if evalset else {}
    seen = eval_rows.get(SEEN_NOISE_KIND)
    unseen = eval_rows.get(UNSEEN_NOISE_KIND)
    return CheckpointRecord(
        step=step,
        train_loss=train_loss,
        eval_loss_seen=seen["loss"] if seen else math.nan,
        eval_loss_unseen=unseen["loss"] if unseen else math.nan,
        sisnr_seen_db=seen["sisnr_improvement_db"] if seen else math.nan,
        sisnr_unseen_db=unseen["sisnr_improvement_db"] if unseen else math.nan,
        wallclock_s=time.perf_counter() - start,
    )


def _worker_count() -> int:
    value = os.environ.get(THREADS_ENV_VAR, "1")
    try:
        return max(1, int(value))
    except ValueError:
        log.warning("ignoring invalid %s=%r", THREADS_ENV_VAR, value)
        return 1


def _eval_one(params, pair, encoder_cfg, objective, gamma) -> tuple[str, float, float]:
    enhanced = enhance(params, pair.noisy)
    improvement = si_snr(enhanced, pair.clean) - si_snr(pair.noisy, pair.clean)
    enhanced_reps = encode(enhanced, encoder_cfg)
    clean_reps = encode(pair.clean, encoder_cfg)
    # Held-out loss is the objective at its identity perturbation (no pad,
    # unit speed), so checkpoints stay comparable.
    if objective == "ssl-softdtw":
        loss = ssl_softdtw_loss(enhanced_reps, clean_reps, gamma).value
    else:
        loss = mse_loss(enhanced_reps, clean_reps).value
    return pair.noise_kind, improvement, loss


def evaluate(
    params: EnhancerParams,
    testset: list,
    encoder_cfg: EncoderConfig,
    objective: str = "ssl-mse",
    gamma: float = 0.1,
) -> dict:
    """Mean SI-SNR improvement and held-out loss per noise condition.

    Returns {noise_kind: {"count", "sisnr_improvement_db", "loss"}}. Worker
    fan-out is capped by the ALIGNLAB_THREADS environment variable; results
    are reduced in dataset order either way.
    """
    if not testset:
        raise ValueError("testset must be non-empty")
    workers = _worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda p: _eval_one(params, p, encoder_cfg, objective, gamma), testset))
    else:
        rows = [_eval_one(params, pair, encoder_cfg, objective, gamma) for pair in testset]

    grouped: dict[str, dict] = {}
    for kind, improvement, loss in rows:
        bucket = grouped.setdefault(kind, {"count": 0, "sisnr_improvement_db": 0.0, "loss": 0.0})
        bucket["count"] += 1
        bucket["sisnr_improvement_db"] += improvement
        bucket["loss"] += loss
    for bucket in grouped.values():
        bucket["sisnr_improvement_db"] /= bucket["count"]
        bucket["loss"] /= bucket["count"]
    return grouped


def diagnose_positional(
    encoder_cfg: EncoderConfig,
    n_pairs: int,
    rng: np.random.Generator,
    duration_s: float = 1.0,
) -> float:
    """Quantify how much shared positional encodings shrink the MSE between
    representations of unrelated signals.

    Draws independent waveform pairs, measures the mean representation MSE
    at the configured beta and at beta = 0, and returns
    1 - mse(beta) / mse(0), clamped to [0, 1]. Zero means no positional
    shortcut; values near one mean the loss is dominated by position.
    """
    if n_pairs < 10:
        raise ValueError(f"n_pairs must be >= 10, got {n_pairs}")
    cfg_zero = replace(encoder_cfg, beta=0.0)
    loss_beta = 0.0
    loss_zero = 0.0
    for _ in range(n_pairs):
        seed_a = int(rng.integers(0, 2**31))
        seed_b = int(rng.integers(0, 2**31))
        first = synth_speechlike(seed_a, duration_s)
        second = synth_speechlike(seed_b, duration_s)
        loss_beta += mse_loss(encode(first, encoder_cfg), encode(second, encoder_cfg)).value
        loss_zero += mse_loss(encode(first, cfg_zero), encode(second, cfg_zero)).value
    index = 1.0 - loss_beta / loss_zero
    return min(max(index, 0.0), 1.0)
