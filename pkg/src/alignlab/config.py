"""Run configuration files: flat `key = value` lines grouped into
[encoder], [train], and [perturb] sections.

Unknown sections or keys are hard errors so a typo cannot silently change a
run. Writing the effective config back out and re-running it reproduces the
original run exactly.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

from .encoder import EncoderConfig
from .train import TrainConfig

_ENCODER_KEYS = ("hop", "window", "dim", "beta", "seed", "normalize")
_TRAIN_KEYS = (
    "objective",
    "lr",
    "effective_batch",
    "accumulation_steps",
    "clip_max_norm",
    "gamma",
    "snr_set",
    "steps",
    "seed",
    "checkpoint_interval",
    "enhancer_taps",
    "data_dir",
    "eval_dir",
)
_PERTURB_KEYS = ("pad_low", "pad_high", "alpha_low", "alpha_high")

_SECTIONS = {"encoder": _ENCODER_KEYS, "train": _TRAIN_KEYS, "perturb": _PERTURB_KEYS}


@dataclass(frozen=True)
class RunConfig:
    """A training config plus the dataset locations it applies to."""

    train: TrainConfig
    data_dir: str | None = None
    eval_dir: str | None = None


def _parse_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _parse_float_list(value: str) -> tuple[float, ...]:
    return tuple(float(part) for part in value.split(",") if part.strip())


def load_config(path) -> RunConfig:
    """Parse a config file, validating every section and key."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    read = parser.read(str(path))
    if not read:
        raise FileNotFoundError(f"config file not found: {path}")

    for section in parser.sections():
        if section not in _SECTIONS:
            raise ValueError(f"unknown config section [{section}]")
        for key in parser[section]:
            if key not in _SECTIONS[section]:
                raise ValueError(f"unknown config key {key!r} in section [{section}]")

    def get(section: str, key: str, default=None):
        if parser.has_option(section, key):
            return parser.get(section, key).strip()
        return default

    encoder = EncoderConfig(
        hop=int(get("encoder", "hop", 320)),
        window=int(get("encoder", "window", 320)),
        dim=int(get("encoder", "dim", 16)),
        beta=float(get("encoder", "beta", 1.0)),
        seed=int(get("encoder", "seed", 0)),
        normalize=_parse_bool(str(get("encoder", "normalize", "true"))),
    )
    defaults = TrainConfig()
    train = TrainConfig(
        objective=str(get("train", "objective", defaults.objective)),
        lr=float(get("train", "lr", defaults.lr)),
        effective_batch=int(get("train", "effective_batch", defaults.effective_batch)),
        accumulation_steps=int(get("train", "accumulation_steps", defaults.accumulation_steps)),
        clip_max_norm=float(get("train", "clip_max_norm", defaults.clip_max_norm)),
        gamma=float(get("train", "gamma", defaults.gamma)),
        snr_set=_parse_float_list(str(get("train", "snr_set", "0,5,10,20"))),
        pad_range=(
            float(get("perturb", "pad_low", defaults.pad_range[0])),
            float(get("perturb", "pad_high", defaults.pad_range[1])),
        ),
        alpha_range=(
            float(get("perturb", "alpha_low", defaults.alpha_range[0])),
            float(get("perturb", "alpha_high", defaults.alpha_range[1])),
        ),
        steps=int(get("train", "steps", defaults.steps)),
        seed=int(get("train", "seed", defaults.seed)),
        checkpoint_interval=int(get("train", "checkpoint_interval", defaults.checkpoint_interval)),
        enhancer_taps=int(get("train", "enhancer_taps", defaults.enhancer_taps)),
        encoder=encoder,
    )
    return RunConfig(train=train, data_dir=get("train", "data_dir"), eval_dir=get("train", "eval_dir"))


def write_config(path, run_cfg: RunConfig) -> None:
    """Write the effective configuration in the same key = value format."""
    cfg = run_cfg.train
    enc = cfg.encoder
    lines = [
        "[encoder]",
        f"hop = {enc.hop}",
        f"window = {enc.window}",
        f"dim = {enc.dim}",
        f"beta = {enc.beta:g}",
        f"seed = {enc.seed}",
        f"normalize = {'true' if enc.normalize else 'false'}",
        "",
        "[train]",
        f"objective = {cfg.objective}",
        f"lr = {cfg.lr:g}",
        f"effective_batch = {cfg.effective_batch}",
        f"accumulation_steps = {cfg.accumulation_steps}",
        f"clip_max_norm = {cfg.clip_max_norm:g}",
        f"gamma = {cfg.gamma:g}",
        "snr_set = " + ",".join(f"{s:g}" for s in cfg.snr_set),
        f"steps = {cfg.steps}",
        f"seed = {cfg.seed}",
        f"checkpoint_interval = {cfg.checkpoint_interval}",
        f"enhancer_taps = {cfg.enhancer_taps}",
    ]
    if run_cfg.data_dir:
        lines.append(f"data_dir = {run_cfg.data_dir}")
    if run_cfg.eval_dir:
        lines.append(f"eval_dir = {run_cfg.eval_dir}")
    lines += [
        "",
        "[perturb]",
        f"pad_low = {cfg.pad_range[0]:g}",
        f"pad_high = {cfg.pad_range[1]:g}",
        f"alpha_low = {cfg.alpha_range[0]:g}",
        f"alpha_high = {cfg.alpha_range[1]:g}",
        "",
    ]
    Path(path).write_text("\n".join(lines), encoding="ascii")
