"""Synthetic clean/noisy dataset creation and on-disk layout.

A dataset directory holds clean/NNNN.wav, noisy/NNNN.wav, and meta.csv with
one row per utterance (id, noise kind, SNR, seed). Everything derives
deterministically from the dataset seed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .signal import Waveform, mix_at_snr, read_wav, synth_noise, synth_speechlike, write_wav

META_NAME = "meta.csv"
META_HEADER = ["id", "noise_kind", "snr_db", "seed"]

SEEN_NOISE_KIND = "tonal-babble"
UNSEEN_NOISE_KIND = "pink"

DEFAULT_SNR_SET = (0.0, 5.0, 10.0, 20.0)
DEFAULT_DURATION_RANGE = (0.6, 1.0)

# Offset keeping noise seeds disjoint from utterance seeds.
_NOISE_SEED_OFFSET = 2**32


@dataclass(eq=False)
class UtterancePair:
    uid: str
    clean: Waveform
    noisy: Waveform
    noise_kind: str
    snr_db: float
    seed: int


def synth_pairs(
    n_utterances: int,
    seed: int,
    noise_kinds=(SEEN_NOISE_KIND,),
    snr_set=DEFAULT_SNR_SET,
    duration_range=DEFAULT_DURATION_RANGE,
) -> list[UtterancePair]:
    """Create n deterministic clean/noisy pairs.

    Noise kind and SNR are drawn per utterance from the given sets; the
    utterance seed drives both the speech and the noise synthesis.
    """
    if n_utterances < 1:
        raise ValueError("n_utterances must be >= 1")
    noise_kinds = list(noise_kinds)
    snr_set = [float(s) for s in snr_set]
    rng = np.random.default_rng(seed)
    pairs = []
    for i in range(n_utterances):
        utt_seed = int(rng.integers(0, 2**31))
        duration = float(rng.uniform(*duration_range))
        kind = noise_kinds[int(rng.integers(0, len(noise_kinds)))]
        snr_db = snr_set[int(rng.integers(0, len(snr_set)))]
        clean = synth_speechlike(utt_seed, duration)
        noise = synth_noise(kind, utt_seed + _NOISE_SEED_OFFSET, duration)
        noisy = mix_at_snr(clean, noise, snr_db)
        pairs.append(
            UtterancePair(
                uid=f"{i:04d}", clean=clean, noisy=noisy, noise_kind=kind, snr_db=snr_db, seed=utt_seed
            )
        )
    return pairs


def save_dataset(pairs: list[UtterancePair], out_dir) -> Path:
    """Write clean/noisy WAVs and meta.csv; returns the meta.csv path."""
    out = Path(out_dir)
    (out / "clean").mkdir(parents=True, exist_ok=True)
    (out / "noisy").mkdir(parents=True, exist_ok=True)
    meta_path = out / META_NAME
    with open(meta_path, "w", newline="", encoding="ascii") as handle:
        writer = csv.writer(handle)
        writer.writerow(META_HEADER)
        for pair in pairs:
            write_wav(out / "clean" / f"{pair.uid}.wav", pair.clean)
            write_wav(out / "noisy" / f"{pair.uid}.wav", pair.noisy)
            writer.writerow([pair.uid, pair.noise_kind, f"{pair.snr_db:g}", pair.seed])
    return meta_path


def load_dataset(dataset_dir) -> list[UtterancePair]:
    """Load a dataset directory written by save_dataset."""
    root = Path(dataset_dir)
    meta_path = root / META_NAME
    if not meta_path.is_file():
        raise FileNotFoundError(f"dataset directory {root} has no {META_NAME}")
    pairs = []
    with open(meta_path, newline="", encoding="ascii") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames != META_HEADER:
            raise ValueError(f"unexpected {META_NAME} header {reader.fieldnames}, expected {META_HEADER}")
        for row in reader:
            uid = row["id"]
            pairs.append(
                UtterancePair(
                    uid=uid,
                    clean=read_wav(root / "clean" / f"{uid}.wav"),
                    noisy=read_wav(root / "noisy" / f"{uid}.wav"),
                    noise_kind=row["noise_kind"],
                    snr_db=float(row["snr_db"]),
                    seed=int(row["seed"]),
                )
            )
    if not pairs:
        raise ValueError(f"dataset directory {root} is empty")
    return pairs
