"""Command-line front end: dataset synthesis, training, evaluation, the
positional-shortcut diagnostic, and figure rendering.

Exit codes: 0 success, 2 usage or input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config, write_config
from .data import SEEN_NOISE_KIND, UNSEEN_NOISE_KIND, load_dataset, save_dataset, synth_pairs
from .encoder import EncoderConfig
from .enhancer import enhance, load_checkpoint, save_checkpoint
from .report import render_run_figures
from .signal import NOISE_KINDS, si_snr
from .train import OBJECTIVES, NonFiniteLossError, RunMetrics, diagnose_positional, train_objective

METRICS_HEADER = "step,objective,train_loss,eval_loss_seen,eval_loss_unseen,sisnr_seen_db,sisnr_unseen_db,wallclock_s"
MANIFEST_NAME = "manifest.json"


def _fmt(value: float) -> str:
    return f"{value:.12g}"


def write_metrics_csv(path, metrics: RunMetrics) -> None:
    lines = [METRICS_HEADER]
    for r in metrics.records:
        lines.append(
            ",".join(
                [
                    str(r.step),
                    metrics.objective,
                    _fmt(r.train_loss),
                    _fmt(r.eval_loss_seen),
                    _fmt(r.eval_loss_unseen),
                    _fmt(r.sisnr_seen_db),
                    _fmt(r.sisnr_unseen_db),
                    f"{r.wallclock_s:.3f}",
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _hash_dataset(dataset_dir: Path) -> dict:
    files = sorted(p for p in dataset_dir.rglob("*") if p.is_file())
    return {str(p.relative_to(dataset_dir)): _sha256(p) for p in files}


def write_manifest(out_dir: Path, run_cfg: RunConfig, artifacts: dict) -> Path:
    """Record the run: tool version, config snapshot, dataset hashes, artifacts."""
    manifest = {
        "tool": f"alignlab {__version__}",
        "config": str(artifacts["config"]),
        "artifacts": {k: str(v) for k, v in artifacts.items()},
        "datasets": {},
    }
    for label, directory in (("train", run_cfg.data_dir), ("eval", run_cfg.eval_dir)):
        if directory:
            manifest["datasets"][label] = {"dir": directory, "files": _hash_dataset(Path(directory))}
    for path in artifacts.values():
        if not Path(path).is_file():
            raise FileNotFoundError(f"manifest artifact missing: {path}")
    path = out_dir / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="ascii")
    return path


def verify_manifest(path) -> bool:
    """Re-hash every dataset file named by a manifest; True when all match."""
    manifest = json.loads(Path(path).read_text(encoding="ascii"))
    for entry in manifest.get("datasets", {}).values():
        base = Path(entry["dir"])
        for rel, expected in entry["files"].items():
            target = base / rel
            if not target.is_file() or _sha256(target) != expected:
                return False
    return True


def cmd_synth(args) -> int:
    kinds = [k.strip() for k in args.noise_kinds.split(",") if k.strip()]
    for kind in kinds:
        if kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {kind!r}, expected one of {NOISE_KINDS}")
    snr_set = [float(s) for s in args.snr_set.split(",") if s.strip()]
    pairs = synth_pairs(args.n, args.seed, noise_kinds=kinds, snr_set=snr_set)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        meta = save_dataset(pairs, out)
    except OSError as exc:
        raise OSError(f"cannot write dataset to {out}: {exc}") from None
    print(f"wrote {len(pairs)} utterance pairs to {out} ({meta})")
    return 0


def cmd_train(args) -> int:
    run_cfg = load_config(args.config)
    cfg = replace(run_cfg.train, objective=args.objective)
    run_cfg = RunConfig(train=cfg, data_dir=run_cfg.data_dir, eval_dir=run_cfg.eval_dir)
    if not run_cfg.data_dir:
        raise ValueError("config [train] section must set data_dir")
    dataset = load_dataset(run_cfg.data_dir)
    evalset = load_dataset(run_cfg.eval_dir) if run_cfg.eval_dir else None

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        params, metrics = train_objective(cfg, dataset, evalset)
    except NonFiniteLossError as exc:
        dump_path = out / "diagnostic_dump.json"
        dump_path.write_text(json.dumps(exc.context, indent=2) + "\n", encoding="ascii")
        print(f"numerical failure: {exc} (dump: {dump_path})", file=sys.stderr)
        return 3

    checkpoint = out / "checkpoint.txt"
    metrics_csv = out / "metrics.csv"
    effective_cfg = out / "effective.cfg"
    save_checkpoint(checkpoint, params)
    write_metrics_csv(metrics_csv, metrics)
    write_config(effective_cfg, run_cfg)
    write_manifest(out, run_cfg, {"checkpoint": checkpoint, "metrics": metrics_csv, "config": effective_cfg})

    last = metrics.records[-1]
    print(
        f"objective={cfg.objective} steps={last.step} final_train_loss={_fmt(last.train_loss)} "
        f"sisnr_seen_improvement_db={_fmt(last.sisnr_seen_db)} "
        f"sisnr_unseen_improvement_db={_fmt(last.sisnr_unseen_db)}"
    )
    return 0


def cmd_eval(args) -> int:
    params = load_checkpoint(args.checkpoint)
    pairs = load_dataset(args.data)
    buckets: dict[str, list[float]] = {}
    for pair in pairs:
        improvement = si_snr(enhance(params, pair.noisy), pair.clean) - si_snr(pair.noisy, pair.clean)
        buckets.setdefault(pair.noise_kind, []).append(improvement)

    condition = {SEEN_NOISE_KIND: "seen", UNSEEN_NOISE_KIND: "unseen"}
    print("condition,noise_kind,count,mean_sisnr_improvement_db")
    for kind in sorted(buckets):
        values = buckets[kind]
        print(f"{condition.get(kind, kind)},{kind},{len(values)},{_fmt(sum(values) / len(values))}")
    return 0


def cmd_diagnose(args) -> int:
    betas = [float(b) for b in args.betas.split(",") if b.strip()]
    if any(b < 0 for b in betas):
        raise ValueError("beta values must be >= 0")
    rows = []
    for beta in betas:
        cfg = EncoderConfig(beta=beta, seed=args.encoder_seed)
        # Fresh generator per beta: every beta sees the same waveform pairs.
        index = diagnose_positional(cfg, args.pairs, np.random.default_rng(args.seed))
        rows.append((beta, index))
    print("beta,shortcut_index")
    for beta, index in rows:
        print(f"{beta:g},{_fmt(index)}")
    ordered = sorted(rows)
    indices = [index for _, index in ordered]
    if any(b > a + 1e-12 for a, b in zip(indices[1:], indices)):
        print("warning: shortcut index is not monotone in beta", file=sys.stderr)
    return 0


def cmd_report(args) -> int:
    created = render_run_figures(args.run, args.out)
    for path in created:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="alignlab", description=__doc__)
    parser.add_argument("--version", action="version", version=f"alignlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="synthesize a clean/noisy dataset")
    p_synth.add_argument("--out", required=True, help="output dataset directory")
    p_synth.add_argument("--n", type=int, required=True, help="number of utterances")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--noise-kinds", default=SEEN_NOISE_KIND, help="comma list of noise kinds")
    p_synth.add_argument("--snr-set", default="0,5,10,20", help="comma list of SNRs in dB")
    p_synth.set_defaults(func=cmd_synth)

    p_train = sub.add_parser("train", help="fine-tune the enhancer against one objective")
    p_train.add_argument("--config", required=True, help="run config file")
    p_train.add_argument("--objective", required=True, choices=OBJECTIVES)
    p_train.add_argument("--out", required=True, help="run output directory")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--data", required=True, help="dataset directory")
    p_eval.set_defaults(func=cmd_eval)

    p_diag = sub.add_parser("diagnose", help="measure the positional-shortcut index")
    p_diag.add_argument("--betas", default="0,1,4", help="comma list of positional scales")
    p_diag.add_argument("--pairs", type=int, default=20, help="independent waveform pairs per beta")
    p_diag.add_argument("--seed", type=int, default=0)
    p_diag.add_argument("--encoder-seed", type=int, default=0)
    p_diag.set_defaults(func=cmd_diagnose)

    p_report = sub.add_parser("report", help="render figures from a run directory")
    p_report.add_argument("--run", required=True, help="run directory containing metrics.csv")
    p_report.add_argument("--out", default=None, help="figure output directory (default: run dir)")
    p_report.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
