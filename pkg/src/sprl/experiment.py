"""Seeded experiment orchestration: dataset, noise, training runs, CSV output."""
from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import curriculum as cur
from .curriculum import ConfigError
from .data import Dataset, load_csv, load_idx, make_blobs, write_csv
from .losses import resistance_loss
from .noise import NoiseSpec, corrupt, model_generated_noise
from .numeric import make_rng
from .trainer import (METHODS, EpochMetrics, TrainConfig, TrainerState, fit, last10, run_epoch,
                      warmup_epoch)

log = logging.getLogger(__name__)

SUMMARY_COLUMNS = ("method", "last10_avg_acc", "max_acc", "final_noise_rate_realized",
                   "per_epoch_csv", "best_val_epoch", "weak_model_acc")


@dataclass
class RunSummary:
    method: str
    last10_avg_acc: float
    max_acc: float
    final_noise_rate_realized: float
    per_epoch_csv_path: str
    best_val_epoch: int | None = None
    m: int | None = None
    weak_model_acc: float | None = None

    def csv_row(self) -> list:
        best = "" if self.best_val_epoch is None else self.best_val_epoch
        weak = "" if self.weak_model_acc is None else self.weak_model_acc
        return [self.method, self.last10_avg_acc, self.max_acc, self.final_noise_rate_realized,
                self.per_epoch_csv_path, best, weak]


def check_args(args) -> list[str]:
    """Reject inconsistent flags before any data is loaded or trained."""
    methods = [m.strip() for m in args.method.split(",") if m.strip()]
    if not methods:
        raise ConfigError("--method is empty")
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise ConfigError(f"unknown method(s) {bad}; choose from {', '.join(METHODS)}")
    if len(set(methods)) != len(methods):
        raise ConfigError("--method lists a method twice")
    if args.dataset == "idx" and not (args.idx_images and args.idx_labels):
        raise ConfigError("--dataset idx needs --idx-images and --idx-labels")
    if args.dataset == "csv" and not args.csv_features:
        raise ConfigError("--dataset csv needs --csv-features")
    if args.dataset != "idx" and (args.idx_images or args.idx_labels or args.limit is not None):
        raise ConfigError("--idx-* / --limit only apply to --dataset idx")
    if args.dataset != "csv" and (args.csv_features or args.csv_labels):
        raise ConfigError("--csv-* only apply to --dataset csv")
    if args.noise in ("symmetric", "pair") and args.rate is None:
        raise ConfigError(f"--noise {args.noise} needs --rate")
    if args.noise in ("none", "model") and args.rate is not None:
        raise ConfigError(f"--rate has no meaning with --noise {args.noise}")
    if not 0 <= args.val_fraction < 1:
        raise ConfigError("--val-fraction must lie in [0, 1)")
    if args.noise == "model" and not 0 < args.weak_fraction <= 1:
        raise ConfigError("--weak-fraction must lie in (0, 1]")
    return methods


def train_config(args, method: str) -> TrainConfig:
    return TrainConfig(epochs=args.epochs, t1=args.t1, k=args.k, gamma_d=args.gamma_d, m=args.m,
                       epsilon_known=args.epsilon_known, batch_size=args.batch, lr=args.lr,
                       seed=args.seed, method=method, augment_sigma=args.augment_sigma,
                       hidden=tuple(args.hidden))


def build_dataset(args) -> Dataset:
    if args.dataset == "blobs":
        return make_blobs(args.blobs_n, args.blobs_c, args.blobs_d, args.separation, seed=args.seed)
    if args.dataset == "idx":
        return load_idx(args.idx_images, args.idx_labels, limit=args.limit, seed=args.seed)
    return load_csv(args.csv_features, args.csv_labels, seed=args.seed)


def add_noise(dataset: Dataset, args):
    """Returns ``(noisy dataset, weak model accuracy or None)``."""
    if args.noise == "model":
        weak = train_config(args, "standard")
        noisy, acc = model_generated_noise(dataset, args.weak_fraction, weak, args.seed)
        print(f"weak model test accuracy {acc:.4f}, labelled fraction {args.weak_fraction}")
        return dataset.with_noisy_labels(noisy), acc
    kind = "none" if args.noise == "none" else args.noise
    return corrupt(dataset, NoiseSpec(kind, args.rate or 0.0, args.seed)), None


def _write_history(path: Path, history) -> None:
    write_csv(path, EpochMetrics.CSV_COLUMNS, (m.csv_row() for m in history))


def _one_run(job):
    config, dataset, val, out = job
    history, state = fit(config, dataset, val)
    run_dir = out / config.method
    run_dir.mkdir(parents=True, exist_ok=True)
    path = run_dir / "epochs.csv"
    _write_history(path, history)
    best_val = None
    if val is not None:
        accs = [m.val_accuracy for m in history]
        best_val = int(history[int(np.argmax(accs))].epoch)
    m = state.pace.m if state.pace is not None else None
    return RunSummary(method=config.method, last10_avg_acc=last10(history),
                      max_acc=float(max(h.test_accuracy for h in history)),
                      final_noise_rate_realized=dataset.noise_rate(),
                      per_epoch_csv_path=str(path.relative_to(out)), best_val_epoch=best_val, m=m)


def worker_slots() -> int:
    raw = os.environ.get("SPRL_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"SPRL_THREADS={raw!r} is not an integer") from None


def emit_schedules(out: Path, config: TrainConfig, n: int, m: int) -> None:
    """Two-column ``t,value`` CSVs of the curriculum size and regulariser weight."""
    pace = replace(config.pace(n), m=m)
    pace.validate()
    ts = range(1, config.epochs + 1)
    write_csv(out / "schedule_delta.csv", ["t", "delta"], ([t, cur.delta(t, pace)] for t in ts))
    write_csv(out / "schedule_gamma.csv", ["t", "gamma"], ([t, cur.gamma(t, pace)] for t in ts))


def run_experiment(args) -> list[RunSummary]:
    """Build data, corrupt labels, train each method and write CSVs under ``args.out``.

    Layout: ``<out>/<method>/epochs.csv`` per run, ``<out>/summary.csv`` and,
    with ``emit_schedules``, ``<out>/schedule_delta.csv`` / ``schedule_gamma.csv``.
    """
    methods = check_args(args)
    slots = worker_slots()
    dataset = build_dataset(args)
    configs = [train_config(args, m) for m in methods]
    n_train = dataset.n - int(round(args.val_fraction * dataset.n))
    for cfg in configs:
        cfg.validate(n_train)
    dataset, weak_acc = add_noise(dataset, args)
    val = None
    if args.val_fraction > 0:
        dataset, vx, vy = dataset.split_validation(args.val_fraction, args.seed)
        val = (vx, vy)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(cfg, dataset, val, out) for cfg in configs]
    if slots > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(slots, len(jobs))) as pool:
            summaries = list(pool.map(_one_run, jobs))
    else:
        summaries = [_one_run(job) for job in jobs]
    for s in summaries:
        s.weak_model_acc = weak_acc
    write_csv(out / "summary.csv", SUMMARY_COLUMNS, (s.csv_row() for s in summaries))
    if args.emit_schedules:
        m = args.m
        if m is None:
            m = next((s.m for s in summaries if s.m is not None), None)
        if m is None:
            m = cur.choose_m([0], dataset.n, args.epsilon_known)
        emit_schedules(out, configs[0], dataset.n, m)
    print(f"dataset {dataset.name}: n={dataset.n} d={dataset.d} c={dataset.c} "
          f"noise rate {dataset.noise_rate():.4f}")
    for s in summaries:
        line = f"{s.method:>13}  last10 {s.last10_avg_acc:.4f}  max {s.max_acc:.4f}"
        if s.best_val_epoch is not None:
            line += f"  best-val epoch {s.best_val_epoch} (try --t1 {s.best_val_epoch})"
        print(line)
    return summaries


def uniformization_run(n: int = 1000, c: int = 10, d: int = 20, ce_epochs: int = 100,
                       resistance_epochs: int = 200, hidden=(256, 256), augment_sigma: float = 0.3,
                       seed: int = 0):
    """Random-label run: CE first, then the resistance term alone.

    Features are standard normal and labels uniform over ``c`` classes. In the
    second phase each epoch targets the predictions recorded in the epoch
    before it. Returns the per-epoch mean training loss of both phases.
    """
    rng = make_rng(seed, "init")
    x = rng.standard_normal((n, d))
    y = rng.integers(0, c, n)
    ds = Dataset(x, y, x[:c], y[:c], c, "random_labels")
    total = ce_epochs + resistance_epochs
    cfg = TrainConfig(epochs=total, t1=ce_epochs, hidden=tuple(hidden), seed=seed,
                      method="standard", augment_sigma=augment_sigma)
    state = TrainerState.create(cfg, ds)
    ce_losses = [warmup_epoch(state, ds, cfg, t).train_loss for t in range(1, ce_epochs + 1)]
    res_losses = []
    for t in range(ce_epochs + 1, total + 1):
        prev = state.memory.probs.copy()

        def batch_loss(idx, probs):
            value, grad = resistance_loss(probs, prev[idx])
            return float(np.mean(value)), grad / len(idx)

        res_losses.append(run_epoch(state, ds, cfg, t, batch_loss))
    return ce_losses, res_losses
