"""Running configured experiments and gamma sweeps, with CSV persistence."""

from __future__ import annotations

import copy
import csv
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

from . import noise
from .config import ConfigError, ExperimentConfig, load_config
from .data import DataSplits, inject_noise, load_idx_mnist, split_validation, synth_blobs
from .trainers import EpochMetrics, train

log = logging.getLogger(__name__)

CSV_COLUMNS = ("epoch", "test_accuracy", "label_precision", "mean_train_loss", "wall_clock_s")
GAMMA_GRID = (0.0, 0.001, 0.005, 0.01, 0.05, 0.1, 0.5, 1.0)


@dataclass
class ExperimentResult:
    config: dict
    metrics: list[EpochMetrics] = field(default_factory=list)
    wall_clock_s: float = 0.0
    csv_path: Optional[Path] = None

    @property
    def final(self) -> EpochMetrics:
        return self.metrics[-1]


def build_matrix(config: ExperimentConfig) -> noise.TransitionMatrix | None:
    n, k = config.noise, (10 if config.data.source == "mnist" else config.data.classes)
    try:
        if n.type == "none":
            return None
        if n.type == "pair":
            return noise.pair_flip(k, n.rate, allow_majority_noise=n.allow_majority)
        if n.type == "symmetry":
            return noise.symmetry_flip(k, n.rate)
        T = noise.load_matrix(n.matrix)
    except (ValueError, OSError) as exc:
        raise ConfigError(f"noise: {exc}") from None
    if T.k != k:
        raise ConfigError(f"noise.matrix: {T.k} classes but the data has {k}")
    return T


def build_data(config: ExperimentConfig) -> DataSplits:
    """Clean splits for ``config``; training set capped at ``data.limit``."""
    d = config.data
    if d.source == "blobs":
        splits = synth_blobs(d.classes, d.per_class, d.dim, d.spread, d.seed, d.separation,
                             d.val_fraction, d.test_fraction)
        if d.limit is not None:
            splits.train = _head(splits.train, d.limit)
        return splits
    full = load_idx_mnist(d.train_images, d.train_labels, d.limit, split="train")
    tr, val = split_validation(full, d.val_fraction, d.seed)
    test = load_idx_mnist(d.test_images, d.test_labels, d.test_limit, split="test")
    return DataSplits(tr, val, test)


def _head(ds, n):
    return replace(ds, features=ds.features[:n], clean_labels=ds.clean_labels[:n], noisy_labels=ds.noisy_labels[:n])


def _fmt(v) -> str:
    return "" if v is None else format(v, ".10g")


def run_experiment(config, csv_path=None) -> ExperimentResult:
    """Build data, inject noise, train, and append one CSV row per epoch as it finishes."""
    if not isinstance(config, ExperimentConfig):
        config = load_config(config)
    tc = config.train_config()
    T = build_matrix(config)
    data = build_data(config)
    if T is not None:
        data = inject_noise(data, T, config.noise_seed)

    result = ExperimentResult(config=config.flat())
    start = time.perf_counter()
    handle = None
    writer = None
    if csv_path is not None:
        csv_path = Path(csv_path)
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        handle = open(csv_path, "w", newline="")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        handle.flush()
        result.csv_path = csv_path

    def on_epoch(row: EpochMetrics):
        result.metrics.append(row)
        if writer is not None:
            elapsed = time.perf_counter() - start
            writer.writerow([row.epoch, _fmt(row.test_accuracy), _fmt(row.label_precision),
                             _fmt(row.mean_train_loss), f"{elapsed:.3f}"])
            handle.flush()

    try:
        train(tc, data, T, on_epoch=on_epoch)
    finally:
        if handle is not None:
            handle.close()
    result.wall_clock_s = time.perf_counter() - start
    log.info("%s: final test accuracy %s", config.name, _fmt(result.final.test_accuracy))
    return result


@dataclass
class SweepResult:
    chosen_gamma: float
    results: dict[float, ExperimentResult]

    def validation_accuracy(self, gamma: float) -> float:
        return self.results[gamma].final.validation_accuracy


def _run_one(args):
    config, csv_path = args
    return run_experiment(config, csv_path)


def sweep_gamma(
    base: ExperimentConfig,
    grid: Sequence[float] = GAMMA_GRID,
    out_dir=None,
    workers: int = 1,
) -> SweepResult:
    """One run per gamma; keep the gamma with the best final validation accuracy (ties: smaller gamma)."""
    grid = sorted(set(float(g) for g in grid))
    if not grid:
        raise ConfigError("sweep grid is empty")
    jobs = []
    for g in grid:
        cfg = copy.deepcopy(base)
        cfg.train.gamma = g
        cfg.name = f"{base.name}_gamma{g:g}"
        cfg.train_config()
        jobs.append((cfg, None if out_dir is None else Path(out_dir) / f"{cfg.name}.csv"))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            runs = list(pool.map(_run_one, jobs))
    else:
        runs = [_run_one(j) for j in jobs]
    results = dict(zip(grid, runs))
    if any(r.final.validation_accuracy is None for r in runs):
        raise ConfigError("gamma sweep needs a non-empty validation split (data.val_fraction > 0)")
    best = max(grid, key=lambda g: (results[g].final.validation_accuracy, -g))
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        with open(Path(out_dir) / f"{base.name}_sweep.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("gamma", "validation_accuracy", "test_accuracy", "chosen"))
            for g in grid:
                fin = results[g].final
                w.writerow((_fmt(g), _fmt(fin.validation_accuracy), _fmt(fin.test_accuracy), int(g == best)))
    return SweepResult(best, results)
