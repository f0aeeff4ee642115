#!/usr/bin/env python3
"""Desk-scale learning curves: every algorithm on the symmetric-50% and pair-45% blob setups.

Writes one metrics CSV per (setup, algorithm, seed) and two SVG charts per seed
(test accuracy, label precision) under ``--out``.

    python3 scripts/run_desk_experiments.py --seeds 0 1 2 --out results/desk
"""

import argparse
import copy
from pathlib import Path

from pumpout.config import load_config
from pumpout.experiment import run_experiment, sweep_gamma
from pumpout.plot import emit_chart

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
SETUPS = {
    "sym50": (CONFIGS / "blobs_sym50_pumpout_sl.cfg", ("standard", "mentornet_lite", "pumpout_sl")),
    "pair45": (CONFIGS / "blobs_pair45_pumpout_bc.cfg", ("standard", "bc", "nnbc", "pumpout_bc")),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--epochs", type=int, help="override train.epochs")
    ap.add_argument("--out", default="results/desk")
    ap.add_argument("--sweep", action="store_true", help="choose gamma for pumpout_bc by validation sweep")
    args = ap.parse_args()
    out = Path(args.out)

    for setup, (path, algorithms) in SETUPS.items():
        base = load_config(path)
        for seed in args.seeds:
            csvs = []
            for alg in algorithms:
                cfg = copy.deepcopy(base)
                cfg.data.seed = cfg.train.seed = seed
                cfg.noise.seed = None
                cfg.train.algorithm = alg
                if args.epochs:
                    cfg.train.epochs = args.epochs
                cfg.name = f"{setup}_{alg}_s{seed}"
                if alg == "pumpout_bc" and args.sweep:
                    sweep = sweep_gamma(cfg, out_dir=out / f"{cfg.name}_sweep")
                    cfg.train.gamma = sweep.chosen_gamma
                csv_path = out / f"{cfg.name}.csv"
                res = run_experiment(cfg, csv_path)
                csvs.append(csv_path)
                print(f"{cfg.name}: test accuracy {res.final.test_accuracy:.4f}")
            labels = list(algorithms)
            emit_chart(csvs, out / f"{setup}_s{seed}_test_accuracy.svg", labels=labels,
                       title=f"{setup}, seed {seed}: test accuracy")
            if setup == "sym50":
                emit_chart(csvs, out / f"{setup}_s{seed}_label_precision.svg", metrics=("label_precision",),
                           labels=labels, title=f"{setup}, seed {seed}: label precision")


if __name__ == "__main__":
    main()
