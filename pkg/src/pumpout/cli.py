"""Command line: ``pumpout run|sweep|plot``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config, set_key, validate
from .data import FormatError
from .experiment import GAMMA_GRID, run_experiment, sweep_gamma
from .plot import emit_chart


def _load(args):
    config = load_config(args.config)
    if args.seed is not None:
        config.data.seed = args.seed
        config.train.seed = args.seed
    if args.limit is not None:
        config.data.limit = args.limit
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        set_key(config, key.strip(), value)
    validate(config)
    return config


def _fmt(v):
    return "-" if v is None else f"{v:.4f}"


def cmd_run(args) -> int:
    config = _load(args)
    out = Path(args.out) if args.out else Path("results") / f"{config.name}.csv"
    result = run_experiment(config, out)
    fin = result.final
    print(f"{config.name}: {len(result.metrics)} epochs in {result.wall_clock_s:.1f}s -> {out}")
    print(f"  test accuracy {_fmt(fin.test_accuracy)}  label precision {_fmt(fin.label_precision)}"
          f"  mean train loss {fin.mean_train_loss:.4f}")
    return 0


def cmd_sweep(args) -> int:
    config = _load(args)
    grid = [float(g) for g in args.grid.split(",") if g.strip()] if args.grid else list(GAMMA_GRID)
    out_dir = Path(args.out_dir) if args.out_dir else Path("results") / f"{config.name}_sweep"
    sweep = sweep_gamma(config, grid, out_dir=out_dir, workers=args.workers)
    for g, res in sorted(sweep.results.items()):
        mark = "*" if g == sweep.chosen_gamma else " "
        print(f"{mark} gamma={g:<6g} validation {_fmt(res.final.validation_accuracy)}  test {_fmt(res.final.test_accuracy)}")
    print(f"chosen gamma: {sweep.chosen_gamma:g} (results in {out_dir})")
    return 0


def cmd_plot(args) -> int:
    metrics = ("test_accuracy", "label_precision") if args.metric == "both" else (args.metric,)
    emit_chart(args.csv, args.output, metrics=metrics, labels=args.label, title=args.title or "")
    print(f"wrote {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pumpout", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="key = value config file")
        p.add_argument("--seed", type=int, help="overrides data.seed and train.seed")
        p.add_argument("--limit", type=int, help="cap on training samples (data.limit)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")

    p = sub.add_parser("run", help="train one configuration and write its metrics CSV")
    common(p)
    p.add_argument("-o", "--out", help="CSV path (default results/<name>.csv)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run one configuration per gamma and pick gamma on validation accuracy")
    common(p)
    p.add_argument("--grid", help="comma-separated gammas (default 0,0.001,0.005,0.01,0.05,0.1,0.5,1)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", help="SVG learning curves from metrics CSVs")
    p.add_argument("csv", nargs="+")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--metric", choices=("test_accuracy", "label_precision", "both"), default="test_accuracy")
    p.add_argument("--label", action="append", help="legend label per CSV, in order")
    p.add_argument("--title")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
