"""Command line entry point: ``risota {run,sweep,bound,gen-fixtures}``.

Exit status is 0 on success; failures map onto the ``exit_code`` of the
raised error class (2 configuration, 3 geometry, 5 data, 6 data I/O,
7 output, 8 numerical, 10 incomplete logs, 1 anything else).
"""

import argparse
import dataclasses
import logging
import os
import sys

import numpy as np

from .data import load_mnist_subset, split_per_class, synthesize, to_idx_images, write_idx
from .exceptions import ConfigurationError, RisotaError
from .harness import ExperimentConfig, ensure_writable, recompute_bounds, run_experiment
from .rng import stream

log = logging.getLogger("risota")


def _config(args):
    cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seeds=[args.seed])
    return cfg


def cmd_run(args, sweep=False):
    cfg = _config(args)
    cells = run_experiment(cfg, args.out, sweep=sweep, threads=args.threads)
    for c in cells:
        acc = c.logs[-1].accuracy
        log.info("seed=%d algorithm=%s N=%d final_accuracy=%s", c.seed, c.algorithm,
                 c.n_elements, "n/a" if acc is None else f"{acc:.4f}")
    print(os.path.join(args.out, "metrics.csv"))
    return 0


def cmd_bound(args):
    print(recompute_bounds(args.out))
    return 0


def cmd_gen_fixtures(args):
    ensure_writable(args.out)
    if args.source == "mnist-subset":
        train, test = split_per_class(load_mnist_subset(), 400)
    else:
        cfg = _config(args)
        seed = cfg.seeds[0]
        full = synthesize(cfg.n_clients, cfg.synthetic_per_class, cfg.synthetic_features,
                          cfg.synthetic_separation, stream(seed, "synthetic"))
        train, test = split_per_class(full, cfg.synthetic_per_class * 4 // 5)
    for prefix, ds in (("train", train), ("t10k", test)):
        write_idx(os.path.join(args.out, f"{prefix}-images-idx3-ubyte"),
                  to_idx_images(ds.features))
        write_idx(os.path.join(args.out, f"{prefix}-labels-idx1-ubyte"),
                  ds.labels.astype(np.uint8))
    print(args.out)
    return 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat TOML experiment config")
    common.add_argument("--seed", type=int, help="run only this seed")
    common.add_argument("--out", metavar="DIR", default="results", help="output directory")
    common.add_argument("--threads", type=int, default=1, help="parallel grid cells")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="risota", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="run one configuration")
    sub.add_parser("sweep", parents=[common], help="run the n_elements_sweep grid")
    sub.add_parser("bound", parents=[common], help="recompute bounds.csv from logs in --out")
    fx = sub.add_parser("gen-fixtures", parents=[common], help="write IDX train/test files")
    fx.add_argument("--source", choices=("synthetic", "mnist-subset"), default="synthetic")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.threads < 1:
            raise ConfigurationError("--threads must be >= 1")
        if args.command == "run":
            return cmd_run(args)
        if args.command == "sweep":
            return cmd_run(args, sweep=True)
        if args.command == "bound":
            return cmd_bound(args)
        return cmd_gen_fixtures(args)
    except RisotaError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
