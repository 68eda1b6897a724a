"""Command-line entry point.

    prescore-attn theorem1 --config configs/theorem1.yaml --out runs/t1
    prescore-attn run --config configs/coverage.yaml --threads 4
    prescore-attn attend --q q.pamx --k k.pamx --v v.pamx --s 256 --out o.pamx

Exit status: 0 when every threshold passes, 2 on a threshold failure,
1 on any error (bad config, I/O, numerics).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .cluster import Method, PreScoreConfig
from .errors import ConfigError, PrescoreError
from .experiments import GRID_DEFAULTS, config_from_dict, load_config, run_experiment
from .hyper import HyperConfig, PreScoredConfig, prescored_hyper_attention
from .matrix import load_matrix, make_rng, save_labels, save_matrix
from .planted import PlantedConfig, generate_planted

log = logging.getLogger("prescore_attn")

EXIT_OK, EXIT_ERROR, EXIT_THRESHOLD = 0, 1, 2

DEFAULT_SEEDS = {"start": 0, "count": 20}


def _seed_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.replace(" ", "").split(",") if tok]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}") from None


def _add_run_flags(p: argparse.ArgumentParser, need_config: bool = False) -> None:
    p.add_argument("--config", required=need_config, help="YAML experiment config")
    p.add_argument("--out", help="output directory (default: the config's output_path)")
    p.add_argument("--threads", type=int, default=1, help="worker threads for grid points")
    p.add_argument("--seed-override", type=_seed_list, help="comma-separated seeds replacing the config's list")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prescore-attn", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in GRID_DEFAULTS:
        p = sub.add_parser(name.lower().replace("_", "-"), help=f"run the {name} experiment")
        _add_run_flags(p)
        p.set_defaults(experiment=name)

    p = sub.add_parser("run", help="run the experiment named in the config")
    _add_run_flags(p, need_config=True)
    p.set_defaults(experiment=None)

    p = sub.add_parser("generate", help="write a planted key matrix and its labels")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--c-s", type=float, default=0.1)
    p.add_argument("--c-n", type=float, default=0.1)
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="matrix path; labels go to <out>.labels")

    p = sub.add_parser("attend", help="pre-scored attention on matrices stored in PAMX files")
    p.add_argument("--q", required=True)
    p.add_argument("--k", required=True)
    p.add_argument("--v", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--method", default="KMEANS", choices=[m.value for m in Method])
    p.add_argument("--clusters", type=int, default=2)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--block-size", type=int, default=64)
    p.add_argument("--lsh-bits", type=int, default=8)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _experiment_config(args):
    if args.config:
        cfg = load_config(args.config, args.experiment)
    else:
        cfg = config_from_dict({"experiment": args.experiment, "seeds": DEFAULT_SEEDS})
    if args.seed_override:
        doc = {"schema": cfg.schema, "experiment": cfg.experiment, "seeds": args.seed_override,
               "output_path": cfg.output_path, "grid": cfg.grid, "thresholds": cfg.thresholds}
        cfg = config_from_dict(doc)
    if args.threads < 1:
        raise ConfigError("must be >= 1", "--threads")
    return cfg


def _run(args) -> int:
    cfg = _experiment_config(args)
    out = args.out or cfg.output_path
    log.info("running %s: %d grid points x %d seeds -> %s", cfg.experiment, len(cfg.points()), len(cfg.seeds), out)
    summary = run_experiment(cfg, out, threads=args.threads)
    print(json.dumps({"experiment": cfg.experiment, "passed": summary["passed"], "checks": summary["checks"]}))
    return EXIT_OK if summary["passed"] else EXIT_THRESHOLD


def _generate(args) -> int:
    cfg = PlantedConfig(n=args.n, d=args.d, epsilon=args.epsilon, c_S=args.c_s, c_N=args.c_n,
                        normalize=args.normalize, seed=args.seed)
    inst = generate_planted(cfg, make_rng(args.seed))
    save_matrix(args.out, inst.matrix)
    save_labels(args.out + ".labels", inst.labels)
    return EXIT_OK


def _attend(args) -> int:
    q, k, v = load_matrix(args.q), load_matrix(args.k), load_matrix(args.v)
    cfg = PreScoredConfig(
        prescore=PreScoreConfig(method=Method(args.method), k=args.clusters, s=args.s, seed=args.seed),
        hyper=HyperConfig(lsh_bits=args.lsh_bits, block_size=args.block_size, seed=args.seed),
        delta=args.delta)
    res = prescored_hyper_attention(q, k, v, cfg, make_rng(args.seed, 1))
    save_matrix(args.out, res.out)
    print(json.dumps({"keys_retained": res.keys_retained, "blocks_evaluated": res.blocks_evaluated,
                      "fallback": res.fallback, "wall_time": round(res.wall_time, 6),
                      "max_abs_out": float(np.abs(res.out).max())}))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "generate":
            return _generate(args)
        if args.command == "attend":
            return _attend(args)
        return _run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(exc, file=sys.stderr)
        return EXIT_ERROR
    except (PrescoreError, ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
