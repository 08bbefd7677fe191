"""Command-line entry points.

Subcommands: gen-synth (write a synthetic dataset), run (one variant over a
seed list), ablate (all four weighting variants), eval-only (re-score a
dataset from saved checkpoints) and inspect-checkpoint.

Configuration precedence: command-line flags > config file > defaults. The
config file is flat `key = value` text using VariantConfig field names.
"""

import argparse
import dataclasses
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt
from . import pipeline
from .errors import ValidationError
from .graph import chronological_split
from .synthetic import SyntheticSpec, write_dataset
from .training import VariantConfig, evaluate_final

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3

_CONFIG_FIELDS = {f.name: f for f in dataclasses.fields(VariantConfig)}


def _parse_config_value(name: str, raw: str):
    field = _CONFIG_FIELDS[name]
    raw = raw.strip()
    if field.type in ("bool", bool):
        if raw.lower() in ("true", "1", "yes", "on"):
            return True
        if raw.lower() in ("false", "0", "no", "off"):
            return False
        raise ValidationError(f"config key {name}: expected a boolean, got {raw!r}")
    if field.type in ("int", int):
        return int(raw)
    if field.type in ("float", float):
        return float(raw)
    if field.type in ("tuple", tuple):
        return tuple(int(x) for x in raw.split(",") if x.strip())
    raise ValidationError(f"config key {name} has unsupported type {field.type}")


def read_config_file(path) -> dict:
    values = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _CONFIG_FIELDS:
            raise ValidationError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = _parse_config_value(key, raw)
    return values


def _add_config_flags(parser):
    group = parser.add_argument_group("model configuration (override file/defaults)")
    group.add_argument("--config", type=str, default=None,
                       help="flat key=value config file")
    for name, field in _CONFIG_FIELDS.items():
        flag = "--" + name.replace("_", "-")
        if field.type in ("bool", bool):
            group.add_argument(flag, type=str, default=None, metavar="BOOL")
        elif field.type in ("int", int):
            group.add_argument(flag, type=int, default=None)
        elif field.type in ("float", float):
            group.add_argument(flag, type=float, default=None)
        else:
            group.add_argument(flag, type=str, default=None, metavar="INTS")


def build_config(args) -> VariantConfig:
    values = {}
    if args.config:
        values.update(read_config_file(args.config))
    for name, field in _CONFIG_FIELDS.items():
        raw = getattr(args, name, None)
        if raw is None:
            continue
        if isinstance(raw, str):
            values[name] = _parse_config_value(name, raw)
        else:
            values[name] = raw
    return VariantConfig(**values)


def _add_dataset_flags(parser):
    parser.add_argument("--edges", required=True, help="edge CSV (u_id,v_id,weight,timestamp)")
    parser.add_argument("--u-features", required=True, help="U feature CSV (id,f1,...)")
    parser.add_argument("--v-features", required=True, help="V feature CSV (id,f1,...)")


def _parse_seeds(raw: str) -> list:
    seeds = [int(s) for s in raw.replace(",", " ").split()]
    if not seeds:
        raise ValidationError("seed list is empty")
    return seeds


def cmd_gen_synth(args) -> int:
    spec = SyntheticSpec(
        n_u=args.n_u, n_v=args.n_v, n_edges=args.n_edges,
        weight_skew=args.weight_skew,
        block_structure=not args.no_blocks,
        n_blocks=args.n_blocks, intra_prob=args.intra_prob,
        time_span=args.time_span, seed=args.seed,
    )
    paths = write_dataset(spec, args.out_dir)
    print(json.dumps(paths, indent=2))
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = build_config(args)
    graph, ds_hash = pipeline.load_dataset(args.edges, args.u_features, args.v_features)
    seeds = _parse_seeds(args.seeds)
    report = pipeline.run_dataset(graph, cfg, seeds, args.out_dir, ds_hash,
                                  workers=args.workers)
    for seed, values in zip(report.seeds, report.per_seed):
        print(f"seed {seed}: " + "  ".join(f"{k}={v:.4f}" for k, v in sorted(values.items())))
    for name, cell in sorted(report.aggregate.items()):
        print(f"{name}: {cell['mean']:.4f} ± {cell['std']:.4f}")
    print(f"report written to {Path(args.out_dir) / 'report.json'}")
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = build_config(args)
    graph, ds_hash = pipeline.load_dataset(args.edges, args.u_features, args.v_features)
    seeds = _parse_seeds(args.seeds)
    summary = pipeline.run_ablation(graph, cfg, seeds, args.out_dir, ds_hash,
                                    workers=args.workers)
    for label, auc in sorted(summary["mean_roc_auc"].items()):
        print(f"{label}: mean roc_auc {auc:.4f}")
    print(f"max pairwise roc_auc gap: {summary['max_pairwise_roc_auc_gap']:.4f}")
    print(f"table written to {Path(args.out_dir) / 'ablation.csv'}")
    return EXIT_OK


def cmd_eval_only(args) -> int:
    state, meta = ckpt.load_model_state(args.model)
    dec, _ = ckpt.load_decoder(args.decoder)
    cfg = VariantConfig(**{k: v for k, v in meta.get("config", {}).items()
                           if k in _CONFIG_FIELDS})
    graph, ds_hash = pipeline.load_dataset(args.edges, args.u_features, args.v_features)
    split = chronological_split(graph)
    metrics, info = evaluate_final(state, split, dec, cfg, args.seed)
    payload = {"dataset_hash": ds_hash, "seed": args.seed,
               "variant": cfg.variant_label, "metrics": metrics, "eval_info": info}
    out = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(out + "\n", encoding="utf-8")
    print(out)
    return EXIT_OK


def cmd_inspect_checkpoint(args) -> int:
    arrays, meta = ckpt.load_arrays(args.path)
    print(json.dumps(meta, indent=2, sort_keys=True))
    total = 0
    for name in sorted(arrays):
        a = arrays[name]
        digest = hashlib.sha256(np.ascontiguousarray(a).tobytes()).hexdigest()[:12]
        print(f"{name}  shape={a.shape}  dtype={a.dtype}  sha256={digest}")
        total += a.size
    print(f"total values: {total}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bilink",
        description="Self-supervised link prediction on weighted bipartite graphs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", help="write a synthetic planted-block dataset")
    p.add_argument("--n-u", type=int, default=200)
    p.add_argument("--n-v", type=int, default=300)
    p.add_argument("--n-edges", type=int, default=4000)
    p.add_argument("--weight-skew", type=int, default=1,
                   help="power-law weight cap; 1 means unweighted")
    p.add_argument("--no-blocks", action="store_true",
                   help="uniform random edges (no learnable structure)")
    p.add_argument("--n-blocks", type=int, default=10)
    p.add_argument("--intra-prob", type=float, default=0.95)
    p.add_argument("--time-span", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("run", help="train and evaluate one variant over a seed list")
    _add_dataset_flags(p)
    p.add_argument("--seeds", default="42,43,44,45,46")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("ablate", help="run all four weighting variants")
    _add_dataset_flags(p)
    p.add_argument("--seeds", default="42,43,44,45,46")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("eval-only", help="re-evaluate saved checkpoints on a dataset")
    _add_dataset_flags(p)
    p.add_argument("--model", required=True, help="model checkpoint (.npz)")
    p.add_argument("--decoder", required=True, help="decoder checkpoint (.npz)")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", default=None, help="optional JSON output path")
    p.set_defaults(func=cmd_eval_only)

    p = sub.add_parser("inspect-checkpoint", help="list checkpoint contents")
    p.add_argument("path")
    p.set_defaults(func=cmd_inspect_checkpoint)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # runtime failures get a distinct code
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
