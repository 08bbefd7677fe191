"""End-to-end runs: split, pretrain, freeze, decode, evaluate, report.

A run directory is self-describing: dataset hash, full config and seed are
recorded in the manifest, and rerunning the same spec reproduces the metric
report byte-for-byte (wall-clock timings live in a separate manifest field).
"""

import dataclasses
import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt
from . import metrics as mt
from .errors import ValidationError
from .graph import (BipartiteGraph, aggregate_pairs, chronological_split,
                    complement_size, load_graph, sample_negatives)
from .model import state_checksum
from .rng import child_seed
from .training import (ALL_VARIANTS, VariantConfig, evaluate_final,
                       extract_embeddings, pretrain, train_decoder)

DEFAULT_SEEDS = (42, 43, 44, 45, 46)


def dataset_hash(paths: dict) -> str:
    h = hashlib.sha256()
    for key in sorted(paths):
        h.update(key.encode())
        h.update(Path(paths[key]).read_bytes())
    return h.hexdigest()


def _seed_int(root, *tags) -> int:
    return int(child_seed(root, *tags).generate_state(1)[0])


def run_seed(split, cfg: VariantConfig, seed: int) -> dict:
    """One full two-phase run for a single seed. Returns a manifest dict."""
    t0 = time.monotonic()
    state, trace = pretrain(split, cfg, seed)
    checksum_before = state_checksum(state)

    emb = extract_embeddings(state, split.train, cfg, provenance="train")
    vu, vv, vw = aggregate_pairs(split.val_edges, split.train.n_v, use_weights=True)
    if len(vu) == 0:
        raise ValidationError("validation era has no pairs; cannot train decoder")
    positives = np.stack([vu, vv], axis=1)

    pool_target = int(np.ceil(cfg.decoder_negative_pool_factor * len(positives)))
    pool_size = min(pool_target, complement_size(split))
    if pool_size < 2:
        raise ValidationError("complement too small to sample a negative pool")
    negatives = sample_negatives(split, pool_size, _seed_int(seed, "decoder-pool"))

    dec, record = train_decoder(emb, positives, vw, negatives, cfg,
                                _seed_int(seed, "decoder"))
    checksum_after = state_checksum(state)
    metrics, info = evaluate_final(state, split, dec, cfg, seed)

    return {
        "seed": seed,
        "variant": cfg.variant_label,
        "config": dataclasses.asdict(cfg),
        "pretrain_trace": trace,
        "decoder": {
            "best_epoch": record.best_epoch,
            "best_monitor_hits": record.best_hits,
            "epochs_run": record.epochs_run,
            "monitor_history": record.monitor_history,
        },
        "encoder_checksum_before_decoder": checksum_before,
        "encoder_checksum_after_decoder": checksum_after,
        "metrics": metrics,
        "eval_info": info,
        "_state": state,
        "_decoder": dec,
        "_elapsed_seconds": time.monotonic() - t0,
    }


def _manifest_json(result: dict, ds_hash: str) -> dict:
    out = {k: v for k, v in result.items() if not k.startswith("_")}
    out["dataset_hash"] = ds_hash
    out["timing"] = {"elapsed_seconds": result["_elapsed_seconds"]}
    return out


def _run_seed_for_pool(args):
    graph, cfg, seed = args
    split = chronological_split(graph)
    return run_seed(split, cfg, seed)


def run_dataset(graph: BipartiteGraph, cfg: VariantConfig, seeds,
                out_dir, ds_hash: str, workers: int = 1,
                save_checkpoints: bool = True) -> mt.EvalReport:
    """Run every seed, write per-seed manifests/checkpoints and the
    aggregate report. Per-seed failures are recorded; other seeds proceed."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    split = chronological_split(graph)

    results, failures = [], []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [(seed, pool.submit(_run_seed_for_pool, (graph, cfg, seed)))
                       for seed in seeds]
            for seed, fut in futures:
                try:
                    results.append(fut.result())
                except Exception as exc:
                    failures.append({"seed": seed, "error": str(exc)})
    else:
        for seed in seeds:
            try:
                results.append(run_seed(split, cfg, seed))
            except Exception as exc:
                failures.append({"seed": seed, "error": str(exc)})

    for result in results:
        seed_dir = out_dir / f"seed_{result['seed']}"
        seed_dir.mkdir(exist_ok=True)
        with open(seed_dir / "manifest.json", "w", encoding="utf-8") as fh:
            json.dump(_manifest_json(result, ds_hash), fh, indent=2, sort_keys=True)
            fh.write("\n")
        if save_checkpoints:
            ckpt.save_model_state(seed_dir / "model.npz", result["_state"],
                                  {"config": result["config"], "seed": result["seed"]})
            ckpt.save_decoder(seed_dir / "decoder.npz", result["_decoder"],
                              {"config": result["config"], "seed": result["seed"]})

    if failures and not results:
        raise ValidationError(f"all seeds failed: {failures}")

    per_seed = [r["metrics"] for r in results]
    ok_seeds = [r["seed"] for r in results]
    if len(results) >= 2:
        report = mt.aggregate(ok_seeds, per_seed)
    else:
        report = mt.EvalReport(seeds=ok_seeds, per_seed=per_seed, aggregate={})

    payload = report.to_dict()
    payload["variant"] = cfg.variant_label
    payload["dataset_hash"] = ds_hash
    if failures:
        payload["failures"] = failures
    with open(out_dir / "report.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_report_csv(out_dir / "report.csv", {cfg.variant_label: report})
    return report


def write_report_csv(path, reports: dict) -> None:
    """One row per variant, six metric columns formatted 'mean ± std'."""
    import csv as _csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["variant"] + list(mt.METRIC_NAMES))
        for label, report in reports.items():
            row = [label]
            for name in mt.METRIC_NAMES:
                if report.aggregate:
                    cell = (f"{report.aggregate[name]['mean']:.4f} ± "
                            f"{report.aggregate[name]['std']:.4f}")
                elif report.per_seed:
                    cell = f"{report.per_seed[0][name]:.4f}"
                else:
                    cell = "n/a"
                row.append(cell)
            writer.writerow(row)


def run_ablation(graph: BipartiteGraph, base_cfg: VariantConfig, seeds,
                 out_dir, ds_hash: str, workers: int = 1) -> dict:
    """All four weighting variants over the seed list.

    Emits a four-row comparison CSV plus a JSON summary flagging the
    maximum pairwise gap in mean ROC-AUC across variants.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    reports = {}
    for flags in ALL_VARIANTS:
        cfg = base_cfg.replace(**flags)
        sub_dir = out_dir / cfg.variant_label
        reports[cfg.variant_label] = run_dataset(
            graph, cfg, seeds, sub_dir, ds_hash, workers=workers,
            save_checkpoints=False)

    def mean_auc(report):
        if report.aggregate:
            return report.aggregate["roc_auc"]["mean"]
        return report.per_seed[0]["roc_auc"]

    aucs = {label: mean_auc(rep) for label, rep in reports.items()}
    gap = max(aucs.values()) - min(aucs.values())
    summary = {
        "dataset_hash": ds_hash,
        "seeds": list(seeds),
        "mean_roc_auc": aucs,
        "max_pairwise_roc_auc_gap": gap,
        "variants": {label: rep.to_dict() for label, rep in reports.items()},
    }
    with open(out_dir / "ablation.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_report_csv(out_dir / "ablation.csv", reports)
    return summary


def load_dataset(edges, u_features, v_features):
    paths = {"edges": edges, "u_features": u_features, "v_features": v_features}
    return load_graph(edges, u_features, v_features), dataset_hash(paths)
