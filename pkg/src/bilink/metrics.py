"""Ranking and threshold metrics for scored link candidates, plus
multi-seed aggregation.

Conventions: ROC-AUC uses the rank (Mann-Whitney) form with ties counted
half. Hits@K ranks each positive against the shared negative pool by
default; with fewer than K negatives every positive counts as a hit.
Threshold metrics return 0 (flagged, never an error) on zero denominators.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .errors import ValidationError

METRIC_NAMES = ("roc_auc", "average_precision", "hits_at_k",
                "precision", "recall", "f1")


def _check(scores, labels):
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel().astype(np.int64)
    if scores.shape != labels.shape:
        raise ValidationError(
            f"scores and labels differ in length: {len(scores)} vs {len(labels)}")
    if not np.isin(labels, (0, 1)).all():
        raise ValidationError("labels must be 0 or 1")
    return scores, labels


def roc_auc(scores, labels) -> float:
    """Probability that a random positive outscores a random negative,
    ties counted 1/2."""
    scores, labels = _check(scores, labels)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValidationError("roc_auc needs at least one positive and one negative")
    ranks = rankdata(scores, method="average")
    pos_rank_sum = ranks[labels == 1].sum()
    return float((pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def average_precision(scores, labels) -> float:
    """Mean of precision-at-rank over positives, score-descending order.

    Ties are broken by stable input order; unlike ROC-AUC this definition
    has no tie correction, so the input order matters for tied scores.
    """
    scores, labels = _check(scores, labels)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise ValidationError("average_precision needs at least one positive")
    order = np.argsort(-scores, kind="stable")
    sorted_labels = labels[order]
    hits = np.cumsum(sorted_labels)
    ranks = np.arange(1, len(scores) + 1)
    # fsum: exactly rounded, so the value is independent of summation order
    return math.fsum((hits / ranks)[sorted_labels == 1]) / n_pos


def hits_at_k(scores, labels, k: int = 50, mode: str = "pool") -> float:
    """Fraction of positives ranked above the k-th best negative.

    mode "pool" (default): each positive competes against the shared
    negative pool; a hit means strictly exceeding the k-th highest negative
    score, and with fewer than k negatives every positive is a hit.
    mode "global": fraction of positives inside the top-k of all pairs.
    """
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    scores, labels = _check(scores, labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    if len(neg) == 0:
        raise ValidationError("hits_at_k needs at least one negative")
    if len(pos) == 0:
        raise ValidationError("hits_at_k needs at least one positive")
    if mode == "pool":
        if len(neg) < k:
            return 1.0
        threshold = np.sort(neg)[::-1][k - 1]
        return float((pos > threshold).mean())
    if mode == "global":
        order = np.argsort(-scores, kind="stable")
        return float(labels[order[:k]].sum() / len(pos))
    raise ValidationError(f"unknown hits_at_k mode {mode!r}")


@dataclass
class ThresholdReport:
    precision: float
    recall: float
    f1: float
    flags: tuple = ()


def threshold_prf(scores, labels, threshold: float = 0.5) -> ThresholdReport:
    """Precision/recall/F1 with prediction = score >= threshold.

    Zero-denominator cases yield 0 for the affected metric and a flag
    naming it, never an error.
    """
    scores, labels = _check(scores, labels)
    pred = scores >= threshold
    tp = int(np.sum(pred & (labels == 1)))
    fp = int(np.sum(pred & (labels == 0)))
    fn = int(np.sum(~pred & (labels == 1)))
    flags = []
    if tp + fp == 0:
        precision = 0.0
        flags.append("no_predicted_positives")
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall = 0.0
        flags.append("no_actual_positives")
    else:
        recall = tp / (tp + fn)
    if precision + recall == 0:
        f1 = 0.0
        if "no_predicted_positives" not in flags and "no_actual_positives" not in flags:
            flags.append("zero_f1_denominator")
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return ThresholdReport(precision, recall, f1, tuple(flags))


def compute_all(scores, labels, k: int = 50, threshold: float = 0.5) -> dict:
    """The full metric sextuple for one scored evaluation set."""
    prf = threshold_prf(scores, labels, threshold)
    out = {
        "roc_auc": roc_auc(scores, labels),
        "average_precision": average_precision(scores, labels),
        "hits_at_k": hits_at_k(scores, labels, k=k),
        "precision": prf.precision,
        "recall": prf.recall,
        "f1": prf.f1,
    }
    return out, list(prf.flags)


@dataclass
class EvalReport:
    """Per-seed metric values and their mean / sample standard deviation."""

    seeds: list
    per_seed: list  # one {metric: value} dict per seed
    aggregate: dict = field(default_factory=dict)  # metric -> {"mean", "std"}

    def to_dict(self) -> dict:
        return {"seeds": self.seeds, "per_seed": self.per_seed,
                "aggregate": self.aggregate}


def aggregate(seeds, per_seed_metrics) -> EvalReport:
    """Mean and sample (n-1) standard deviation per metric over >= 2 seeds."""
    if len(seeds) != len(per_seed_metrics):
        raise ValidationError("one metric dict required per seed")
    if len(seeds) < 2:
        raise ValidationError("aggregation needs at least 2 seeds")
    keys = set(per_seed_metrics[0])
    for m in per_seed_metrics[1:]:
        if set(m) != keys:
            raise ValidationError("per-seed metric sets do not match")
    agg = {}
    for key in sorted(keys):
        values = np.array([m[key] for m in per_seed_metrics], dtype=np.float64)
        # identical runs must report exactly 0, not mean-roundoff noise
        std = 0.0 if np.all(values == values[0]) else float(values.std(ddof=1))
        agg[key] = {"mean": float(values.mean()), "std": std}
    return EvalReport(seeds=list(seeds), per_seed=list(per_seed_metrics),
                      aggregate=agg)
