"""Pretraining objective: a weighted attractive term over augmented-view
edges, a weighted repulsive term over corrupted-view edges, and their
balanced combination.

Gradients flow only into the online-side inputs; target-side matrices are
passed as plain arrays and treated as constants (stop-gradient).
"""

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ValidationError


def _edge_cosine_mean(online_rows: Tensor, target_matrix, edge_from, edge_to,
                      weights, weighted: bool, sign: float) -> Tensor:
    if len(edge_from) == 0:
        raise ValidationError("loss is undefined over an empty edge set")
    target = target_matrix if isinstance(target_matrix, Tensor) \
        else ad.constant(target_matrix)
    w = np.asarray(weights, dtype=np.float64)
    if not weighted:
        w = np.ones_like(w)
    total = w.sum()
    if total <= 0:
        raise ValidationError("edge weights must sum to a positive value")
    cos = ad.row_cosine(ad.take_rows(online_rows, edge_from),
                        ad.take_rows(target, edge_to))
    weighted_sum = ad.sum_all(ad.mul(cos, ad.constant(w.reshape(-1, 1))))
    return ad.scale(weighted_sum, sign / total)


def attractive_loss(pred_online: Tensor, target_matrix, edge_u, edge_v,
                    weights, weighted: bool) -> Tensor:
    """Negative weighted mean cosine between online predictions at the edge
    sources and target embeddings at the edge destinations."""
    return _edge_cosine_mean(pred_online, target_matrix, edge_u, edge_v,
                             weights, weighted, sign=-1.0)


def repulsive_loss(pred_online: Tensor, target_matrix, edge_u, edge_v,
                   weights, weighted: bool) -> Tensor:
    """Positive weighted mean cosine against corrupted-view targets.

    Corrupted views carry weight 1 everywhere, so the weighted and
    unweighted forms coincide there by construction.
    """
    return _edge_cosine_mean(pred_online, target_matrix, edge_u, edge_v,
                             weights, weighted, sign=+1.0)


def total_pretrain_loss(attractive: Tensor, repulsive: Tensor,
                        balance: float) -> Tensor:
    """balance * repulsive + (1 - balance) * attractive."""
    if not 0.0 <= balance <= 1.0:
        raise ValidationError(f"balance must be in [0, 1], got {balance}")
    return ad.add(ad.scale(repulsive, balance),
                  ad.scale(attractive, 1.0 - balance))
