"""Two-phase training: self-supervised pretraining of the encoder, then
frozen-encoder decoder training with Hits@K early stopping, and the final
inductive evaluation on the test era.
"""

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import metrics as mt
from .augment import augmented_view, corrupt_view
from .autodiff import Tape, backward
from .errors import TrainingError, ValidationError
from .graph import (BipartiteGraph, NegativeSet, TemporalSplit, aggregate_pairs,
                    merge_graphs, normalized_adjacency, sample_negatives)
from .losses import attractive_loss, repulsive_loss, total_pretrain_loss
from .model import (DecoderParams, ModelState, decode_logits,
                    decoder_named_params, ema_update, encode, init_decoder,
                    init_model_state, mlp_forward, online_named_params)
from .optim import adam_step, grads_by_name, init_adam_state
from .rng import child_seed, rng_for


@dataclass
class VariantConfig:
    """One cell of the weighting ablation grid plus shared hyperparameters.

    `weighted_pretrain` gates edge weights everywhere in phase 1 (message
    passing, edge dropping, loss); `weighted_bce` gates the per-link weights
    of the decoder loss in phase 2. With a graph whose collapsed weights are
    all 1, the four combinations are computationally identical.
    """

    weighted_pretrain: bool = False
    weighted_bce: bool = False
    loss_balance: float = 0.5
    tau: float = 0.99
    hidden_dim: int = 256
    output_dim: int = 128
    num_layers: int = 2
    dropout: float = 0.2
    lr: float = 0.001
    weight_decay: float = 1e-5
    batch_size: int = 512
    pretrain_epochs: int = 200
    decoder_epochs: int = 100
    patience: int = 10
    feature_drop_p: float = 0.1
    # Secondary knobs (not part of the shared grid defaults above).
    edge_keep_prob: float = 0.8
    input_dim: int = 256
    decoder_hidden_dims: tuple = (256, 64)
    unk_substitution_rate: float = 0.01
    hits_k: int = 50
    eval_negative_ratio: float = 1.0
    decoder_monitor_fraction: float = 0.1
    decoder_negative_pool_factor: float = 5.0
    final_layer_relu: bool = False
    loss_on_raw_embeddings: bool = False
    symmetrize_pretrain_loss: bool = False

    def __post_init__(self):
        if not 0.0 <= self.loss_balance <= 1.0:
            raise ValidationError(f"loss_balance must be in [0, 1], got {self.loss_balance}")
        if self.num_layers != 2:
            raise ValidationError("only the two-layer encoder is supported")
        if isinstance(self.decoder_hidden_dims, list):
            self.decoder_hidden_dims = tuple(self.decoder_hidden_dims)

    @property
    def variant_label(self) -> str:
        wp = "wp" if self.weighted_pretrain else "nwp"
        wb = "wb" if self.weighted_bce else "nwb"
        return f"{wp}_{wb}"

    def replace(self, **kwargs) -> "VariantConfig":
        return dataclasses.replace(self, **kwargs)


ALL_VARIANTS = (
    {"weighted_pretrain": True, "weighted_bce": True},
    {"weighted_pretrain": True, "weighted_bce": False},
    {"weighted_pretrain": False, "weighted_bce": True},
    {"weighted_pretrain": False, "weighted_bce": False},
)


@dataclass
class FrozenEmbeddings:
    """Encoder outputs for a stated graph, with the UNK rows appended.

    Row `unk_u` / `unk_v` (== node count of the partition) is the learned
    fallback; nodes with no incident edge in the source graph are also
    mapped onto it. Arrays are read-only.
    """

    emb_u: np.ndarray
    emb_v: np.ndarray
    unk_u: int
    unk_v: int
    known_u: np.ndarray
    known_v: np.ndarray
    provenance: str


def _predict_side(projector, predictor, h):
    """Online rows entering the cosine terms: predictor(projector(h)), or
    predictor(h) directly when the projector is bypassed (raw wiring)."""
    return mlp_forward(predictor, h if projector is None else
                       mlp_forward(projector, h))


def _target_rows(state: ModelState, cfg: VariantConfig, adj, x_u, x_v):
    """Target-side matrices (constants: computed outside any tape).

    Only the partitions the objective consumes are materialized: V always,
    U additionally when the symmetrized direction is on.
    """
    h_u, h_v = encode(state.target_encoder, adj, x_u, x_v,
                      final_relu=cfg.final_layer_relu)
    heads = state.target_heads
    if cfg.loss_on_raw_embeddings:
        t_u, t_v = h_u, h_v
    else:
        t_v = mlp_forward(heads.projector_v, h_v)
        t_u = (mlp_forward(heads.projector_u, h_u)
               if cfg.symmetrize_pretrain_loss else None)
    return (None if t_u is None else t_u.data), t_v.data


def _view_adjacency(n_u, n_v, view):
    return normalized_adjacency(n_u, n_v, view.edge_u, view.edge_v, view.edge_w)


def pretrain(split: TemporalSplit, cfg: VariantConfig, seed: int):
    """Phase 1: train encoder, heads and UNK rows on the train-era graph.

    Per epoch: two augmented views and one corrupted view, online forward on
    view 1, target forwards on view 2 and the corrupted view, one optimizer
    step, one EMA update. Returns (ModelState, per-epoch loss trace).
    """
    g = split.train
    if g.n_edges == 0:
        raise ValidationError("cannot pretrain on an empty train graph")

    state = init_model_state(rng_for(seed, "init"), g.x_u.shape[1], g.x_v.shape[1],
                             cfg.input_dim, cfg.hidden_dim, cfg.output_dim, cfg.tau)
    params = online_named_params(state)
    opt_state = init_adam_state(params)

    # Collapsed modeling edges; weights forced to 1 under unweighted pretraining.
    cu, cv, cw = aggregate_pairs(g.edges, g.n_v, use_weights=cfg.weighted_pretrain)

    trace = []
    for epoch in range(cfg.pretrain_epochs):
        view1 = augmented_view(g.x_u, g.x_v, cu, cv, cw,
                               feature_drop_p=cfg.feature_drop_p,
                               base_keep=cfg.edge_keep_prob,
                               seed=child_seed(seed, "view", epoch, 1),
                               kind="augmented-1")
        view2 = augmented_view(g.x_u, g.x_v, cu, cv, cw,
                               feature_drop_p=cfg.feature_drop_p,
                               base_keep=cfg.edge_keep_prob,
                               seed=child_seed(seed, "view", epoch, 2),
                               kind="augmented-2")
        corrupted = corrupt_view(g, max(1, view1.n_edges),
                                 child_seed(seed, "corrupt", epoch))

        adj1 = _view_adjacency(g.n_u, g.n_v, view1)
        adj2 = _view_adjacency(g.n_u, g.n_v, view2)
        adjc = _view_adjacency(g.n_u, g.n_v, corrupted)

        # Stable targets first, outside the tape (stop-gradient).
        tgt2_u, tgt2_v = _target_rows(state, cfg, adj2, view2.x_u, view2.x_v)
        tgtc_u, tgtc_v = _target_rows(state, cfg, adjc, corrupted.x_u, corrupted.x_v)

        dropout_seed = int(rng_for(seed, "dropout", epoch).integers(2 ** 31))
        heads = state.online_heads
        raw = cfg.loss_on_raw_embeddings
        with Tape():
            h_u, h_v = encode(state.online_encoder, adj1, view1.x_u, view1.x_v,
                              dropout_p=cfg.dropout, dropout_seed=dropout_seed,
                              final_relu=cfg.final_layer_relu)
            h_u, h_v = _substitute_unk(state, cfg, h_u, h_v, seed, epoch)
            p_u = _predict_side(None if raw else heads.projector_u,
                                heads.predictor_u, h_u)

            attr = attractive_loss(p_u, tgt2_v, view1.edge_u, view1.edge_v,
                                   view1.edge_w, weighted=cfg.weighted_pretrain)
            rep = repulsive_loss(p_u, tgtc_v, corrupted.edge_u, corrupted.edge_v,
                                 corrupted.edge_w, weighted=cfg.weighted_pretrain)
            if cfg.symmetrize_pretrain_loss:
                p_v = _predict_side(None if raw else heads.projector_v,
                                    heads.predictor_v, h_v)
                attr_vu = attractive_loss(p_v, tgt2_u, view1.edge_v, view1.edge_u,
                                          view1.edge_w, weighted=cfg.weighted_pretrain)
                rep_vu = repulsive_loss(p_v, tgtc_u, corrupted.edge_v,
                                        corrupted.edge_u, corrupted.edge_w,
                                        weighted=cfg.weighted_pretrain)
                attr = ad.scale(ad.add(attr, attr_vu), 0.5)
                rep = ad.scale(ad.add(rep, rep_vu), 0.5)
            total = total_pretrain_loss(attr, rep, cfg.loss_balance)
            if not np.isfinite(total.item()):
                raise TrainingError(f"non-finite pretraining loss at epoch {epoch}")
            grad_map = backward(total)

        adam_step(params, grads_by_name(params, grad_map), opt_state,
                  cfg.lr, cfg.weight_decay)
        for p in params.values():
            p.zero_grad()
        ema_update(state)
        trace.append({"epoch": epoch, "total": total.item(),
                      "attractive": attr.item(), "repulsive": rep.item()})
    return state, trace


def _substitute_unk(state, cfg, h_u, h_v, seed, epoch):
    """Swap a small random node subset's embeddings for the UNK rows so the
    fallback rows receive training signal."""
    rate = cfg.unk_substitution_rate
    if rate <= 0:
        return h_u, h_v
    rng = rng_for(seed, "unk", epoch)
    n_u, n_v = h_u.shape[0], h_v.shape[0]
    k_u = max(1, int(round(rate * n_u)))
    k_v = max(1, int(round(rate * n_v)))
    idx_u = rng.choice(n_u, size=min(k_u, n_u), replace=False)
    idx_v = rng.choice(n_v, size=min(k_v, n_v), replace=False)
    enc = state.online_encoder
    return (ad.replace_rows(h_u, idx_u, enc.unk_u),
            ad.replace_rows(h_v, idx_v, enc.unk_v))


def extract_embeddings(state: ModelState, graph: BipartiteGraph,
                       cfg: VariantConfig, provenance: str) -> FrozenEmbeddings:
    """Deterministic online-encoder embeddings over a stated graph.

    No dropout, no gradients. Nodes without any incident edge in `graph`
    are mapped onto the learned UNK row, and the UNK row itself is exposed
    at index n_u / n_v for IDs outside the universe entirely.
    """
    adj = normalized_adjacency(
        graph.n_u, graph.n_v,
        *aggregate_pairs(graph.edges, graph.n_v, use_weights=cfg.weighted_pretrain))
    h_u, h_v = encode(state.online_encoder, adj, graph.x_u, graph.x_v,
                      final_relu=cfg.final_layer_relu)
    known_u = np.zeros(graph.n_u, dtype=bool)
    known_v = np.zeros(graph.n_v, dtype=bool)
    if graph.n_edges > 0:
        known_u[np.unique(graph.edges.u)] = True
        known_v[np.unique(graph.edges.v)] = True

    unk_u_row = state.online_encoder.unk_u.data
    unk_v_row = state.online_encoder.unk_v.data
    emb_u = np.vstack([np.where(known_u[:, None], h_u.data, unk_u_row), unk_u_row])
    emb_v = np.vstack([np.where(known_v[:, None], h_v.data, unk_v_row), unk_v_row])
    emb_u.setflags(write=False)
    emb_v.setflags(write=False)
    return FrozenEmbeddings(emb_u, emb_v, graph.n_u, graph.n_v,
                            known_u, known_v, provenance)


def decoder_bce_examples(positives_uv: np.ndarray, pos_weights: np.ndarray,
                         negatives_uv: np.ndarray, weighted_bce: bool):
    """Pairs, labels and per-link loss weights for one decoder pass.

    Positive links carry their aggregated edge weight when weighted BCE is
    on (1 otherwise); negative links always carry weight 1.
    """
    pairs = np.vstack([positives_uv, negatives_uv]).astype(np.int64)
    labels = np.concatenate([np.ones(len(positives_uv)), np.zeros(len(negatives_uv))])
    pw = pos_weights if weighted_bce else np.ones(len(positives_uv))
    weights = np.concatenate([pw, np.ones(len(negatives_uv))])
    return pairs, labels, weights


@dataclass
class DecoderRecord:
    best_epoch: int
    best_hits: float
    epochs_run: int
    monitor_history: list = field(default_factory=list)


def _decoder_scores(dec, emb, pairs):
    logits = decode_logits(dec, emb.emb_u, emb.emb_v, pairs)
    return ad.sigmoid(logits).data.ravel()


def train_decoder(emb: FrozenEmbeddings, positives_uv: np.ndarray,
                  pos_weights: np.ndarray, negatives: NegativeSet,
                  cfg: VariantConfig, seed: int):
    """Phase 2: supervised decoder on frozen embeddings.

    A monitor slice (10% of positives plus 10% of the negative pool) is
    held out; the rest trains in shuffled minibatches with fresh 1:1
    negatives drawn from the pool each epoch. Early stopping restores the
    parameters from the best monitor Hits@K epoch.
    """
    positives_uv = np.asarray(positives_uv, dtype=np.int64)
    pos_weights = np.asarray(pos_weights, dtype=np.float64)
    neg_pool = np.asarray(negatives.pairs, dtype=np.int64)
    n_pos, n_neg = len(positives_uv), len(neg_pool)
    if n_pos < 2 or n_neg < 2:
        raise ValidationError(
            f"decoder training needs >= 2 positives and negatives, got {n_pos}/{n_neg}")

    rng = rng_for(seed, "decoder-monitor")
    pos_perm = rng.permutation(n_pos)
    neg_perm = rng.permutation(n_neg)
    n_hold_pos = min(max(1, int(round(cfg.decoder_monitor_fraction * n_pos))), n_pos - 1)
    n_hold_neg = min(max(1, int(round(cfg.decoder_monitor_fraction * n_neg))), n_neg - 1)
    hold_pos = pos_perm[:n_hold_pos]
    train_pos = pos_perm[n_hold_pos:]
    hold_neg = neg_perm[:n_hold_neg]
    train_neg_pool = neg_perm[n_hold_neg:]

    monitor_pairs = np.vstack([positives_uv[hold_pos], neg_pool[hold_neg]])
    monitor_labels = np.concatenate([np.ones(n_hold_pos), np.zeros(n_hold_neg)])

    dec = init_decoder(rng_for(seed, "decoder-init"), cfg.output_dim,
                       cfg.decoder_hidden_dims)
    params = decoder_named_params(dec)
    opt_state = init_adam_state(params)

    best = (-1.0, -1, None)  # (hits, epoch, params snapshot)
    history = []
    epochs_run = 0
    for epoch in range(cfg.decoder_epochs):
        epochs_run = epoch + 1
        rng_e = rng_for(seed, "decoder-epoch", epoch)
        k = len(train_pos)
        replace = k > len(train_neg_pool)
        neg_idx = rng_e.choice(train_neg_pool, size=k, replace=replace)
        pairs, labels, weights = decoder_bce_examples(
            positives_uv[train_pos], pos_weights[train_pos],
            neg_pool[neg_idx], cfg.weighted_bce)
        order = rng_e.permutation(len(pairs))
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            with Tape():
                logits = decode_logits(dec, emb.emb_u, emb.emb_v, pairs[batch])
                loss = ad.bce_with_logits(logits, labels[batch, None],
                                          weights[batch, None])
                grad_map = backward(loss)
            adam_step(params, grads_by_name(params, grad_map), opt_state,
                      cfg.lr, cfg.weight_decay)
            for p in params.values():
                p.zero_grad()

        hits = mt.hits_at_k(_decoder_scores(dec, emb, monitor_pairs),
                            monitor_labels, k=cfg.hits_k)
        history.append(hits)
        if hits > best[0]:
            snapshot = {name: p.data.copy() for name, p in params.items()}
            best = (hits, epoch, snapshot)
        if epoch - best[1] >= cfg.patience:
            break

    for name, p in params.items():
        p.data = best[2][name]
    record = DecoderRecord(best_epoch=best[1], best_hits=best[0],
                           epochs_run=epochs_run, monitor_history=history)
    return dec, record


def evaluate_final(state: ModelState, split: TemporalSplit, dec: DecoderParams,
                   cfg: VariantConfig, seed: int):
    """Score test-era pairs with embeddings from the full pre-test history.

    Embeddings are recomputed on train+val with the frozen encoder; test
    positives are the distinct test-era pairs, and negatives are freshly
    sampled (seed-derived) from the complement of all eras at the
    configured ratio. Returns (metrics dict, info dict).
    """
    graph_tv = merge_graphs(split.train, split.val_edges)
    emb = extract_embeddings(state, graph_tv, cfg, provenance="train+val")

    tu, tv, _ = aggregate_pairs(split.test_edges, split.train.n_v, use_weights=False)
    if len(tu) == 0:
        raise ValidationError("no test-era pairs to evaluate")
    pos_pairs = np.stack([tu, tv], axis=1)
    n_neg = max(1, int(round(cfg.eval_negative_ratio * len(pos_pairs))))
    eval_seed = int(child_seed(seed, "eval-negatives").generate_state(1)[0])
    negatives = sample_negatives(split, n_neg, eval_seed)

    pairs = np.vstack([pos_pairs, negatives.pairs])
    labels = np.concatenate([np.ones(len(pos_pairs)), np.zeros(n_neg)])
    scores = _decoder_scores(dec, emb, pairs)
    values, flags = mt.compute_all(scores, labels, k=cfg.hits_k)
    info = {"n_test_positives": int(len(pos_pairs)),
            "n_test_negatives": int(n_neg),
            "flags": flags}
    return values, info
