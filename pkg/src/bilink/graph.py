"""Bipartite interaction graphs: loading, chronological splitting, negative
sampling and normalized adjacency construction.

Edges are interaction *events*: the same (u, v) pair may occur many times
with different timestamps. For modeling, events are collapsed into one
weighted edge per distinct pair (weight = summed event weight, which equals
the interaction count when every event has weight 1).
"""

import csv
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ValidationError

EDGE_HEADER = ["u_id", "v_id", "weight", "timestamp"]


@dataclass
class EdgeArray:
    """Parallel arrays of interaction events (u index, v index, weight, timestamp)."""

    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=np.int64)
        self.v = np.asarray(self.v, dtype=np.int64)
        self.w = np.asarray(self.w, dtype=np.float64)
        self.t = np.asarray(self.t, dtype=np.int64)
        if not (len(self.u) == len(self.v) == len(self.w) == len(self.t)):
            raise ValidationError("edge arrays must have equal length")

    def __len__(self):
        return len(self.u)

    def pairs(self) -> set:
        return set(zip(self.u.tolist(), self.v.tolist()))


@dataclass
class BipartiteGraph:
    """Two node partitions U and V with features and timestamped weighted events.

    Indices are dense and 0-based within each partition; edges always run
    U -> V, so intra-partition links are unrepresentable.
    """

    n_u: int
    n_v: int
    x_u: np.ndarray
    x_v: np.ndarray
    edges: EdgeArray
    u_ids: tuple = ()
    v_ids: tuple = ()

    def __post_init__(self):
        self.x_u = np.asarray(self.x_u, dtype=np.float64)
        self.x_v = np.asarray(self.x_v, dtype=np.float64)
        if self.x_u.shape[0] != self.n_u or self.x_v.shape[0] != self.n_v:
            raise ValidationError(
                f"feature row counts {self.x_u.shape[0]}/{self.x_v.shape[0]} "
                f"do not match node counts {self.n_u}/{self.n_v}"
            )
        if not np.isfinite(self.x_u).all() or not np.isfinite(self.x_v).all():
            raise ValidationError("feature matrices contain non-finite values")
        e = self.edges
        if len(e) > 0:
            if e.u.min() < 0 or e.u.max() >= self.n_u:
                raise ValidationError("u index out of range [0, n_u)")
            if e.v.min() < 0 or e.v.max() >= self.n_v:
                raise ValidationError("v index out of range [0, n_v)")
            if (e.w <= 0).any():
                raise ValidationError("all edge weights must be > 0")

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def with_edges(self, edges: EdgeArray) -> "BipartiteGraph":
        """Same node universe and features, different event list."""
        return BipartiteGraph(self.n_u, self.n_v, self.x_u, self.x_v, edges,
                              self.u_ids, self.v_ids)


@dataclass
class IdMaps:
    """Raw external IDs to dense indices, with a reserved UNK slot per partition."""

    u_index: dict
    v_index: dict
    unk_u: int
    unk_v: int

    def lookup_u(self, raw_id: str) -> int:
        return self.u_index.get(raw_id, self.unk_u)

    def lookup_v(self, raw_id: str) -> int:
        return self.v_index.get(raw_id, self.unk_v)


@dataclass
class TemporalSplit:
    """Chronological train/val/test partition of one graph's events."""

    train: BipartiteGraph
    val_edges: EdgeArray
    test_edges: EdgeArray
    id_maps: IdMaps

    def all_pairs(self) -> set:
        """Distinct (u, v) pairs present in any era."""
        return (self.train.edges.pairs()
                | self.val_edges.pairs()
                | self.test_edges.pairs())


@dataclass
class NegativeSet:
    """Cross-partition pairs absent from every era of a split."""

    pairs: np.ndarray  # (count, 2) int64
    provenance: str


def _read_feature_csv(path) -> tuple:
    """Returns (ids in file order, feature matrix). Header must be id,f1,...,fd."""
    ids, rows = [], []
    seen = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 2 or header[0].strip() != "id":
            raise ValidationError(f"{path}: expected header id,f1,...,fd")
        dim = len(header) - 1
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != dim + 1:
                raise ValidationError(
                    f"{path}:{lineno}: expected {dim + 1} columns, got {len(row)}")
            raw_id = row[0]
            if raw_id in seen:
                raise ValidationError(
                    f"{path}:{lineno}: duplicate id {raw_id!r} (first at line {seen[raw_id]})")
            seen[raw_id] = lineno
            try:
                values = [float(x) for x in row[1:]]
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: malformed feature value ({exc})")
            ids.append(raw_id)
            rows.append(values)
    if not ids:
        raise ValidationError(f"{path}: no feature rows")
    x = np.asarray(rows, dtype=np.float64)
    if not np.isfinite(x).all():
        raise ValidationError(f"{path}: non-finite feature values")
    return ids, x


def load_graph(edge_file, u_feature_file, v_feature_file) -> BipartiteGraph:
    """Load a bipartite graph from an edge CSV and two feature CSVs.

    Dense indices are assigned in feature-file row order. Every node
    referenced by an edge must have a feature row; feature-file nodes with
    no edges are kept as isolated nodes.
    """
    u_ids, x_u = _read_feature_csv(u_feature_file)
    v_ids, x_v = _read_feature_csv(v_feature_file)
    u_index = {raw: i for i, raw in enumerate(u_ids)}
    v_index = {raw: i for i, raw in enumerate(v_ids)}

    eu, ev, ew, et = [], [], [], []
    with open(edge_file, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != EDGE_HEADER:
            raise ValidationError(
                f"{edge_file}: expected header {','.join(EDGE_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ValidationError(
                    f"{edge_file}:{lineno}: expected 4 columns, got {len(row)}")
            raw_u, raw_v, raw_w, raw_t = row
            if raw_u not in u_index:
                raise ValidationError(
                    f"{edge_file}:{lineno}: u_id {raw_u!r} has no feature row")
            if raw_v not in v_index:
                raise ValidationError(
                    f"{edge_file}:{lineno}: v_id {raw_v!r} has no feature row")
            try:
                w = float(raw_w)
                t = int(raw_t)
            except ValueError as exc:
                raise ValidationError(f"{edge_file}:{lineno}: malformed row ({exc})")
            if w <= 0:
                raise ValidationError(
                    f"{edge_file}:{lineno}: edge weight must be > 0, got {raw_w}")
            eu.append(u_index[raw_u])
            ev.append(v_index[raw_v])
            ew.append(w)
            et.append(t)
    if not eu:
        raise ValidationError(f"{edge_file}: no edges")

    edges = EdgeArray(np.array(eu), np.array(ev), np.array(ew), np.array(et))
    return BipartiteGraph(len(u_ids), len(v_ids), x_u, x_v, edges,
                          tuple(u_ids), tuple(v_ids))


def chronological_split(g: BipartiteGraph,
                        fractions=(0.8, 0.1, 0.1)) -> TemporalSplit:
    """Sort events by timestamp (stable, ties by input order) and cut at the
    cumulative fraction boundaries. Each era is guaranteed non-empty."""
    if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValidationError(f"fractions must be 3 values summing to 1, got {fractions}")
    m = g.n_edges
    if m < 3:
        raise ValidationError(
            f"cannot form three non-empty splits from {m} edges")
    order = np.argsort(g.edges.t, kind="stable")
    if np.unique(g.edges.t).size == 1:
        warnings.warn("all edges share one timestamp; splitting by input order")

    cut1 = int(m * fractions[0])
    cut1 = min(max(cut1, 1), m - 2)
    cut2 = int(m * (fractions[0] + fractions[1]))
    cut2 = min(max(cut2, cut1 + 1), m - 1)

    def take(idx):
        e = g.edges
        return EdgeArray(e.u[idx], e.v[idx], e.w[idx], e.t[idx])

    train_edges = take(order[:cut1])
    val_edges = take(order[cut1:cut2])
    test_edges = take(order[cut2:])

    id_maps = IdMaps(
        u_index={raw: i for i, raw in enumerate(g.u_ids)},
        v_index={raw: i for i, raw in enumerate(g.v_ids)},
        unk_u=g.n_u,
        unk_v=g.n_v,
    )
    return TemporalSplit(g.with_edges(train_edges), val_edges, test_edges, id_maps)


def complement_size(split: TemporalSplit) -> int:
    """Number of cross-partition pairs absent from every era."""
    g = split.train
    return g.n_u * g.n_v - len(split.all_pairs())


def sample_negatives(split: TemporalSplit, count: int, rng_seed: int) -> NegativeSet:
    """Sample `count` distinct pairs uniformly from the complement of all eras."""
    if count < 1:
        raise ValidationError(f"count must be positive, got {count}")
    g = split.train
    n_u, n_v = g.n_u, g.n_v
    excluded = split.all_pairs()
    free = n_u * n_v - len(excluded)
    if count > free:
        raise ValidationError(
            f"requested {count} negatives but the complement has only {free} pairs")

    rng = np.random.default_rng(rng_seed)
    if count > free // 2:
        # Dense regime: enumerate the complement and choose without replacement.
        excluded_keys = np.fromiter(
            (u * n_v + v for u, v in excluded), dtype=np.int64, count=len(excluded))
        mask = np.ones(n_u * n_v, dtype=bool)
        mask[excluded_keys] = False
        pool = np.flatnonzero(mask)
        keys = rng.choice(pool, size=count, replace=False)
    else:
        chosen = set()
        keys = []
        while len(keys) < count:
            u = int(rng.integers(0, n_u))
            v = int(rng.integers(0, n_v))
            if (u, v) in excluded or (u, v) in chosen:
                continue
            chosen.add((u, v))
            keys.append(u * n_v + v)
        keys = np.asarray(keys, dtype=np.int64)
    pairs = np.stack([keys // n_v, keys % n_v], axis=1).astype(np.int64)
    return NegativeSet(pairs=pairs, provenance="excluded=train+val+test")


def aggregate_pairs(edges: EdgeArray, n_v: int, use_weights: bool) -> tuple:
    """Collapse events into distinct (u, v) pairs, ordered by (u, v).

    Returns (u, v, w) arrays. With use_weights the pair weight is the sum of
    its event weights; otherwise every distinct pair gets weight 1.
    """
    if len(edges) == 0:
        empty = np.array([], dtype=np.int64)
        return empty, empty, np.array([], dtype=np.float64)
    key = edges.u * np.int64(n_v) + edges.v
    uniq, inverse = np.unique(key, return_inverse=True)
    if use_weights:
        w = np.zeros(len(uniq), dtype=np.float64)
        np.add.at(w, inverse, edges.w)
    else:
        w = np.ones(len(uniq), dtype=np.float64)
    return (uniq // n_v).astype(np.int64), (uniq % n_v).astype(np.int64), w


def normalized_adjacency(n_u: int, n_v: int, u: np.ndarray, v: np.ndarray,
                         w: np.ndarray) -> sp.csr_matrix:
    """Symmetrically normalized block adjacency over stacked node indexing.

    Builds [[0, W], [W^T, 0]] + I (self-loops of weight 1) and returns
    D^{-1/2} (A + I) D^{-1/2} with weighted degrees. Duplicate (u, v)
    entries sum. Isolated nodes keep degree 1 from the self-loop.
    """
    n = n_u + n_v
    loops = np.arange(n, dtype=np.int64)
    rows = np.concatenate([u, v + n_u, loops])
    cols = np.concatenate([v + n_u, u, loops])
    data = np.concatenate([w, w, np.ones(n)])
    a = sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()
    deg = np.asarray(a.sum(axis=1)).ravel()
    d_inv_sqrt = 1.0 / np.sqrt(deg)
    return sp.diags(d_inv_sqrt) @ a @ sp.diags(d_inv_sqrt)


def build_weighted_adjacency(g: BipartiteGraph, use_weights: bool) -> sp.csr_matrix:
    """Normalized adjacency of a graph's collapsed edges.

    With use_weights off, duplicate interaction events collapse to weight 1,
    so the result is identical for any reweighting of the same pair set.
    """
    u, v, w = aggregate_pairs(g.edges, g.n_v, use_weights)
    return normalized_adjacency(g.n_u, g.n_v, u, v, w)


def merge_graphs(g: BipartiteGraph, extra: EdgeArray) -> BipartiteGraph:
    """Graph over the same node universe with the union of event lists."""
    e = g.edges
    merged = EdgeArray(
        np.concatenate([e.u, extra.u]),
        np.concatenate([e.v, extra.v]),
        np.concatenate([e.w, extra.w]),
        np.concatenate([e.t, extra.t]),
    )
    return g.with_edges(merged)
