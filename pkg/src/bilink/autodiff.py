"""Reverse-mode automatic differentiation for dense 2-D float64 tensors.

Operations record onto the innermost active Tape (opened with a `with`
block). Outside a tape they are plain forward computations, which is how
evaluation-time encoding runs. A tape is single-threaded; independent tapes
may live on separate threads.
"""

import threading

import numpy as np

_local = threading.local()


def _tape_stack():
    if not hasattr(_local, "stack"):
        _local.stack = []
    return _local.stack


def active_tape():
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tensor:
    """Dense 2-D value, optionally tracked for gradients.

    `grad` accumulates across backward calls until `zero_grad` resets it.
    `tape_id` is the node's position in the recording tape (None for values
    created outside any tape or never used by a recorded op).
    """

    __slots__ = ("data", "requires_grad", "grad", "tape_id", "_tape", "_produced")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise ValueError(f"tensors are 2-D, got shape {arr.shape}")
        self.data = arr
        self.requires_grad = requires_grad
        self.grad = None
        self.tape_id = None
        self._tape = None
        self._produced = False

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.data[0, 0])

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


class _Node:
    __slots__ = ("out", "parents", "backward_fn")

    def __init__(self, out, parents, backward_fn):
        self.out = out
        self.parents = parents
        self.backward_fn = backward_fn


class Tape:
    """Ordered record of operations; creation order is already topological."""

    def __init__(self):
        self._nodes = []

    def __enter__(self):
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _tape_stack().pop()
        assert popped is self
        return False

    def __len__(self):
        return len(self._nodes)

    def _record(self, out, parents, backward_fn):
        out._tape = self
        out._produced = True
        out.tape_id = len(self._nodes)
        self._nodes.append(_Node(out, parents, backward_fn))


def _check_finite(arr: np.ndarray, op: str):
    if not np.isfinite(arr).all():
        raise FloatingPointError(f"non-finite value produced by {op}")


def _apply(op: str, out_data: np.ndarray, parents: tuple, backward_fn) -> Tensor:
    _check_finite(out_data, op)
    out = Tensor(out_data)
    tape = active_tape()
    if tape is not None and any(p.requires_grad for p in parents):
        out.requires_grad = True
        tape._record(out, parents, backward_fn)
    return out


def backward(loss: Tensor) -> dict:
    """Backpropagate from a scalar loss through its recording tape.

    Returns {leaf tensor: gradient array} for every requires_grad leaf that
    the loss depends on, and accumulates the same gradients into each leaf's
    `.grad`. Each tape node is visited exactly once.
    """
    if loss.shape != (1, 1):
        raise ValueError(f"backward needs a scalar (1x1) loss, got shape {loss.shape}")
    if loss._tape is None:
        raise ValueError("loss was not recorded on a tape (no gradient path)")
    tape = loss._tape

    pending = {id(loss): np.ones((1, 1))}
    holders = {id(loss): loss}
    for node in reversed(tape._nodes):
        g = pending.pop(id(node.out), None)
        if g is None:
            continue
        holders.pop(id(node.out), None)
        for parent, pg in zip(node.parents, node.backward_fn(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in pending:
                pending[key] = pending[key] + pg
            else:
                pending[key] = pg
                holders[key] = parent

    grads = {}
    for key, g in pending.items():
        leaf = holders[key]
        if not leaf.requires_grad:
            continue
        leaf.grad = g if leaf.grad is None else leaf.grad + g
        grads[leaf] = g
    return grads


def _shapes(*tensors):
    return " vs ".join(str(t.shape) for t in tensors)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {_shapes(a, b)}")
    ad, bd = a.data, b.data
    return _apply("matmul", ad @ bd, (a, b),
                  lambda g: (g @ bd.T, ad.T @ g))


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; a (1, n) operand broadcasts over the other's rows."""
    if a.shape == b.shape:
        return _apply("add", a.data + b.data, (a, b), lambda g: (g, g))
    if b.shape == (1, a.shape[1]):
        return _apply("add", a.data + b.data, (a, b),
                      lambda g: (g, g.sum(axis=0, keepdims=True)))
    if a.shape == (1, b.shape[1]):
        return _apply("add", a.data + b.data, (a, b),
                      lambda g: (g.sum(axis=0, keepdims=True), g))
    raise ValueError(f"add shape mismatch: {_shapes(a, b)}")


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ValueError(f"mul shape mismatch: {_shapes(a, b)}")
    ad, bd = a.data, b.data
    return _apply("mul", ad * bd, (a, b), lambda g: (g * bd, g * ad))


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return _apply("scale", a.data * c, (a,), lambda g: (g * c,))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _apply("relu", np.where(mask, a.data, 0.0), (a,),
                  lambda g: (g * mask,))


def prelu(a: Tensor, slope: Tensor) -> Tensor:
    """Parametric ReLU with one learnable scalar slope (a 1x1 tensor)."""
    if slope.shape != (1, 1):
        raise ValueError(f"prelu slope must be 1x1, got {slope.shape}")
    neg = a.data < 0
    s = slope.data[0, 0]
    out = np.where(neg, s * a.data, a.data)

    def back(g):
        ga = g * np.where(neg, s, 1.0)
        gs = np.array([[np.sum(g * a.data * neg)]])
        return ga, gs

    return _apply("prelu", out, (a, slope), back)


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return _apply("sigmoid", out, (a,), lambda g: (g * out * (1.0 - out),))


def dropout_mask(a: Tensor, p: float, seed: int) -> Tensor:
    """Inverted dropout: zero entries with probability p, rescale by 1/(1-p)."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if p == 0.0:
        return _apply("dropout", a.data.copy(), (a,), lambda g: (g,))
    rng = np.random.default_rng(seed)
    mask = (rng.random(a.shape) >= p) / (1.0 - p)
    return _apply("dropout", a.data * mask, (a,), lambda g: (g * mask,))


def row_cosine(a: Tensor, b: Tensor) -> Tensor:
    """Per-row cosine similarity, returned as a column (m, 1).

    Rows where either side has zero norm get similarity 0 and zero gradient,
    so fully masked feature rows cannot poison the loss with NaNs.
    """
    if a.shape != b.shape:
        raise ValueError(f"row_cosine shape mismatch: {_shapes(a, b)}")
    ad, bd = a.data, b.data
    na = np.linalg.norm(ad, axis=1, keepdims=True)
    nb = np.linalg.norm(bd, axis=1, keepdims=True)
    denom = na * nb
    ok = denom > 0
    safe = np.where(ok, denom, 1.0)
    dots = np.sum(ad * bd, axis=1, keepdims=True)
    cos = np.where(ok, dots / safe, 0.0)

    def back(g):
        g = g * ok
        ga = g * (bd / safe - cos * ad / np.where(ok, na * na, 1.0))
        gb = g * (ad / safe - cos * bd / np.where(ok, nb * nb, 1.0))
        return ga, gb

    return _apply("row_cosine", cos, (a, b), back)


def sum_all(a: Tensor) -> Tensor:
    shape = a.shape
    return _apply("sum_all", np.array([[a.data.sum()]]), (a,),
                  lambda g: (np.full(shape, g[0, 0]),))


def take_rows(a: Tensor, idx: np.ndarray) -> Tensor:
    """Gather rows by index; gradients scatter-add back."""
    idx = np.asarray(idx, dtype=np.int64)
    if len(idx) > 0 and (idx.min() < 0 or idx.max() >= a.shape[0]):
        raise ValueError(
            f"row index out of range [0, {a.shape[0]}): {idx.min()}..{idx.max()}")
    shape = a.shape

    def back(g):
        ga = np.zeros(shape)
        np.add.at(ga, idx, g)
        return (ga,)

    return _apply("take_rows", a.data[idx], (a,), back)


def replace_rows(a: Tensor, idx: np.ndarray, row: Tensor) -> Tensor:
    """Overwrite the rows at `idx` with a single learnable (1, d) row.

    Gradient to `a` is zeroed at the replaced rows; the row parameter
    receives the sum of their upstream gradients.
    """
    idx = np.asarray(idx, dtype=np.int64)
    if row.shape != (1, a.shape[1]):
        raise ValueError(f"replacement row must be (1, {a.shape[1]}), got {row.shape}")
    out = a.data.copy()
    out[idx] = row.data

    def back(g):
        ga = g.copy()
        ga[idx] = 0.0
        grow = g[idx].sum(axis=0, keepdims=True)
        return ga, grow

    return _apply("replace_rows", out, (a, row), back)


def concat_rows(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"concat_rows width mismatch: {_shapes(a, b)}")
    na = a.shape[0]
    return _apply("concat_rows", np.vstack([a.data, b.data]), (a, b),
                  lambda g: (g[:na], g[na:]))


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"concat_cols height mismatch: {_shapes(a, b)}")
    na = a.shape[1]
    return _apply("concat_cols", np.hstack([a.data, b.data]), (a, b),
                  lambda g: (g[:, :na], g[:, na:]))


def slice_rows(a: Tensor, start: int, stop: int) -> Tensor:
    shape = a.shape

    def back(g):
        ga = np.zeros(shape)
        ga[start:stop] = g
        return (ga,)

    return _apply("slice_rows", a.data[start:stop].copy(), (a,), back)


def sparse_dense_matmul(adj, h: Tensor) -> Tensor:
    """Left-multiply by a constant scipy sparse matrix."""
    if adj.shape[1] != h.shape[0]:
        raise ValueError(f"sparse_dense_matmul shape mismatch: {adj.shape} vs {h.shape}")
    return _apply("sparse_dense_matmul", np.asarray(adj @ h.data), (h,),
                  lambda g: (np.asarray(adj.T @ g),))


def bce_with_logits(logits: Tensor, labels: np.ndarray,
                    weights: np.ndarray) -> Tensor:
    """Per-link weighted binary cross-entropy, averaged over the batch count.

    Numerically stable fused form: per element
    w * (max(s, 0) - s*y + log(1 + exp(-|s|))), summed and divided by the
    number of links. Labels and weights are constants.
    """
    y = np.asarray(labels, dtype=np.float64).reshape(logits.shape)
    w = np.asarray(weights, dtype=np.float64).reshape(logits.shape)
    s = logits.data
    m = s.shape[0] * s.shape[1]
    per = np.maximum(s, 0.0) - s * y + np.log1p(np.exp(-np.abs(s)))
    out = np.array([[np.sum(w * per) / m]])

    def back(g):
        p = np.empty_like(s)
        pos = s >= 0
        p[pos] = 1.0 / (1.0 + np.exp(-s[pos]))
        ex = np.exp(s[~pos])
        p[~pos] = ex / (1.0 + ex)
        return (g[0, 0] * w * (p - y) / m,)

    return _apply("bce_with_logits", out, (logits,), back)
