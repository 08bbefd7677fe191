"""Adam with decoupled weight decay, operating on named parameter dicts."""

from dataclasses import dataclass, field

import numpy as np

from .errors import TrainingError


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0


def init_adam_state(params: dict) -> AdamState:
    state = AdamState()
    for name, p in params.items():
        state.m[name] = np.zeros_like(p.data)
        state.v[name] = np.zeros_like(p.data)
    return state


def adam_step(params: dict, grads: dict, state: AdamState, lr: float,
              weight_decay: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> None:
    """One in-place update of every parameter.

    Weight decay is applied directly to the parameter (decoupled from the
    moment estimates). A parameter absent from `grads` is treated as having
    a zero gradient; it still experiences weight decay.
    """
    if state.m.keys() != params.keys():
        raise ValueError("optimizer state does not match parameter set")
    state.step += 1
    t = state.step
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p.data)
        elif not np.isfinite(g).all():
            raise TrainingError(f"non-finite gradient for parameter {name!r}")
        if g.shape != p.data.shape:
            raise ValueError(
                f"gradient shape {g.shape} does not match parameter {name!r} "
                f"shape {p.data.shape}")
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        m_hat = m / bc1
        v_hat = v / bc2
        if weight_decay:
            p.data *= 1.0 - lr * weight_decay
        p.data -= lr * m_hat / (np.sqrt(v_hat) + eps)


def grads_by_name(params: dict, grad_map: dict) -> dict:
    """Translate a backward() tensor-keyed map into a name-keyed map."""
    by_id = {id(p): name for name, p in params.items()}
    out = {}
    for tensor, g in grad_map.items():
        name = by_id.get(id(tensor))
        if name is not None:
            out[name] = g
    return out
