"""Sum-squared objective with L2 weight decay, and the AdaGrad update."""

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError, ValidationError


def sse_loss(pred, target):
    """Return ``(sum of squared errors, d loss / d pred)``."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"sse_loss: pred {pred.shape} vs target {target.shape}")
    diff = pred - target
    return float(np.sum(diff * diff)), 2.0 * diff


def is_bias(name):
    return name.rsplit(".", 1)[-1].startswith("b")


def l2_penalty(params, lam, include_biases=True):
    """``lam * sum(theta**2)`` over ``params`` (a name -> array mapping).

    Returns ``(penalty, grads)``; excluded parameters get no entry in grads.
    """
    if lam < 0:
        raise ValidationError(f"L2 weight must be non-negative, got {lam}")
    penalty = 0.0
    grads = {}
    for name, p in params.items():
        if not include_biases and is_bias(name):
            continue
        penalty += float(np.sum(p * p))
        grads[name] = 2.0 * lam * p
    return lam * penalty, grads


@dataclass
class LossSpec:
    lam: float = 1e-4
    include_biases: bool = True

    def __post_init__(self):
        if self.lam < 0:
            raise ValidationError(f"L2 weight must be non-negative, got {self.lam}")


@dataclass
class AdaGradState:
    base_lr: float = 0.01
    eps: float = 1e-8
    accumulators: dict = field(default_factory=dict)


def adagrad_step(params, grads, state):
    """In-place AdaGrad update of every parameter that has a gradient.

    ``acc += g**2; theta -= base_lr * g / (sqrt(acc) + eps)``.
    """
    for name, g in grads.items():
        p = params[name]
        if g.shape != p.shape:
            raise ShapeError(f"adagrad_step: gradient {name} has shape {g.shape}, parameter {p.shape}")
        acc = state.accumulators.get(name)
        if acc is None:
            acc = state.accumulators[name] = np.zeros_like(p)
        elif acc.shape != p.shape:
            raise ShapeError(f"adagrad_step: accumulator {name} has shape {acc.shape}, parameter {p.shape}")
        acc += g * g
        denom = np.sqrt(acc) + state.eps
        # acc == 0 implies g == 0: no step (avoids 0/0 when eps == 0)
        p -= state.base_lr * np.divide(g, denom, out=np.zeros_like(g), where=denom > 0)
    return params, state
