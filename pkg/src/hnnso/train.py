"""Layer-wise discriminative pretraining, joint fine-tuning and fold plans.

Pretraining runs bottom up:

1. layer1 alone maps inputs to the gold labels;
2. layer1 is frozen and layer2 maps layer1's outputs to the gold labels;
3. the auto-encoder learns to reconstruct gold labels from two independently
   corrupted copies of them.

Fine-tuning then updates all parameters jointly on the uncorrupted stack.
Each stage and fine-tuning get a fresh AdaGrad state.  Batch objectives sum
per-example squared errors and carry ``batch_size / n`` of the L2 penalty, so
one epoch adds up to the full-data objective.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ShapeError, ValidationError
from .layers import bilinear_backward, bilinear_forward
from .linalg import Rng, derive_seed
from .model import backward, forward_train, predict
from .noise import corrupt  # noqa: F401  (re-exported)
from .optim import AdaGradState, adagrad_step, l2_penalty, sse_loss

STAGE_KEYS = {"stage1": 1, "stage2": 2, "stage3": 3, "finetune": 4, "mlp": 5, "val": 6}


class DivergenceError(NumericalError):
    """Training produced a non-finite loss."""


@dataclass
class TrainConfig:
    epochs_stage1: int = 50
    epochs_stage2: int = 50
    epochs_stage3: int = 100
    epochs_finetune: int = 300
    batch_size: int = 32
    base_lr: float = 0.01
    eps: float = 1e-8
    lam: float = 1e-4
    l2_biases: bool = True
    corruption_p: float = 0.25
    patience: int = 20
    seed: int = 0
    val_fraction: float = 0.1

    def __post_init__(self):
        for name in ("epochs_stage1", "epochs_stage2", "epochs_stage3", "epochs_finetune"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0")
        if self.batch_size < 1 or self.patience < 1:
            raise ValidationError("batch_size and patience must be >= 1")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValidationError(f"val_fraction must lie in (0, 1), got {self.val_fraction}")
        if not 0.0 <= self.corruption_p <= 1.0:
            raise ValidationError(f"corruption_p must lie in [0, 1], got {self.corruption_p}")
        if self.lam < 0 or self.base_lr <= 0:
            raise ValidationError("lam must be >= 0 and base_lr > 0")


@dataclass
class FoldPlan:
    k: int
    assignments: np.ndarray

    def test_indices(self, fold):
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold):
        return np.flatnonzero(self.assignments != fold)

    def sizes(self):
        return np.bincount(self.assignments, minlength=self.k)


def kfold_split(n_examples, k, seed):
    """Seeded permutation, then round-robin fold assignment."""
    if k < 2:
        raise ValidationError(f"k must be >= 2, got {k}")
    if n_examples < k:
        raise ValidationError(f"cannot split {n_examples} examples into {k} folds")
    perm = Rng(derive_seed(seed, 0xF01D)).permutation(n_examples)
    assignments = np.empty(n_examples, dtype=np.int64)
    assignments[perm] = np.arange(n_examples) % k
    return FoldPlan(k, assignments)


def carve_validation(n, fraction, seed):
    """Split ``range(n)`` into ``(fit_idx, val_idx)`` with a seeded shuffle."""
    n_val = int(round(fraction * n))
    if n_val < 1 or n_val >= n:
        raise ValidationError(f"validation fraction {fraction} of {n} examples gives an empty split")
    perm = Rng(derive_seed(seed, 0x7A1)).permutation(n)
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def rmse_units(pred, truth, scaler_y=None):
    """RMSE after undoing the target scaling (when a scaler is given)."""
    if scaler_y is not None:
        pred = scaler_y.invert(pred)
        truth = scaler_y.invert(truth)
    return float(np.sqrt(np.mean((pred - truth) ** 2)))


class TrainLog:
    """Tab-separated ``stage, epoch, train_loss, val_rmse`` lines."""

    def __init__(self, stream=None):
        self.lines = []
        self.stream = stream

    def record(self, stage, epoch, train_loss, val_rmse):
        line = f"{stage}\t{epoch}\t{train_loss:.17g}\t{val_rmse:.17g}"
        self.lines.append(line)
        if self.stream is not None:
            self.stream.write(line + "\n")

    def text(self):
        return "".join(line + "\n" for line in self.lines)


def run_epochs(params, batch_grad, n, cfg, stage, epochs, val_fn=None, log=None, early_stopping=False):
    """Generic mini-batch AdaGrad loop over ``params`` (name -> live array).

    ``batch_grad(idx, rng)`` returns ``(loss, grads)`` for the rows ``idx``.
    With ``early_stopping`` the parameters are restored to the snapshot with
    the lowest validation RMSE (the starting point included) and the best
    value is returned.
    """
    rng = Rng(derive_seed(cfg.seed, STAGE_KEYS[stage]))
    state = AdaGradState(cfg.base_lr, cfg.eps)
    best_val = val_fn() if (early_stopping and val_fn is not None) else math.inf
    best = {k: v.copy() for k, v in params.items()} if early_stopping else None
    best_epoch = 0
    bad = 0
    for epoch in range(1, epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, grads = batch_grad(idx, rng)
            if not math.isfinite(loss):
                raise DivergenceError(f"{stage}: non-finite loss at epoch {epoch}")
            total += loss
            adagrad_step(params, grads, state)
        val = val_fn() if val_fn is not None else math.nan
        if log is not None:
            log.record(stage, epoch, total, val)
        if early_stopping:
            if val < best_val:
                best_val, best_epoch, bad = val, epoch, 0
                best = {k: v.copy() for k, v in params.items()}
            else:
                bad += 1
                if bad >= cfg.patience:
                    break
    if early_stopping:
        for k, v in best.items():
            params[k][...] = v
        if log is not None:
            log.record(f"{stage}-best", best_epoch, math.nan, best_val)
        return best_val
    return None


def add_l2(params, cfg, frac, loss, grads):
    penalty, pgrads = l2_penalty(params, cfg.lam * frac, cfg.l2_biases)
    for k, g in pgrads.items():
        grads[k] = grads[k] + g
    return loss + penalty, grads


def _prefixed(grads, prefix):
    return {f"{prefix}.{k}": v for k, v in grads.items()}


def _sub(params, prefix):
    return {k: v for k, v in params.items() if k.startswith(prefix + ".")}


def pretrain(model, data, cfg, val=None, log=None):
    """Three bottom-up stages against the gold labels (data already scaled)."""
    _check_dims(model, data)
    n = data.n
    x, y = data.x, data.y
    allp = model.params()
    sy = model.scaler_y

    # stage 1: layer1 alone
    p1 = _sub(allp, "layer1")

    def grad1(idx, rng):
        out, cache = bilinear_forward(model.layer1, x[idx])
        loss, d = sse_loss(out, y[idx])
        g, _ = bilinear_backward(model.layer1, cache, d)
        return add_l2(p1, cfg, len(idx) / n, loss, _prefixed(g, "layer1"))

    val1 = None if val is None else (lambda: rmse_units(bilinear_forward(model.layer1, val.x)[0], val.y, sy))
    run_epochs(p1, grad1, n, cfg, "stage1", cfg.epochs_stage1, val1, log)

    # stage 2: layer2 on frozen layer1 outputs
    y0 = bilinear_forward(model.layer1, x)[0]
    p2 = _sub(allp, "layer2")

    def grad2(idx, rng):
        out, cache = bilinear_forward(model.layer2, y0[idx])
        loss, d = sse_loss(out, y[idx])
        g, _ = bilinear_backward(model.layer2, cache, d)
        return add_l2(p2, cfg, len(idx) / n, loss, _prefixed(g, "layer2"))

    val2 = None
    if val is not None:
        v0 = bilinear_forward(model.layer1, val.x)[0]
        val2 = lambda: rmse_units(bilinear_forward(model.layer2, v0)[0], val.y, sy)  # noqa: E731
    run_epochs(p2, grad2, n, cfg, "stage2", cfg.epochs_stage2, val2, log)

    # stage 3: denoising auto-encoder on corrupted gold labels
    train_autoencoder(model, y, cfg, val_y=None if val is None else val.y, log=log)
    return model


def train_autoencoder(model, y, cfg, val_y=None, log=None):
    """Stage 3 alone: fit the tied tensor to denoise the label matrix ``y``."""
    n = y.shape[0]
    p3 = _sub(model.params(), "ae")
    p = cfg.corruption_p

    def grad3(idx, rng):
        out, caches = forward_train(model, None, y[idx], "ae_pretrain", rng, p)
        loss, d = sse_loss(out, y[idx])
        return add_l2(p3, cfg, len(idx) / n, loss, backward(model, caches, d))

    val3 = None
    if val_y is not None:
        def val3():
            rng = Rng(derive_seed(cfg.seed, STAGE_KEYS["val"]))
            out, _ = forward_train(model, None, val_y, "ae_pretrain", rng, p)
            return rmse_units(out, val_y, model.scaler_y)

    run_epochs(p3, grad3, n, cfg, "stage3", cfg.epochs_stage3, val3, log)
    return model


def finetune(model, data, cfg, val=None, log=None):
    """Joint training of every parameter with early stopping on validation RMSE.

    Without ``val`` a validation split of ``cfg.val_fraction`` is carved from
    ``data``.  The model is left at its best-validation parameters; returns
    ``(model, best_val_rmse)``.
    """
    _check_dims(model, data)
    if val is None:
        fit_idx, val_idx = carve_validation(data.n, cfg.val_fraction, cfg.seed)
        data, val = data.subset(fit_idx), data.subset(val_idx)
    if val.n < 1:
        raise ValidationError("finetune needs a non-empty validation split")
    n = data.n
    x, y = data.x, data.y
    params = model.params()

    def gradf(idx, rng):
        out, caches = forward_train(model, x[idx], y[idx], "finetune", rng)
        loss, d = sse_loss(out, y[idx])
        return add_l2(params, cfg, len(idx) / n, loss, backward(model, caches, d))

    def valf():
        return rmse_units(predict(model, val.x)[0], val.y, model.scaler_y)

    best = run_epochs(params, gradf, n, cfg, "finetune", cfg.epochs_finetune, valf, log, early_stopping=True)
    return model, best


def _check_dims(model, data):
    if data.n_in != model.config.n_in or data.m_out != model.config.m_out:
        raise ShapeError(
            f"data has N={data.n_in}, M={data.m_out}; model expects N={model.config.n_in}, M={model.config.m_out}"
        )
