"""Comparison models: a one-hidden-layer MLP and multivariate ridge regression."""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .checkpoint import (
    MAGIC_MLP,
    MAGIC_RIDGE,
    CheckpointError,
    read_container,
    scaler_blocks,
    scaler_from_blocks,
    write_container,
)
from .errors import NumericalError, ShapeError, ValidationError
from .linalg import Rng
from .optim import sse_loss
from .train import add_l2, carve_validation, rmse_units, run_epochs


@dataclass(eq=False)
class MlpModel:
    """``y = tanh(w2 tanh(w1 x + b1) + b2)``."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    scaler_x: object = None
    scaler_y: object = None

    def __post_init__(self):
        h, n = self.w1.shape
        m = self.w2.shape[0]
        if self.b1.shape != (h,) or self.w2.shape != (m, h) or self.b2.shape != (m,):
            raise ShapeError("MlpModel: inconsistent parameter shapes")

    @property
    def hidden(self):
        return self.w1.shape[0]

    def params(self):
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}

    def predict(self, x):
        return mlp_predict(self, x)

    def predict_raw(self, x):
        xs = self.scaler_x.apply(x) if self.scaler_x is not None else x
        y = self.predict(xs)
        return self.scaler_y.invert(y) if self.scaler_y is not None else y


def mlp_init(n_in, hidden, m_out, seed):
    rng = Rng(seed)
    r1 = np.sqrt(6.0 / (n_in + hidden))
    r2 = np.sqrt(6.0 / (hidden + m_out))
    return MlpModel(
        rng.uniform_range(-r1, r1, (hidden, n_in)),
        np.zeros(hidden),
        rng.uniform_range(-r2, r2, (m_out, hidden)),
        np.zeros(m_out),
    )


def mlp_forward(m, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != m.w1.shape[1]:
        raise ShapeError(f"mlp: input length {x.shape[-1]}, expected {m.w1.shape[1]}")
    h = np.tanh(x @ m.w1.T + m.b1)
    y = np.tanh(h @ m.w2.T + m.b2)
    return y, (np.atleast_2d(x), np.atleast_2d(h), np.atleast_2d(y))


def mlp_predict(m, x):
    return mlp_forward(m, x)[0]


def mlp_backward(m, cache, dy):
    x, h, y = cache
    dpre2 = np.atleast_2d(dy) * (1.0 - y ** 2)
    dpre1 = (dpre2 @ m.w2) * (1.0 - h ** 2)
    return {
        "w1": dpre1.T @ x,
        "b1": dpre1.sum(axis=0),
        "w2": dpre2.T @ h,
        "b2": dpre2.sum(axis=0),
    }


def mlp_train(data, cfg, hidden=32, epochs=None, val=None, log=None, init_seed=None):
    """Same objective, optimiser, batching and early stopping as HNNSO fine-tuning.

    ``data`` (and ``val``) are already scaled.  Returns ``(model, best_val_rmse)``.
    """
    if val is None:
        fit_idx, val_idx = carve_validation(data.n, cfg.val_fraction, cfg.seed)
        data, val = data.subset(fit_idx), data.subset(val_idx)
    model = mlp_init(data.n_in, hidden, data.m_out, cfg.seed if init_seed is None else init_seed)
    return mlp_fit(model, data, cfg, val, epochs, log)


def mlp_fit(model, data, cfg, val, epochs=None, log=None):
    n = data.n
    x, y = data.x, data.y
    params = model.params()

    def grad(idx, rng):
        out, cache = mlp_forward(model, x[idx])
        loss, d = sse_loss(out, y[idx])
        return add_l2(params, cfg, len(idx) / n, loss, mlp_backward(model, cache, d))

    def valf():
        return rmse_units(mlp_predict(model, val.x), val.y, model.scaler_y)

    if epochs is None:
        epochs = cfg.epochs_stage1 + cfg.epochs_stage2 + cfg.epochs_finetune
    best = run_epochs(params, grad, n, cfg, "mlp", epochs, valf, log, early_stopping=True)
    return model, best


@dataclass(eq=False)
class RidgeModel:
    """``coef`` is ``(N+1) x M`` with the intercept in row 0 (or ``N x M`` without)."""

    coef: np.ndarray
    lam: float
    intercept: bool = True
    scaler_x: object = None
    scaler_y: object = None

    def predict(self, x):
        return ridge_predict(self, x)

    def predict_raw(self, x):
        xs = self.scaler_x.apply(x) if self.scaler_x is not None else x
        y = self.predict(xs)
        return self.scaler_y.invert(y) if self.scaler_y is not None else y


def _augment(x, intercept):
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if not intercept:
        return x
    return np.hstack([np.ones((x.shape[0], 1)), x])


def ridge_fit(data, lam=1e-6, intercept=True):
    """Closed-form multi-output ridge; the intercept row is not penalised."""
    if lam < 0:
        raise ValidationError(f"ridge lambda must be >= 0, got {lam}")
    xa = _augment(data.x, intercept)
    gram = xa.T @ xa
    penalty = np.full(xa.shape[1], float(lam))
    if intercept:
        penalty[0] = 0.0
    gram[np.diag_indices_from(gram)] += penalty
    try:
        factor = scipy.linalg.cho_factor(gram, lower=True, check_finite=True)
        coef = scipy.linalg.cho_solve(factor, xa.T @ data.y)
    except np.linalg.LinAlgError:
        raise NumericalError("ridge_fit: normal equations are singular; use lambda > 0") from None
    if not np.all(np.isfinite(coef)):
        raise NumericalError("ridge_fit: non-finite coefficients; use lambda > 0")
    return RidgeModel(coef, float(lam), intercept)


def ridge_predict(model, x):
    x = np.asarray(x, dtype=np.float64)
    out = _augment(x, model.intercept) @ model.coef
    return out[0] if x.ndim == 1 else out


def ridge_objective(model, data):
    r = _augment(data.x, model.intercept) @ model.coef - data.y
    b = model.coef[1:] if model.intercept else model.coef
    return float(np.sum(r * r) + model.lam * np.sum(b * b))


def save_mlp(path, model):
    blocks = dict(model.params())
    blocks.update(scaler_blocks("scaler_x", model.scaler_x))
    blocks.update(scaler_blocks("scaler_y", model.scaler_y))
    write_container(path, MAGIC_MLP, {"hidden": str(model.hidden)}, blocks)


def load_mlp(path):
    _, _, blocks = read_container(path, MAGIC_MLP)
    try:
        return MlpModel(blocks["w1"], blocks["b1"], blocks["w2"], blocks["b2"],
                        scaler_from_blocks("scaler_x", blocks), scaler_from_blocks("scaler_y", blocks))
    except (KeyError, ShapeError) as exc:
        raise CheckpointError(f"{path}: inconsistent MLP checkpoint ({exc})") from None


def save_ridge(path, model):
    blocks = {"coef": model.coef}
    blocks.update(scaler_blocks("scaler_x", model.scaler_x))
    blocks.update(scaler_blocks("scaler_y", model.scaler_y))
    config = {"lam": repr(model.lam), "intercept": str(int(model.intercept))}
    write_container(path, MAGIC_RIDGE, config, blocks)


def load_ridge(path):
    _, cfg, blocks = read_container(path, MAGIC_RIDGE)
    try:
        return RidgeModel(blocks["coef"], float(cfg["lam"]), cfg["intercept"] == "1",
                          scaler_from_blocks("scaler_x", blocks), scaler_from_blocks("scaler_y", blocks))
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"{path}: inconsistent ridge checkpoint ({exc})") from None
