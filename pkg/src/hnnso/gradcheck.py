"""Central finite-difference checks of every analytic gradient.

Relative error per coordinate is ``|a - n| / max(|a|, |n|, floor)``.  The
floor keeps coordinates whose true gradient is at round-off level from
dominating: with step ``h`` the difference quotient carries an absolute
error of roughly ``1e-16 * |loss| / h``, which is why the step is
1e-5 rather than the more usual 1e-6 (truncation error is still ~h**2).
"""

import numpy as np

from . import baselines, layers, model as hm
from .linalg import Rng, derive_seed
from .optim import l2_penalty, sse_loss

STEP = 1e-5
FLOOR = 1e-4


def numeric_grad(f, arrays, h=STEP):
    """Central differences of ``f()`` w.r.t. every entry of each array (perturbed in place)."""
    out = {}
    for name, arr in arrays.items():
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            fp = f()
            flat[i] = old - h
            fm = f()
            flat[i] = old
            gflat[i] = (fp - fm) / (2.0 * h)
        out[name] = g
    return out


def relative_error(analytic, numeric, floor=FLOOR):
    worst = 0.0
    for name, n in numeric.items():
        a = analytic[name]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def _rand_layer(rng, n_in, n_hidden, n_out, scale=0.5):
    c = n_in + n_hidden
    return layers.BilinearTensorLayer(
        w_h=rng.uniform_range(-scale, scale, (n_hidden, n_in)),
        b_h=rng.uniform_range(-scale, scale, n_hidden),
        t=rng.uniform_range(-scale, scale, (n_out, c, c)),
        w=rng.uniform_range(-scale, scale, (n_out, c)),
        b=rng.uniform_range(-scale, scale, n_out),
    )


def _dims(rng, k):
    return [2 + int(rng.uniform() * 5) for _ in range(k)]


def check_bilinear(seed, batch=3):
    rng = Rng(derive_seed(seed, 11))
    n_in, n_hidden, n_out = _dims(rng, 3)
    layer = _rand_layer(rng, n_in, n_hidden, n_out)
    x = rng.uniform_range(-1.0, 1.0, (batch, n_in))
    target = rng.uniform_range(-1.0, 1.0, (batch, n_out))

    def f():
        return sse_loss(layers.bilinear_forward(layer, x)[0], target)[0]

    y, cache = layers.bilinear_forward(layer, x)
    grads, dx = layers.bilinear_backward(layer, cache, sse_loss(y, target)[1])
    analytic = dict(grads, x=dx)
    return relative_error(analytic, numeric_grad(f, dict(layer.params(), x=x)))


def check_autoencoder(seed, batch=3, corrupted=True):
    rng = Rng(derive_seed(seed, 12))
    m, h_e = _dims(rng, 2)
    ae = layers.GatedAutoencoder(rng.uniform_range(-0.8, 0.8, (h_e, m, m)))
    y = rng.uniform_range(-1.0, 1.0, (batch, m))
    target = rng.uniform_range(-1.0, 1.0, (batch, m))
    if corrupted:
        k1 = (rng.uniform((batch, m)) >= 0.3).astype(float)
        k2 = (rng.uniform((batch, m)) >= 0.3).astype(float)
    else:
        k1 = k2 = np.ones((batch, m))

    def f():
        out, _ = layers.gae_forward(ae, y * k1, y * k2, k1, k2)
        return sse_loss(out, target)[0]

    out, cache = layers.gae_forward(ae, y * k1, y * k2, k1, k2)
    dt, dy = layers.gae_backward(ae, cache, sse_loss(out, target)[1])
    return relative_error({"t": dt, "y": dy}, numeric_grad(f, {"t": ae.t, "y": y}))


def _small_model(seed, n_in=3, m_out=2, h_x=2, h_e=2):
    rng = Rng(derive_seed(seed, 13))
    cfg = hm.HnnsoConfig(n_in, m_out, h_x1=h_x, h_x2=h_x, h_e=h_e, seed=seed)
    model = hm.HnnsoModel(
        cfg,
        _rand_layer(rng, n_in, h_x, m_out),
        _rand_layer(rng, m_out, h_x, m_out),
        layers.GatedAutoencoder(rng.uniform_range(-0.8, 0.8, (h_e, m_out, m_out))),
    )
    return model, rng


def check_model(seed, mode="finetune", lam=1e-3, batch=4):
    """Full objective (sum-squared error + L2 over all parameters)."""
    model, rng = _small_model(seed)
    cfg = model.config
    x = rng.uniform_range(-1.0, 1.0, (batch, cfg.n_in))
    target = rng.uniform_range(-0.9, 0.9, (batch, cfg.m_out))
    mask_seed = derive_seed(seed, 14)
    params = model.params()
    if mode == "ae_pretrain":
        params = {"ae.t": params["ae.t"]}

    def objective():
        out, caches = hm.forward_train(model, x, target, mode, Rng(mask_seed))
        loss, d = sse_loss(out, target)
        pen, pgrads = l2_penalty(params, lam)
        return loss + pen, d, caches, pgrads

    def f():
        return objective()[0]

    _, d, caches, pgrads = objective()
    grads = hm.backward(model, caches, d)
    analytic = {k: grads[k] + pgrads[k] for k in params}
    return relative_error(analytic, numeric_grad(f, params))


def check_mlp(seed, n_in=3, hidden=2, m_out=2, batch=4):
    rng = Rng(derive_seed(seed, 15))
    mlp = baselines.MlpModel(
        rng.uniform_range(-0.8, 0.8, (hidden, n_in)), rng.uniform_range(-0.5, 0.5, hidden),
        rng.uniform_range(-0.8, 0.8, (m_out, hidden)), rng.uniform_range(-0.5, 0.5, m_out),
    )
    x = rng.uniform_range(-1.0, 1.0, (batch, n_in))
    target = rng.uniform_range(-0.9, 0.9, (batch, m_out))

    def f():
        return sse_loss(baselines.mlp_predict(mlp, x), target)[0]

    y, cache = baselines.mlp_forward(mlp, x)
    grads = baselines.mlp_backward(mlp, cache, sse_loss(y, target)[1])
    return relative_error(grads, numeric_grad(f, mlp.params()))


CHECKS = {
    "bilinear_layer": check_bilinear,
    "autoencoder_corrupted": lambda s: check_autoencoder(s, corrupted=True),
    "autoencoder_clean": lambda s: check_autoencoder(s, corrupted=False),
    "hnnso_finetune": lambda s: check_model(s, "finetune"),
    "hnnso_ae_pretrain": lambda s: check_model(s, "ae_pretrain"),
    "mlp": check_mlp,
}


def run_all(n_seeds=20, base_seed=0):
    """Worst relative error per check over ``n_seeds`` random instances."""
    return {name: max(fn(base_seed + s) for s in range(n_seeds)) for name, fn in CHECKS.items()}
