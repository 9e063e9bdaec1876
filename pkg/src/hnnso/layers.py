"""Forward and reverse-mode passes for the bilinear tensor layer and the tied
gated auto-encoder.

All functions accept a single example (1-D arrays) or a batch (2-D arrays,
examples along axis 0).  Parameter gradients returned by the backward passes
are summed over the batch.
"""

from dataclasses import dataclass, field, fields

import numpy as np

from .errors import ContractError, ShapeError
from .linalg import bilinear_slices, contract_13


def _as_batch(x, n, what):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    if x2.ndim != 2 or x2.shape[1] != n:
        raise ShapeError(f"{what}: expected length {n}, got array of shape {x.shape}")
    return x2, single


def _unbatch(a, single):
    return a[0] if single else a


@dataclass(eq=False)
class BilinearTensorLayer:
    """``y = tanh(c^T T c + W c + b)`` with ``c = [x; tanh(W_h x + b_h)]``.

    Shapes: ``w_h (H, N)``, ``b_h (H,)``, ``t (M, N+H, N+H)`` (slice-major),
    ``w (M, N+H)``, ``b (M,)``.
    """

    w_h: np.ndarray
    b_h: np.ndarray
    t: np.ndarray
    w: np.ndarray
    b: np.ndarray

    PARAM_NAMES = ("w_h", "b_h", "t", "w", "b")

    def __post_init__(self):
        h, n = self.w_h.shape
        c = n + h
        m = self.b.shape[0]
        expected = {
            "b_h": (h,),
            "t": (m, c, c),
            "w": (m, c),
            "b": (m,),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ShapeError(
                    f"BilinearTensorLayer.{name} has shape {getattr(self, name).shape}, expected {shape}"
                )

    @classmethod
    def zeros(cls, n_in, n_hidden, n_out):
        c = n_in + n_hidden
        return cls(
            w_h=np.zeros((n_hidden, n_in)),
            b_h=np.zeros(n_hidden),
            t=np.zeros((n_out, c, c)),
            w=np.zeros((n_out, c)),
            b=np.zeros(n_out),
        )

    @property
    def n_in(self):
        return self.w_h.shape[1]

    @property
    def n_hidden(self):
        return self.w_h.shape[0]

    @property
    def n_out(self):
        return self.b.shape[0]

    def params(self):
        return {name: getattr(self, name) for name in self.PARAM_NAMES}

    def num_params(self):
        return sum(p.size for p in self.params().values())


@dataclass(eq=False)
class BilinearCache:
    layer_id: int
    x: np.ndarray
    h: np.ndarray
    c: np.ndarray
    y: np.ndarray
    single: bool


def bilinear_forward(layer, x):
    x2, single = _as_batch(x, layer.n_in, "bilinear_forward input")
    h = np.tanh(x2 @ layer.w_h.T + layer.b_h)
    c = np.concatenate([x2, h], axis=1)
    pre = bilinear_slices(layer.t, c, c) + c @ layer.w.T + layer.b
    y = np.tanh(pre)
    cache = BilinearCache(id(layer), x2, h, c, y, single)
    return _unbatch(y, single), cache


def bilinear_backward(layer, cache, dy):
    """Gradients of a scalar loss given ``dy = dL/dy``.

    Returns ``(grads, dx)`` where ``grads`` maps parameter names to arrays
    shaped like the parameters.
    """
    if cache.layer_id != id(layer) or cache.c.shape[1] != layer.n_in + layer.n_hidden:
        raise ContractError("bilinear_backward: cache was not produced by this layer")
    dy2 = np.atleast_2d(np.asarray(dy, dtype=np.float64))
    if dy2.shape != cache.y.shape:
        raise ContractError(f"bilinear_backward: dy shape {dy2.shape} != output shape {cache.y.shape}")
    c = cache.c
    n = layer.n_in
    dpre = dy2 * (1.0 - cache.y ** 2)
    # slice k gradient: sum_b dpre[b,k] c_b c_b^T
    dt = np.tensordot(dpre[:, :, None] * c[:, None, :], c, axes=([0], [0]))
    dw = dpre.T @ c
    db = dpre.sum(axis=0)
    t_c = np.tensordot(c, layer.t, axes=([1], [2]))    # (b, k, i) = T_k c
    tt_c = np.tensordot(c, layer.t, axes=([1], [1]))   # (b, k, j) = T_k^T c
    dc = np.einsum("bk,bki->bi", dpre, t_c + tt_c) + dpre @ layer.w
    dhpre = dc[:, n:] * (1.0 - cache.h ** 2)
    dw_h = dhpre.T @ cache.x
    db_h = dhpre.sum(axis=0)
    dx = dc[:, :n] + dhpre @ layer.w_h
    grads = {"w_h": dw_h, "b_h": db_h, "t": dt, "w": dw, "b": db}
    return grads, _unbatch(dx, cache.single)


@dataclass(eq=False)
class GatedAutoencoder:
    """Tied gated auto-encoder over M-dimensional outputs.

    One tensor ``t`` of shape ``(H_e, M, M)`` serves both directions.  The
    encoder reads slice k as a quadratic form,
    ``h[k] = tanh(sum_ij y1[i] t[k,i,j] y2[j])``, and the decoder contracts
    rows and slices, ``out[j] = tanh(sum_ik y[i] t[k,i,j] h[k])``.
    """

    t: np.ndarray

    PARAM_NAMES = ("t",)

    def __post_init__(self):
        if self.t.ndim != 3 or self.t.shape[1] != self.t.shape[2]:
            raise ShapeError(f"GatedAutoencoder tensor must be (H_e, M, M), got {self.t.shape}")

    @classmethod
    def zeros(cls, m, h_e):
        return cls(np.zeros((h_e, m, m)))

    @property
    def m(self):
        return self.t.shape[1]

    @property
    def n_hidden(self):
        return self.t.shape[0]

    def params(self):
        return {"t": self.t}

    def num_params(self):
        return self.t.size


@dataclass(eq=False)
class GaeCache:
    """Inputs and activations of one auto-encoder pass.

    ``keep1``, ``keep2`` are the elementwise derivatives of each encoder copy
    with respect to the clean input (the zero-masking keep mask, or ones for
    additive noise).  The decoder argument is the first copy.
    """

    ae_id: int
    u1: np.ndarray
    u2: np.ndarray
    he: np.ndarray
    out: np.ndarray
    keep1: np.ndarray
    keep2: np.ndarray
    single: bool
    extras: dict = field(default_factory=dict)


def gae_encode(ae, y1, y2):
    return np.tanh(bilinear_slices(ae.t, y1, y2))


def gae_decode(ae, y1, h):
    return np.tanh(contract_13(ae.t, y1, h))


def gae_forward(ae, y1, y2=None, keep1=None, keep2=None):
    """Encode the pair ``(y1, y2)`` and decode with ``y1`` as the gated input.

    ``y2`` defaults to ``y1`` (the uncorrupted fine-tuning case).
    """
    u1, single = _as_batch(y1, ae.m, "gae_forward y1")
    u2 = u1 if y2 is None else _as_batch(y2, ae.m, "gae_forward y2")[0]
    if u2.shape != u1.shape:
        raise ShapeError(f"gae_forward: copies differ in shape, {u1.shape} vs {u2.shape}")
    k1 = np.ones_like(u1) if keep1 is None else np.atleast_2d(keep1).astype(np.float64)
    k2 = np.ones_like(u2) if keep2 is None else np.atleast_2d(keep2).astype(np.float64)
    he = gae_encode(ae, u1, u2)
    out = gae_decode(ae, u1, he)
    cache = GaeCache(id(ae), u1, u2, he, out, k1, k2, single)
    return _unbatch(out, single), cache


def gae_backward(ae, cache, dy_out):
    """Return ``(dt, dy_in)``.

    ``dt`` sums the decode-side and encode-side uses of the tied tensor.
    ``dy_in`` is the gradient with respect to the clean input that both
    copies were derived from: decoder path plus both encoder copies, each
    passed through its keep mask.
    """
    if cache.ae_id != id(ae) or cache.u1.shape[1] != ae.m or cache.he.shape[1] != ae.n_hidden:
        raise ContractError("gae_backward: cache was not produced by this auto-encoder")
    dout = np.atleast_2d(np.asarray(dy_out, dtype=np.float64))
    if dout.shape != cache.out.shape:
        raise ContractError(f"gae_backward: dy_out shape {dout.shape} != output shape {cache.out.shape}")
    t = ae.t
    u1, u2, he = cache.u1, cache.u2, cache.he
    dpo = dout * (1.0 - cache.out ** 2)
    # decoder: pre[b,j] = sum_ki u1[b,i] t[k,i,j] he[b,k]
    dt = np.tensordot(he[:, :, None] * u1[:, None, :], dpo, axes=([0], [0]))
    t_dpo = np.tensordot(dpo, t, axes=([1], [2]))          # (b, k, i)
    d_dec = np.einsum("bk,bki->bi", he, t_dpo)
    dhe = np.einsum("bi,bki->bk", u1, t_dpo)
    # encoder: pre[b,k] = sum_ij u1[b,i] t[k,i,j] u2[b,j]
    dhp = dhe * (1.0 - he ** 2)
    dt += np.tensordot(dhp[:, :, None] * u1[:, None, :], u2, axes=([0], [0]))
    d_u1 = np.einsum("bk,bki->bi", dhp, np.tensordot(u2, t, axes=([1], [2])))
    d_u2 = np.einsum("bk,bkj->bj", dhp, np.tensordot(u1, t, axes=([1], [1])))
    dy_in = (d_dec + d_u1) * cache.keep1 + d_u2 * cache.keep2
    return dt, _unbatch(dy_in, cache.single)


def copy_params(obj):
    """Deep copy of a layer dataclass."""
    return type(obj)(**{f.name: getattr(obj, f.name).copy() for f in fields(obj)})
