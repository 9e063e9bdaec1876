"""The assembled network: two bilinear tensor layers and a tied gated
auto-encoder on top.

    x --layer1--> y0 --layer2--> y1 --auto-encoder--> y2

Every intermediate output lives in label space (dimension ``m_out``).
"""

from dataclasses import asdict, dataclass, fields

import numpy as np

from .checkpoint import (
    MAGIC_HNNSO,
    CheckpointError,
    read_container,
    scaler_blocks,
    scaler_from_blocks,
    write_container,
)
from .errors import ContractError, ShapeError, ValidationError
from .layers import (
    BilinearTensorLayer,
    GatedAutoencoder,
    bilinear_backward,
    bilinear_forward,
    copy_params,
    gae_backward,
    gae_encode,
    gae_decode,
    gae_forward,
)
from .linalg import Rng
from .noise import corrupt, corrupt_gaussian

MODES = ("finetune", "ae_pretrain")
CORRUPTIONS = ("mask", "gaussian")


@dataclass
class HnnsoConfig:
    n_in: int
    m_out: int
    h_x1: int = 4
    h_x2: int = 4
    h_e: int = 8
    corruption_p: float = 0.25
    corruption: str = "mask"
    noise_sigma: float = 0.1
    init_scale: str = "glorot"
    tensor_init: float = 0.01
    seed: int = 0

    def __post_init__(self):
        for name in ("n_in", "m_out", "h_x1", "h_x2", "h_e"):
            if int(getattr(self, name)) < 1:
                raise ValidationError(f"HnnsoConfig.{name} must be >= 1, got {getattr(self, name)}")
        if not 0.0 <= self.corruption_p <= 1.0:
            raise ValidationError(f"corruption_p must lie in [0, 1], got {self.corruption_p}")
        if self.corruption not in CORRUPTIONS:
            raise ValidationError(f"corruption must be one of {CORRUPTIONS}, got {self.corruption!r}")
        if self.init_scale != "glorot":
            raise ValidationError(f"unknown init_scale rule {self.init_scale!r}")

    def to_strings(self):
        return {k: repr(v) if isinstance(v, float) else str(v) for k, v in asdict(self).items()}

    @classmethod
    def from_strings(cls, d):
        return cls(**{f.name: f.type(d[f.name]) for f in fields(cls) if f.name in d})


class HnnsoModel:
    def __init__(self, config, layer1, layer2, ae, scaler_x=None, scaler_y=None):
        m = config.m_out
        if layer1.n_in != config.n_in or layer1.n_out != m or layer2.n_in != m or layer2.n_out != m or ae.m != m:
            raise ShapeError("HnnsoModel: layer shapes disagree with config")
        self.config = config
        self.layer1 = layer1
        self.layer2 = layer2
        self.ae = ae
        self.scaler_x = scaler_x
        self.scaler_y = scaler_y

    def params(self):
        """Flat name -> array mapping; arrays are the live parameters."""
        out = {}
        for prefix, part in (("layer1", self.layer1), ("layer2", self.layer2), ("ae", self.ae)):
            for name, arr in part.params().items():
                out[f"{prefix}.{name}"] = arr
        return out

    def copy(self):
        return HnnsoModel(self.config, copy_params(self.layer1), copy_params(self.layer2),
                          copy_params(self.ae), self.scaler_x, self.scaler_y)

    def load_params(self, params):
        """Copy values from a name -> array mapping into the live parameters."""
        live = self.params()
        for name, arr in params.items():
            if live[name].shape != arr.shape:
                raise ShapeError(f"parameter {name}: shape {arr.shape} != {live[name].shape}")
            live[name][...] = arr

    def predict(self, x):
        return predict(self, x)[0]

    def predict_raw(self, x):
        """Predict in original data units, applying the attached scalers."""
        xs = self.scaler_x.apply(x) if self.scaler_x is not None else x
        y = self.predict(xs)
        return self.scaler_y.invert(y) if self.scaler_y is not None else y


def _glorot(rng, fan_out, fan_in):
    r = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform_range(-r, r, (fan_out, fan_in))


def _init_bilinear(rng, n_in, n_hidden, n_out, tensor_scale):
    c = n_in + n_hidden
    return BilinearTensorLayer(
        w_h=_glorot(rng, n_hidden, n_in),
        b_h=np.zeros(n_hidden),
        t=rng.uniform_range(-tensor_scale, tensor_scale, (n_out, c, c)),
        w=_glorot(rng, n_out, c),
        b=np.zeros(n_out),
    )


def init(config):
    """Randomly initialise a model; fully determined by ``config.seed``."""
    rng = Rng(config.seed)
    s = config.tensor_init
    layer1 = _init_bilinear(rng, config.n_in, config.h_x1, config.m_out, s)
    layer2 = _init_bilinear(rng, config.m_out, config.h_x2, config.m_out, s)
    ae = GatedAutoencoder(rng.uniform_range(-s, s, (config.h_e, config.m_out, config.m_out)))
    return HnnsoModel(config, layer1, layer2, ae)


def predict(model, x):
    """Deterministic forward pass; returns ``(y2, y1, y0)``."""
    y0, _ = bilinear_forward(model.layer1, x)
    y1, _ = bilinear_forward(model.layer2, y0)
    y2 = gae_decode(model.ae, y1, gae_encode(model.ae, y1, y1))
    return y2, y1, y0


def corrupt_labels(model, y, rng, corruption_p=None):
    cfg = model.config
    if cfg.corruption == "mask":
        return corrupt(y, cfg.corruption_p if corruption_p is None else corruption_p, rng)
    return corrupt_gaussian(y, cfg.noise_sigma, rng)


def forward_train(model, x, target, mode, rng, corruption_p=None):
    """Training-mode forward pass.

    ``finetune``: the uncorrupted stack, both encoder copies equal to y1.
    ``ae_pretrain``: two independent corruptions of ``target`` feed the
    encoder, and the first corrupted copy is the decoder's gated input; ``x``
    is ignored.  ``corruption_p`` overrides the configured masking rate.

    Returns ``(y2, caches)``.
    """
    if mode == "ae_pretrain":
        if target is None:
            raise ContractError("forward_train(ae_pretrain) needs the gold target")
        c1, k1 = corrupt_labels(model, target, rng, corruption_p)
        c2, k2 = corrupt_labels(model, target, rng, corruption_p)
        y2, cache = gae_forward(model.ae, c1, c2, k1, k2)
        return y2, {"mode": mode, "ae": cache}
    if mode == "finetune":
        y0, cache1 = bilinear_forward(model.layer1, x)
        y1, cache2 = bilinear_forward(model.layer2, y0)
        y2, cache3 = gae_forward(model.ae, y1)
        return y2, {"mode": mode, "layer1": cache1, "layer2": cache2, "ae": cache3}
    raise ValidationError(f"unknown training mode {mode!r}; expected one of {MODES}")


def backward(model, caches, dy2):
    """Gradients of a scalar loss w.r.t. the parameters touched by the forward pass."""
    grads = {}
    dt, dy1 = gae_backward(model.ae, caches["ae"], dy2)
    grads["ae.t"] = dt
    if caches["mode"] == "finetune":
        g2, dy0 = bilinear_backward(model.layer2, caches["layer2"], dy1)
        g1, _ = bilinear_backward(model.layer1, caches["layer1"], dy0)
        grads.update({f"layer2.{k}": v for k, v in g2.items()})
        grads.update({f"layer1.{k}": v for k, v in g1.items()})
    return grads


def num_params(model):
    return model.layer1.num_params() + model.layer2.num_params() + model.ae.num_params()


def save_model(path, model):
    blocks = dict(model.params())
    blocks.update(scaler_blocks("scaler_x", model.scaler_x))
    blocks.update(scaler_blocks("scaler_y", model.scaler_y))
    write_container(path, MAGIC_HNNSO, model.config.to_strings(), blocks)


def load_model(path):
    _, cfg, blocks = read_container(path, MAGIC_HNNSO)
    try:
        config = HnnsoConfig.from_strings(cfg)
        model = HnnsoModel(
            config,
            BilinearTensorLayer(**{k: blocks[f"layer1.{k}"] for k in BilinearTensorLayer.PARAM_NAMES}),
            BilinearTensorLayer(**{k: blocks[f"layer2.{k}"] for k in BilinearTensorLayer.PARAM_NAMES}),
            GatedAutoencoder(blocks["ae.t"]),
            scaler_from_blocks("scaler_x", blocks),
            scaler_from_blocks("scaler_y", blocks),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: inconsistent HNNSO checkpoint ({exc})") from None
    return model
