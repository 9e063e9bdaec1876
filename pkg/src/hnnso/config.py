"""Flat ``key=value`` run configuration shared by the experiment harness and CLI."""

import hashlib
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import ValidationError
from .model import HnnsoConfig
from .train import TrainConfig

SOURCES = ("csv", "idx", "synth-structured", "synth-digits")
MODEL_KINDS = ("hnnso", "mlp", "ridge")


class ConfigError(ValidationError):
    pass


@dataclass
class RunConfig:
    # dataset
    source: str = "csv"
    data: str = ""
    n_in: int = 0
    half_image: bool = False
    pca: int = 0
    scale: str = "minmax"
    synth_d: int = 2000
    synth_n: int = 10
    synth_m: int = 8
    synth_r: int = 4
    synth_noise: float = 0.05
    # models
    model: str = "hnnso"
    models: str = "hnnso,mlp,ridge"
    h_x1: int = 4
    h_x2: int = 4
    h_e: int = 8
    corruption: str = "mask"
    corruption_p: float = 0.25
    noise_sigma: float = 0.1
    tensor_init: float = 0.01
    mlp_hidden: int = 32
    ridge_lambda: float = 1e-6
    # training
    pretrain: bool = True
    epochs_stage1: int = 50
    epochs_stage2: int = 50
    epochs_stage3: int = 100
    epochs_finetune: int = 300
    epochs_mlp: int = 400
    batch_size: int = 32
    base_lr: float = 0.01
    mlp_lr: float = 0.0
    lam: float = 1e-4
    mlp_lam: float = -1.0
    l2_biases: bool = True
    patience: int = 20
    val_fraction: float = 0.1
    # protocol
    k: int = 10
    jobs: int = 1
    seed: int = 0
    model_scale_rmse: bool = False
    pooled_rmse: bool = True
    out: str = "out"

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ConfigError(f"source must be one of {SOURCES}, got {self.source!r}")
        if self.scale not in ("minmax", "none"):
            raise ConfigError(f"scale must be 'minmax' or 'none', got {self.scale!r}")
        for kind in [self.model] + self.model_list():
            if kind not in MODEL_KINDS:
                raise ConfigError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
        if self.k < 2:
            raise ConfigError(f"k must be >= 2, got {self.k}")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        # delegate the remaining range checks
        self.train_config(self.seed)
        self.hnnso_config(1, 1, self.seed)

    def model_list(self):
        return [m.strip() for m in self.models.split(",") if m.strip()]

    def train_config(self, seed, mlp=False):
        """Optimiser settings; the MLP uses ``mlp_lr``/``mlp_lam`` when those are set (> 0 / >= 0)."""
        try:
            return TrainConfig(
                epochs_stage1=self.epochs_stage1,
                epochs_stage2=self.epochs_stage2,
                epochs_stage3=self.epochs_stage3,
                epochs_finetune=self.epochs_finetune,
                batch_size=self.batch_size,
                base_lr=self.mlp_lr if (mlp and self.mlp_lr > 0) else self.base_lr,
                lam=self.mlp_lam if (mlp and self.mlp_lam >= 0) else self.lam,
                l2_biases=self.l2_biases,
                corruption_p=self.corruption_p,
                patience=self.patience,
                seed=seed,
                val_fraction=self.val_fraction,
            )
        except ValidationError as exc:
            raise ConfigError(str(exc)) from None

    def hnnso_config(self, n_in, m_out, seed):
        try:
            return HnnsoConfig(
                n_in=n_in, m_out=m_out, h_x1=self.h_x1, h_x2=self.h_x2, h_e=self.h_e,
                corruption_p=self.corruption_p, corruption=self.corruption,
                noise_sigma=self.noise_sigma, tensor_init=self.tensor_init, seed=seed,
            )
        except ValidationError as exc:
            raise ConfigError(str(exc)) from None

    def to_text(self):
        return "".join(f"{f.name}={_fmt(getattr(self, f.name))}\n" for f in fields(self))

    def digest(self):
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()[:16]

    def updated(self, values):
        """New config with ``values`` (name -> string or typed value) applied."""
        return replace(self, **coerce_values(values))


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_bool(s):
    low = str(s).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def coerce_values(values):
    types = {f.name: f.type for f in fields(RunConfig)}
    out = {}
    for key, raw in values.items():
        if key not in types:
            raise ConfigError(f"unknown config key {key!r}")
        kind = types[key]
        try:
            if isinstance(raw, str):
                out[key] = _parse_bool(raw) if kind is bool else kind(raw.strip())
            else:
                out[key] = kind(raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from None
    return out


def parse_config_text(text, origin="<config>"):
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def load_config(path=None, overrides=None, env=None):
    """Defaults < config file < ``HNNSO_SEED`` environment variable < overrides."""
    values = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from None
        values.update(parse_config_text(text, str(path)))
    if env and env.get("HNNSO_SEED"):
        values["seed"] = env["HNNSO_SEED"]
    values.update(overrides or {})
    return RunConfig(**coerce_values(values))
