"""``hnnso`` command line: train, eval, predict, gradcheck, synth, crossval.

Exit codes: 0 ok, 2 configuration error, 3 numerical divergence,
4 I/O error or corrupt checkpoint, 5 failed gradient check.
"""

import functools
import os
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import data as D
from .baselines import load_mlp, load_ridge, save_mlp, save_ridge
from .checkpoint import MAGIC_HNNSO, MAGIC_MLP, MAGIC_RIDGE, CheckpointError
from .config import ConfigError, load_config
from .errors import FormatError, NumericalError, ValidationError
from .evaluation import EvalReport, per_target_errors, render_half_image, render_report, rmse
from .experiment import crossval, fit_model, load_dataset
from .model import load_model, save_model
from .train import TrainLog, carve_validation
from . import gradcheck as gc

EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO, EXIT_CHECK = 2, 3, 4, 5
GRADCHECK_LIMIT = 1e-4
MAX_IMAGES = 10


def _fail(code, msg):
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


def _guard(fn):
    """Map library exceptions onto the exit-code taxonomy."""
    @functools.wraps(fn)
    def wrapped(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            _fail(EXIT_CONFIG, exc)
        except FileNotFoundError as exc:
            # only dataset reads get here; checkpoints are checked before
            _fail(EXIT_CONFIG, f"dataset not found: {exc.filename}")
        except NumericalError as exc:
            _fail(EXIT_DIVERGED, exc)
        except (FormatError, OSError) as exc:
            _fail(EXIT_IO, exc)
        except ValidationError as exc:
            _fail(EXIT_CONFIG, exc)
    return wrapped


def _parse_sets(pairs):
    out = {}
    for item in pairs:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _config(config_path, sets, **flags):
    overrides = _parse_sets(sets)
    for key, value in flags.items():
        if value is not None:
            overrides[key] = value
    return load_config(config_path, overrides, os.environ)


def _outdir(cfg):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "effective-config.txt").write_text(cfg.to_text(), encoding="utf-8")
    return out


def _single_dataset(cfg):
    ds, _ = load_dataset(cfg)
    if ds is None:
        raise ConfigError("pca is only supported by crossval (the projection is refit per fold)")
    return ds


def _load_any(path):
    try:
        with open(path, "rb") as f:
            magic = f.read(6)
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
    loaders = {MAGIC_HNNSO: load_model, MAGIC_MLP: load_mlp, MAGIC_RIDGE: load_ridge}
    if magic not in loaders:
        raise CheckpointError(f"{path}: not a checkpoint (magic {magic!r})")
    return loaders[magic](path)


def _n_in(model):
    if hasattr(model, "config"):
        return model.config.n_in
    if hasattr(model, "w1"):
        return model.w1.shape[1]
    return model.coef.shape[0] - int(model.intercept)


def _eval_dataset(cfg, model):
    if cfg.source == "csv" and not cfg.half_image and cfg.n_in < 1:
        cfg = cfg.updated({"n_in": _n_in(model)})
    ds = _single_dataset(cfg)
    if ds.n_in != _n_in(model):
        raise ConfigError(f"dataset has {ds.n_in} inputs, checkpoint expects {_n_in(model)}")
    return ds


def _save_any(path, kind, model):
    {"hnnso": save_model, "mlp": save_mlp, "ridge": save_ridge}[kind](path, model)


def _images(out_dir, ds, columns, size, value_range, limit=MAX_IMAGES):
    """PGM panels for the first ``limit`` rows; ``columns`` = [pred, baseline or None]."""
    width, height = size
    img_dir = out_dir / "images"
    img_dir.mkdir(exist_ok=True)
    for i in range(min(limit, ds.n)):
        base = columns[1][i] if columns[1] is not None else None
        render_half_image(img_dir / f"example-{i:03d}.pgm", ds.x[i], columns[0][i], ds.y[i],
                          width, height, right_baseline=base, value_range=value_range)


common = [
    click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
                 help="key=value config file"),
    click.option("--set", "sets", multiple=True, metavar="KEY=VALUE", help="override one config key"),
    click.option("--out", default=None, help="output directory"),
    click.option("--data", default=None, help="dataset path"),
    click.option("--seed", type=int, default=None),
]


def with_common(fn):
    for opt in reversed(common):
        fn = opt(fn)
    return fn


@click.group()
def main():
    """High-order neural networks with structured output."""


@main.command()
@with_common
@click.option("--model", default=None, type=click.Choice(["hnnso", "mlp", "ridge"]))
@click.option("--no-pretrain", is_flag=True, help="skip the layer-wise pretraining stages")
@_guard
def train(config_path, sets, out, data, seed, model, no_pretrain):
    """Pretrain and fine-tune one model; write checkpoint.bin and train.log."""
    cfg = _config(config_path, sets, out=out, data=data, seed=seed, model=model,
                  pretrain=False if no_pretrain else None)
    ds = _single_dataset(cfg)
    out_dir = _outdir(cfg)
    log = TrainLog()
    fitted, best = fit_model(cfg.model, ds, cfg, cfg.seed, log)
    _save_any(out_dir / "checkpoint.bin", cfg.model, fitted)
    (out_dir / "train.log").write_text(log.text(), encoding="utf-8")
    # the rows held out for early stopping, in original units
    _, val_idx = carve_validation(ds.n, cfg.val_fraction, cfg.seed)
    val = ds.subset(val_idx)
    D.write_csv(out_dir / "validation.csv", val)
    val_rmse = rmse(fitted.predict_raw(val.x), val.y)
    click.echo(f"{cfg.model}: validation RMSE {val_rmse:.6g} on {val.n} rows -> {out_dir}")


@main.command(name="eval")
@with_common
@click.option("--checkpoint", required=True, type=click.Path(dir_okay=False))
@_guard
def eval_cmd(config_path, sets, out, data, seed, checkpoint):
    """Score a checkpoint on a dataset; write report.txt and report.csv."""
    cfg = _config(config_path, sets, out=out, data=data, seed=seed)
    fitted = _load_any(checkpoint)
    ds = _eval_dataset(cfg, fitted)
    out_dir = _outdir(cfg)
    pred = fitted.predict_raw(ds.x)
    name = Path(checkpoint).stem
    report = EvalReport(name, [rmse(pred, ds.y, pooled=cfg.pooled_rmse)],
                        per_target_errors(pred, ds.y), cfg.digest(), pred)
    table, csv_text = render_report([report])
    (out_dir / "report.txt").write_text(table, encoding="utf-8")
    (out_dir / "report.csv").write_text(csv_text, encoding="utf-8")
    click.echo(table, nl=False)


@main.command()
@with_common
@click.option("--checkpoint", required=True, type=click.Path(dir_okay=False))
@click.option("--images", nargs=2, type=int, default=None, metavar="W H",
              help="render half-image PGMs of this size")
@click.option("--pixel-range", type=click.Choice(["raw", "model"]), default="raw")
@_guard
def predict(config_path, sets, out, data, seed, checkpoint, images, pixel_range):
    """Write predictions.csv (and optional PGM renders) for a dataset."""
    cfg = _config(config_path, sets, out=out, data=data, seed=seed)
    fitted = _load_any(checkpoint)
    ds = _eval_dataset(cfg, fitted)
    out_dir = _outdir(cfg)
    pred = fitted.predict_raw(ds.x)
    D.write_matrix_csv(out_dir / "predictions.csv", pred, list(ds.target_names))
    if images:
        _images(out_dir, ds, [pred, None], images, pixel_range)
    click.echo(f"wrote {ds.n} predictions to {out_dir / 'predictions.csv'}")


@main.command()
@click.option("--seeds", type=int, default=20, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def gradcheck(seeds, seed):
    """Finite-difference check of every analytic gradient."""
    start = time.perf_counter()
    worst = 0.0
    for name, fn in gc.CHECKS.items():
        err = max(fn(seed + s) for s in range(seeds))
        worst = max(worst, err)
        click.echo(f"{name:<24} max rel. err {err:.3e}")
    click.echo(f"overall max rel. err {worst:.3e} over {seeds} seeds "
               f"({time.perf_counter() - start:.1f} s)")
    if not worst < GRADCHECK_LIMIT:
        _fail(EXIT_CHECK, f"gradient check failed: {worst:.3e} >= {GRADCHECK_LIMIT:g}")


@main.command()
@click.option("--kind", type=click.Choice(["structured", "digits"]), default="structured")
@click.option("--out", default="out", show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--set", "sets", multiple=True, metavar="KEY=VALUE",
              help="synth_d, synth_n, synth_m, synth_r, synth_noise")
@_guard
def synth(kind, out, seed, sets):
    """Generate a synthetic dataset as CSV plus a metadata sidecar."""
    cfg = _config(None, sets, out=out, seed=seed)
    out_dir = _outdir(cfg)
    meta = {"kind": kind, "seed": cfg.seed, "d": cfg.synth_d, "noise_sigma": cfg.synth_noise}
    if kind == "structured":
        ds = D.synth_structured(cfg.seed, cfg.synth_d, cfg.synth_n, cfg.synth_m, cfg.synth_r, cfg.synth_noise)
        ds = D.Dataset(ds.x, ds.y, [f"x{i}" for i in range(ds.n_in)], [f"y{j}" for j in range(ds.m_out)])
        meta.update(n=cfg.synth_n, m=cfg.synth_m, r=cfg.synth_r, n_in=ds.n_in)
        path = out_dir / "synth.csv"
        D.write_csv(path, ds)
    else:
        raw, labels = D.synth_digits(cfg.seed, cfg.synth_d, cfg.synth_noise)
        names = [f"p{i}" for i in range(raw.shape[1])]
        path = out_dir / "digits.csv"
        D.write_matrix_csv(path, raw, names)
        images = np.rint(raw.reshape(-1, 8, 8).transpose(0, 2, 1) * 255.0)
        D.write_idx_images(out_dir / "digits-images.idx", images)
        meta.update(width=8, height=8, layout="column-major", n_in=raw.shape[1] // 2,
                    labels=" ".join(str(v) for v in labels))
    D.write_metadata(out_dir / "metadata.txt", meta)
    click.echo(f"wrote {path}")


@main.command(name="crossval")
@with_common
@click.option("--models", default=None, help="comma-separated model kinds")
@click.option("--k", type=int, default=None)
@click.option("--jobs", type=int, default=None)
@click.option("--no-pretrain", is_flag=True)
@click.option("--images", nargs=2, type=int, default=None, metavar="W H",
              help="render PGMs of the out-of-fold predictions (half-image data)")
@_guard
def crossval_cmd(config_path, sets, out, data, seed, models, k, jobs, no_pretrain, images):
    """k-fold comparison of several model kinds on one fold plan."""
    cfg = _config(config_path, sets, out=out, data=data, seed=seed, models=models, k=k, jobs=jobs,
                  pretrain=False if no_pretrain else None)
    ds, raw = load_dataset(cfg)
    out_dir = _outdir(cfg)
    reports = crossval(ds, cfg.model_list(), cfg, raw=raw, jobs=cfg.jobs)
    table, csv_text = render_report(reports, reference=reports[0].model)
    (out_dir / "report.txt").write_text(table, encoding="utf-8")
    (out_dir / "report.csv").write_text(csv_text, encoding="utf-8")
    cols, names = [], []
    for r in reports:
        cols.append(r.predictions)
        names += [f"{r.model}.y{j}" for j in range(r.predictions.shape[1])]
    D.write_matrix_csv(out_dir / "predictions.csv", np.hstack(cols), names)
    if images:
        if ds is None:
            raise ConfigError("image renders need pixel-space targets (pca=0)")
        base = reports[1].predictions if len(reports) > 1 else None
        _images(out_dir, ds, [reports[0].predictions, base], images, "raw")
    click.echo(table, nl=False)


def _entry():
    main(prog_name="hnnso")


if __name__ == "__main__":
    _entry()
