"""Cross-validated comparisons of HNNSO against the baselines.

Every fold fits its scalers (and, for the PCA pipeline, its projection) on
the training rows only, carves a validation split from them for early
stopping, trains, predicts the held-out rows and scores in original units.
"""

from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import data as D
from .baselines import mlp_init, mlp_fit, ridge_fit
from .config import ConfigError
from .evaluation import EvalReport, per_target_errors, rmse
from .linalg import derive_seed
from .model import init
from .train import carve_validation, finetune, kfold_split, pretrain


def load_dataset(cfg):
    """Materialise the dataset a config describes.

    Returns ``(dataset, raw)``: for the PCA pipeline ``dataset`` is None and
    ``raw`` holds the unsplit matrix (projection happens per fold).
    """
    if cfg.source == "synth-structured":
        ds = D.synth_structured(cfg.seed, cfg.synth_d, cfg.synth_n, cfg.synth_m, cfg.synth_r, cfg.synth_noise)
        return ds, None
    if cfg.source == "synth-digits":
        raw, _ = D.synth_digits(cfg.seed, cfg.synth_d, cfg.synth_noise)
    elif cfg.source == "idx":
        if not cfg.data:
            raise ConfigError("source=idx needs data=<path to IDX image file>")
        raw, _ = D.load_idx(cfg.data, column_major=True)
    else:
        if not cfg.data:
            raise ConfigError("no dataset given (set data=<csv path>)")
        if cfg.half_image:
            ds = D.load_csv(cfg.data, 1)
            raw = np.hstack([ds.x, ds.y])
        else:
            if cfg.n_in < 1:
                raise ConfigError("csv datasets need n_in >= 1")
            return D.load_csv(cfg.data, cfg.n_in), None
    if cfg.pca:
        return None, raw
    return D.split_half_image(raw), None


class FoldMaker:
    """``make(train_idx, test_idx) -> (train_ds, test_ds)`` for one fold.

    With ``raw`` and ``pca`` the projection is fit on the training rows, then
    both splits are projected and halved into inputs and targets.
    """

    def __init__(self, dataset=None, raw=None, pca=0):
        self.dataset = dataset
        self.raw = raw
        self.pca = pca

    def __call__(self, tr, te):
        if self.dataset is not None:
            return self.dataset.subset(tr), self.dataset.subset(te)
        p = D.pca_fit(self.raw[tr], self.pca)
        return (D.split_half_image(D.pca_transform(p, self.raw[tr])),
                D.split_half_image(D.pca_transform(p, self.raw[te])))


def _scalers(train, cfg):
    if cfg.scale == "none":
        return None, None
    return D.fit_scaler(train.x), D.fit_scaler(train.y)


def _scaled(ds, sx, sy):
    if sx is None:
        return ds
    return D.Dataset(sx.apply(ds.x), sy.apply(ds.y), ds.feature_names, ds.target_names)


def fit_model(kind, train, cfg, seed, log=None):
    """Train one model on raw-unit ``train`` data; scalers are attached to it.

    Returns ``(model, best_validation_rmse)`` (None for ridge).
    """
    sx, sy = _scalers(train, cfg)
    scaled = _scaled(train, sx, sy)
    if kind == "ridge":
        model = ridge_fit(scaled, cfg.ridge_lambda)
        model.scaler_x, model.scaler_y = sx, sy
        return model, None
    tcfg = cfg.train_config(seed, mlp=(kind == "mlp"))
    fit_idx, val_idx = carve_validation(scaled.n, tcfg.val_fraction, seed)
    fit_ds, val_ds = scaled.subset(fit_idx), scaled.subset(val_idx)
    init_seed = derive_seed(seed, 1)
    if kind == "mlp":
        model = mlp_init(train.n_in, cfg.mlp_hidden, train.m_out, init_seed)
        model.scaler_x, model.scaler_y = sx, sy
        return mlp_fit(model, fit_ds, tcfg, val_ds, cfg.epochs_mlp, log)
    if kind != "hnnso":
        raise ConfigError(f"unknown model kind {kind!r}")
    model = init(cfg.hnnso_config(train.n_in, train.m_out, init_seed))
    model.scaler_x, model.scaler_y = sx, sy
    if cfg.pretrain:
        pretrain(model, fit_ds, tcfg, val=val_ds, log=log)
    return finetune(model, fit_ds, tcfg, val=val_ds, log=log)


def _score(model, test, cfg):
    if cfg.model_scale_rmse and model.scaler_y is not None:
        pred = model.predict(model.scaler_x.apply(test.x))
        truth = model.scaler_y.apply(test.y)
    else:
        pred = model.predict_raw(test.x)
        truth = test.y
    return pred, truth


def _run_fold(args):
    kind, cfg, make, plan, fold = args
    train, test = make(plan.train_indices(fold), plan.test_indices(fold))
    model, _ = fit_model(kind, train, cfg, derive_seed(cfg.seed, fold))
    pred, truth = _score(model, test, cfg)
    return fold, pred, truth


def run_experiment(dataset, model_kind, cfg, plan=None, raw=None, jobs=1):
    """k-fold evaluation of one model kind; returns an :class:`EvalReport`.

    ``report.predictions`` holds the out-of-fold predictions in row order.
    """
    return crossval(dataset, [model_kind], cfg, plan=plan, raw=raw, jobs=jobs)[0]


def crossval(dataset, kinds, cfg, plan=None, raw=None, jobs=1):
    """Evaluate several model kinds on one shared fold plan."""
    n = dataset.n if dataset is not None else raw.shape[0]
    plan = plan or kfold_split(n, cfg.k, cfg.seed)
    make = FoldMaker(dataset, raw, cfg.pca)
    tasks = [(kind, cfg, make, plan, fold) for kind in kinds for fold in range(plan.k)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_fold, tasks))
    else:
        results = [_run_fold(t) for t in tasks]
    reports = []
    for i, kind in enumerate(kinds):
        chunk = results[i * plan.k:(i + 1) * plan.k]
        preds = [c[1] for c in chunk]
        truths = [c[2] for c in chunk]
        per_fold = [rmse(p, t, pooled=cfg.pooled_rmse) for p, t in zip(preds, truths)]
        oof = np.empty((n, preds[0].shape[1]))
        oof_truth = np.empty_like(oof)
        for (fold, p, t) in chunk:
            oof[plan.test_indices(fold)] = p
            oof_truth[plan.test_indices(fold)] = t
        name = kind if (kind != "hnnso" or cfg.pretrain) else "hnnso-nopretrain"
        reports.append(EvalReport(name, per_fold, per_target_errors(oof, oof_truth), cfg.digest(), oof))
    return reports
