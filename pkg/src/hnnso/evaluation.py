"""Metrics, result tables and PGM renders of half-image predictions."""

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.stats

from .errors import ShapeError, ValidationError

# Published ten-fold RMSEs, used for reporting only.
PUBLISHED_RMSE = {
    "SSTB": {"MODTs": 0.0567, "SVM-Reg": 0.0452, "MLP": 0.0721, "MultivariateReg": 0.0614,
             "MLP-MultivariateReg": 0.0705, "Gaussian-CRF": 0.0706, "HNNSO": 0.0373},
    "MNIST": {"MODTs": 0.0739, "SVM-Reg": 0.0602, "MLP": 0.0800, "MultivariateReg": 0.1097,
              "MLP-MultivariateReg": 0.0791, "Gaussian-CRF": 0.0800, "HNNSO": 0.0494},
    "USPS": {"MODTs": 0.6487, "SVM-Reg": 0.5977, "MLP": 0.6683, "MultivariateReg": 0.6169,
             "MLP-MultivariateReg": 0.6059, "Gaussian-CRF": 0.6047, "HNNSO": 0.5591},
}
# Printed relative error reductions of HNNSO over each method, in percent.
PUBLISHED_REDUCTION = {
    "SSTB": {"MODTs": 34.2, "SVM-Reg": 17.4, "MLP": 48.2, "MultivariateReg": 39.2,
             "MLP-MultivariateReg": 47.0, "Gaussian-CRF": 47.1},
    "MNIST": {"MODTs": 33.1, "SVM-Reg": 17.9, "MLP": 38.2, "MultivariateReg": 54.9,
              "MLP-MultivariateReg": 37.5, "Gaussian-CRF": 38.2},
    "USPS": {"MODTs": 13.8, "SVM-Reg": 6.4, "MLP": 16.3, "MultivariateReg": 9.3,
             "MLP-MultivariateReg": 7.7, "Gaussian-CRF": 7.5},
}


def _pair(pred, truth):
    pred = np.atleast_2d(np.asarray(pred, dtype=np.float64))
    truth = np.atleast_2d(np.asarray(truth, dtype=np.float64))
    if pred.shape != truth.shape:
        raise ShapeError(f"prediction shape {pred.shape} != truth shape {truth.shape}")
    return pred, truth


def rmse(pred, truth, pooled=True):
    """Root mean squared error pooled over all examples and targets.

    With ``pooled=False`` the per-target RMSEs are averaged instead.
    """
    pred, truth = _pair(pred, truth)
    sq = (pred - truth) ** 2
    if pooled:
        return float(np.sqrt(np.mean(sq)))
    return float(np.mean(np.sqrt(np.mean(sq, axis=0))))


def relative_error_reduction(rmse_other, rmse_ours):
    """Percent by which ``rmse_ours`` improves on ``rmse_other``."""
    if rmse_other <= 0:
        raise ValidationError(f"reference RMSE must be positive, got {rmse_other}")
    return 100.0 * (rmse_other - rmse_ours) / rmse_other


def format_reduction(percent):
    """One-decimal text for a reduction, truncated toward zero (17.48 -> "17.4%").

    Truncation, not rounding, is the convention of the published comparison
    tables.  The product is rounded at 1e-6 first so that values like
    17.4 stored as 17.399999... are not cut down to 17.3.
    """
    tenths = math.trunc(round(percent * 10.0, 6))
    return f"{tenths / 10.0:.1f}%"


def per_target_errors(pred, truth):
    """Signed error (prediction minus truth) mean and population std per target.

    Returns an array of shape ``(M, 2)``.
    """
    pred, truth = _pair(pred, truth)
    err = pred - truth
    return np.column_stack([err.mean(axis=0), err.std(axis=0)])


@dataclass
class EvalReport:
    model: str
    per_fold_rmse: list
    per_target: np.ndarray = None
    config_digest: str = ""
    predictions: np.ndarray = field(default=None, repr=False)
    mean_rmse: float = None

    def __post_init__(self):
        self.per_fold_rmse = [float(v) for v in self.per_fold_rmse]
        if self.mean_rmse is None:
            self.mean_rmse = float(np.mean(self.per_fold_rmse))


def paired_t_test(a, b):
    """Paired t-test over per-fold RMSEs of two reports on the same folds.

    Returns ``(t_statistic, two_sided_p_value)``.
    """
    if len(a.per_fold_rmse) != len(b.per_fold_rmse):
        raise ValidationError("paired test needs reports over the same folds")
    res = scipy.stats.ttest_rel(a.per_fold_rmse, b.per_fold_rmse)
    return float(res.statistic), float(res.pvalue)


def render_report(reports, reference=None):
    """Text table (RMSE and reduction relative to ``reference``) and per-fold CSV.

    ``reference`` names the model whose improvement over each other row is
    shown; by default ``"hnnso"`` when present, else the first report.
    Returns ``(table_text, csv_text)``.
    """
    if not reports:
        raise ValidationError("render_report needs at least one report")
    names = [r.model for r in reports]
    if reference is None:
        reference = "hnnso" if "hnnso" in names else names[0]
    ref = next((r for r in reports if r.model == reference), None)
    if ref is None:
        raise ValidationError(f"reference model {reference!r} not among reports {names}")
    width = max(len("model"), *(len(n) for n in names))
    lines = [f"{'model':<{width}}  {'RMSE':>10}  {'folds':>5}  {'rel. error reduction':>20}"]
    for r in reports:
        red = "" if r is ref else format_reduction(relative_error_reduction(r.mean_rmse, ref.mean_rmse))
        lines.append(f"{r.model:<{width}}  {r.mean_rmse:>10.4f}  {len(r.per_fold_rmse):>5d}  {red:>20}")
    lines.append(f"(reduction = error reduction achieved by {reference} relative to each row)")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["model", "fold", "rmse"])
    for r in reports:
        for fold, v in enumerate(r.per_fold_rmse):
            writer.writerow([r.model, fold, format(v, ".17g")])
    return "\n".join(lines) + "\n", buf.getvalue()


def read_report_csv(text):
    """Parse the per-fold CSV back into ``{model: [rmse, ...]}``."""
    out = {}
    for row in csv.DictReader(io.StringIO(text)):
        out.setdefault(row["model"], []).append(float(row["rmse"]))
    return out


def _to_pixels(v, value_range):
    v = np.asarray(v, dtype=np.float64)
    scaled = 255.0 * (v + 1.0) / 2.0 if value_range == "model" else 255.0 * v
    return np.clip(np.rint(scaled), 0, 255).astype(int)


def _panel(left, right, width, height):
    # column-major flattening: the left half holds the first width/2 columns
    return np.concatenate([left, right]).reshape(width, height).T


def render_half_image(path, left, right_pred, right_true, width, height,
                      right_baseline=None, value_range="model"):
    """Write side-by-side P2 PGM panels: prediction, [baseline], truth.

    Images are flattened column by column, so ``left`` holds the first
    ``width // 2`` columns.  ``value_range="model"`` maps [-1, 1] to [0, 255];
    ``"raw"`` maps [0, 1] to [0, 255].  Returns the PGM text.
    """
    left = np.asarray(left, dtype=np.float64).ravel()
    halves = [np.asarray(v, dtype=np.float64).ravel() for v in (right_pred, right_baseline, right_true)
              if v is not None]
    if width % 2 or any(left.size + h.size != width * height or h.size != left.size for h in halves):
        raise ValidationError(
            f"half-image sizes {left.size}+{halves[0].size} do not tile a {width}x{height} image"
        )
    if value_range not in ("model", "raw"):
        raise ValidationError(f"value_range must be 'model' or 'raw', got {value_range!r}")
    panels = [_to_pixels(_panel(left, h, width, height), value_range) for h in halves]
    img = np.hstack(panels)
    rows = [" ".join(str(p) for p in row) for row in img]
    text = f"P2\n{img.shape[1]} {img.shape[0]}\n255\n" + "\n".join(rows) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="ascii")
    return text


def write_columns_csv(path, columns):
    """Dump named equal-length columns (e.g. value distributions) for plotting."""
    names = list(columns)
    data = np.column_stack([np.asarray(columns[n], dtype=np.float64).ravel() for n in names])
    with Path(path).open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(names)
        for row in data:
            writer.writerow([format(v, ".17g") for v in row])
