"""Datasets: loaders, scaling, PCA and seeded synthetic generators."""

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, ShapeError, ValidationError
from .linalg import Rng, _fix_signs, jacobi_eigensym

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

# above this dimension the Jacobi sweeps get slow; use LAPACK instead
JACOBI_MAX_DIM = 128


@dataclass
class Dataset:
    x: np.ndarray
    y: np.ndarray
    feature_names: list = field(default_factory=list)
    target_names: list = field(default_factory=list)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.x.ndim != 2 or self.y.ndim != 2:
            raise ShapeError(f"Dataset needs 2-D x and y, got {self.x.shape} and {self.y.shape}")
        if self.x.shape[0] != self.y.shape[0] or self.x.shape[0] < 1:
            raise ShapeError(f"Dataset rows disagree or are empty: {self.x.shape[0]} vs {self.y.shape[0]}")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y))):
            raise ValidationError("Dataset contains non-finite values")
        if not self.feature_names:
            self.feature_names = [f"x{i}" for i in range(self.n_in)]
        if not self.target_names:
            self.target_names = [f"y{j}" for j in range(self.m_out)]

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def n_in(self):
        return self.x.shape[1]

    @property
    def m_out(self):
        return self.y.shape[1]

    def subset(self, idx):
        return Dataset(self.x[idx], self.y[idx], list(self.feature_names), list(self.target_names))


# --- scaling ---------------------------------------------------------------

@dataclass
class Scaler:
    """Per-column affine map ``v -> a * v + b``."""

    a: np.ndarray
    b: np.ndarray
    constant: np.ndarray

    def apply(self, v):
        return np.asarray(v, dtype=np.float64) * self.a + self.b

    def invert(self, u):
        return (np.asarray(u, dtype=np.float64) - self.b) / self.a


def fit_scaler(v, lo=-0.9, hi=0.9):
    """Map each column's training min to ``lo`` and max to ``hi``.

    Constant columns get the identity map and are flagged in ``constant``.
    """
    v = np.atleast_2d(np.asarray(v, dtype=np.float64))
    vmin = v.min(axis=0)
    vmax = v.max(axis=0)
    span = vmax - vmin
    with np.errstate(divide="ignore", over="ignore"):
        a = (hi - lo) / np.where(span > 0, span, 1.0)
    # a span too small to invert (e.g. subnormal) counts as constant too
    constant = (span <= 0) | ~np.isfinite(a)
    a = np.where(constant, 1.0, a)
    b = np.where(constant, 0.0, lo - a * vmin)
    return Scaler(a, b, constant)


# --- PCA -------------------------------------------------------------------

@dataclass
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (n_components, dim), orthonormal rows
    eigenvalues: np.ndarray


def pca_fit(x, n_components, solver="auto"):
    """Principal components from the sample covariance (divisor D - 1).

    ``solver`` is ``"jacobi"``, ``"lapack"`` or ``"auto"`` (Jacobi up to
    ``JACOBI_MAX_DIM`` dimensions).
    """
    x = np.asarray(x, dtype=np.float64)
    d, dim = x.shape
    if not 1 <= n_components <= min(d, dim):
        raise ValidationError(f"n_components={n_components} must lie in [1, min(D, dim)={min(d, dim)}]")
    if d < 2:
        raise ValidationError("PCA needs at least two examples")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / (d - 1)
    cov = 0.5 * (cov + cov.T)
    if solver == "auto":
        solver = "jacobi" if dim <= JACOBI_MAX_DIM else "lapack"
    if solver == "jacobi":
        evals, evecs = jacobi_eigensym(cov)
    elif solver == "lapack":
        evals, evecs = np.linalg.eigh(cov)
        order = np.argsort(-evals, kind="stable")
        evals, evecs = evals[order], _fix_signs(evecs[:, order])
    else:
        raise ValidationError(f"unknown PCA solver {solver!r}")
    return PcaModel(mean, evecs[:, :n_components].T.copy(), evals[:n_components].copy())


def pca_transform(model, x):
    return (np.asarray(x, dtype=np.float64) - model.mean) @ model.components.T


def pca_inverse(model, z):
    return np.asarray(z, dtype=np.float64) @ model.components + model.mean


# --- file formats ----------------------------------------------------------

def load_csv(path, n_in):
    """Read a headed CSV; the first ``n_in`` columns are inputs, the rest targets."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        ncol = len(header)
        if n_in < 1 or n_in >= ncol:
            raise ValidationError(f"{path}: n_in={n_in} leaves no target columns (file has {ncol} columns)")
        rows = []
        for record in reader:
            line = reader.line_num
            if not record:
                continue
            if len(record) != ncol:
                raise FormatError(f"{path}:{line}: expected {ncol} fields, found {len(record)}")
            try:
                rows.append([float(cell) for cell in record])
            except ValueError as exc:
                raise FormatError(f"{path}:{line}: non-numeric cell ({exc})") from None
    if not rows:
        raise FormatError(f"{path}: no data rows")
    data = np.array(rows)
    if not np.all(np.isfinite(data)):
        raise FormatError(f"{path}: non-finite value")
    return Dataset(data[:, :n_in], data[:, n_in:], header[:n_in], header[n_in:])


def write_csv(path, dataset):
    """Write with 17 significant digits, which round-trips float64 exactly."""
    with Path(path).open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(list(dataset.feature_names) + list(dataset.target_names))
        for row in np.hstack([dataset.x, dataset.y]):
            writer.writerow([format(v, ".17g") for v in row])


def write_matrix_csv(path, matrix, names):
    with Path(path).open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(names)
        for row in np.atleast_2d(matrix):
            writer.writerow([format(v, ".17g") for v in row])


def _read_idx(path, magic):
    raw = Path(path).read_bytes()
    if len(raw) < 4:
        raise FormatError(f"{path}: truncated IDX header")
    got = struct.unpack(">I", raw[:4])[0]
    if got != magic:
        raise FormatError(f"{path}: bad IDX magic 0x{got:08x}, expected 0x{magic:08x}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise FormatError(f"{path}: truncated IDX header")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    count = int(np.prod(dims))
    if len(raw) - header != count:
        raise FormatError(f"{path}: payload has {len(raw) - header} bytes, header promises {count}")
    return np.frombuffer(raw, dtype=np.uint8, offset=header).reshape(dims)


def load_idx(images_path, labels_path=None, column_major=False):
    """Load an IDX image file as a D x (rows*cols) matrix scaled to [0, 1].

    With ``column_major`` each image is flattened column by column, so the
    first half of every row is the left half of the picture.
    Returns ``(matrix, labels)``; labels is None without ``labels_path``.
    """
    images = _read_idx(images_path, IDX_IMAGES_MAGIC)
    if column_major:
        images = images.transpose(0, 2, 1)
    matrix = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    labels = None
    if labels_path is not None:
        labels = _read_idx(labels_path, IDX_LABELS_MAGIC).astype(np.int64)
        if labels.shape[0] != matrix.shape[0]:
            raise FormatError(f"{labels_path}: {labels.shape[0]} labels for {matrix.shape[0]} images")
    return matrix, labels


def write_idx_images(path, images):
    """Write a uint8 array of shape (count, rows, cols) as an IDX image file."""
    images = np.asarray(images, dtype=np.uint8)
    with Path(path).open("wb") as f:
        f.write(struct.pack(">I", IDX_IMAGES_MAGIC))
        f.write(struct.pack(">3I", *images.shape))
        f.write(images.tobytes())


def split_half_image(raw):
    """First half of the columns become inputs, the second half targets."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2 or raw.shape[1] % 2:
        raise ValidationError(f"split_half_image needs an even column count, got shape {raw.shape}")
    half = raw.shape[1] // 2
    return Dataset(raw[:, :half], raw[:, half:])


# --- synthetic data --------------------------------------------------------

def synth_structured(seed, d=2000, n=10, m=8, r=4, noise_sigma=0.05):
    """Inputs and outputs driven by a shared low-dimensional latent.

    ``z ~ U(-1, 1)^r``; ``x = tanh(A z) + noise``; ``y_j = tanh(z^T B_j z)``.
    The targets are correlated through ``z`` and quadratic in it.
    """
    if r < 2 or min(d, n, m) < 1:
        raise ValidationError(f"synth_structured: invalid dims d={d}, n={n}, m={m}, r={r}")
    if noise_sigma < 0:
        raise ValidationError("noise_sigma must be non-negative")
    rng = Rng(seed)
    a = rng.uniform_range(-1.0, 1.0, (n, r)) / r
    b = rng.uniform_range(-1.0, 1.0, (m, r, r)) / r
    z = rng.uniform_range(-1.0, 1.0, (d, r))
    x = np.tanh(z @ a.T)
    if noise_sigma > 0:
        x = x + rng.normal((d, n), sigma=noise_sigma)
    y = np.tanh(np.einsum("dp,jpq,dq->dj", z, b, z))
    return Dataset(x, y)


_DIGITS = [
    ["..####..", ".#....#.", ".#....#.", ".#....#.", ".#....#.", ".#....#.", ".#....#.", "..####.."],
    ["...##...", "..###...", "...##...", "...##...", "...##...", "...##...", "...##...", "..####.."],
    ["..####..", ".#....#.", "......#.", ".....#..", "....#...", "...#....", "..#.....", ".######."],
    ["..####..", ".#....#.", "......#.", "...###..", "......#.", "......#.", ".#....#.", "..####.."],
    [".....#..", "....##..", "...#.#..", "..#..#..", ".######.", ".....#..", ".....#..", ".....#.."],
    [".######.", ".#......", ".#......", ".#####..", "......#.", "......#.", ".#....#.", "..####.."],
    ["..####..", ".#......", ".#......", ".#####..", ".#....#.", ".#....#.", ".#....#.", "..####.."],
    [".######.", "......#.", ".....#..", "....#...", "...#....", "...#....", "...#....", "...#...."],
    ["..####..", ".#....#.", ".#....#.", "..####..", ".#....#.", ".#....#.", ".#....#.", "..####.."],
    ["..####..", ".#....#.", ".#....#.", ".#....#.", "..#####.", "......#.", "......#.", "..####.."],
]


def digit_templates():
    """Ten 8x8 digit bitmaps with values in {0, 1}."""
    return np.array([[[1.0 if ch == "#" else 0.0 for ch in row] for row in d] for d in _DIGITS])


def _shift(img, dr, dc):
    """Translate with zero fill."""
    out = np.zeros_like(img)
    rows, cols = img.shape
    out[max(dr, 0):rows + min(dr, 0), max(dc, 0):cols + min(dc, 0)] = \
        img[max(-dr, 0):rows + min(-dr, 0), max(-dc, 0):cols + min(-dc, 0)]
    return out


def synth_digits(seed, d=500, noise_sigma=0.05):
    """Jittered 8x8 digit images, flattened column-major (left half first).

    Each sample picks a template, shifts it by up to one pixel in each
    direction, scales stroke intensity by U(0.7, 1) and adds clipped
    Gaussian pixel noise.  Returns ``(matrix, labels)`` with pixels in [0, 1].
    """
    rng = Rng(seed)
    templates = digit_templates()
    labels = np.minimum((rng.uniform(d) * 10).astype(np.int64), 9)
    shifts = np.minimum((rng.uniform((d, 2)) * 3).astype(np.int64), 2) - 1
    gains = rng.uniform_range(0.7, 1.0, d)
    noise = rng.normal((d, 8, 8), sigma=noise_sigma) if noise_sigma > 0 else np.zeros((d, 8, 8))
    images = np.empty((d, 8, 8))
    for i in range(d):
        img = _shift(templates[labels[i]], shifts[i, 0], shifts[i, 1])
        images[i] = np.clip(gains[i] * img + noise[i], 0.0, 1.0)
    return images.transpose(0, 2, 1).reshape(d, 64), labels


def write_metadata(path, params):
    """Sidecar ``key=value`` file recording generator parameters."""
    lines = [f"{k}={v}" for k, v in params.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
