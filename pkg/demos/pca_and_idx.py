# PCA on images read from an IDX file
#
# Images are written to and read back from the IDX binary format, then
# projected onto their leading principal components.  Up to 128 dimensions
# the eigenvectors come from a cyclic Jacobi solver.

import tempfile
from pathlib import Path

import numpy as np

from hnnso import load_idx, pca_fit, synth_digits
from hnnso.data import pca_inverse, pca_transform, write_idx_images

raw, labels = synth_digits(seed=0, d=200)
path = Path(tempfile.mkdtemp()) / "digits-images.idx"
write_idx_images(path, (raw.reshape(-1, 8, 8).transpose(0, 2, 1) * 255).round().astype(np.uint8))
images, _ = load_idx(path, column_major=True)
print("loaded", images.shape, "max |diff| from source", np.abs(images - raw).max().round(4))

p = pca_fit(images, 16)
z = pca_transform(p, images)
print("explained variance, first five", np.round(p.eigenvalues[:5], 4))
print("projected mean", np.abs(z.mean(axis=0)).max())
print("component orthonormality", np.abs(p.components @ p.components.T - np.eye(16)).max())

# The two solvers agree up to round-off.

q = pca_fit(images, 16, solver="lapack")
print("jacobi vs lapack eigenvalues", np.abs(p.eigenvalues - q.eigenvalues).max())
print("reconstruction RMSE with 16 of 64 components", np.sqrt(np.mean((pca_inverse(p, z) - images) ** 2)).round(4))
