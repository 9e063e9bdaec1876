"""Dense kernels, a reproducible PRNG and a Jacobi eigensolver.

Vectors and matrices are plain float64 numpy arrays.  Third-order tensors are
stored *slice-major*: an array of shape ``(n_slices, rows, cols)`` so that
``t[k]`` is the k-th slice.  In index notation, the mathematical entry
``T[i, j, k]`` lives at ``t[k, i, j]``.

The contraction kernels accept either single vectors (1-D) or batches of
vectors stacked along axis 0 (2-D); the batch axis is carried through to the
result.
"""

import math

import numpy as np

from .errors import NumericalError, ShapeError, ValidationError

__all__ = [
    "Rng",
    "derive_seed",
    "matvec",
    "bilinear_slices",
    "contract_13",
    "tanh_vec",
    "jacobi_eigensym",
    "zeros_tensor3",
]

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _mix64(z):
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed, *keys):
    """Hash a seed and a tuple of non-negative integer keys into a new 64-bit seed."""
    h = _mix64((int(seed) + _GAMMA) & _MASK64)
    for key in keys:
        h = _mix64((h ^ ((int(key) + 1) * _GAMMA)) & _MASK64)
    return h


class Rng:
    """SplitMix64 generator.

    The n-th output (1-based) for seed ``s`` is ``mix(s + n * 0x9E3779B97F4A7C15)``
    with the standard SplitMix64 finalizer.  Uniform doubles take the top 53
    bits: ``(z >> 11) * 2**-53``, so they lie in [0, 1).  Normal deviates use
    Box-Muller on consecutive uniform pairs ``(u1, u2)``:
    ``sqrt(-2 ln(1 - u1)) * (cos(2 pi u2), sin(2 pi u2))``.

    An ``Rng`` is single-owner state; use :meth:`spawn` to hand independent
    streams to other consumers.
    """

    def __init__(self, seed=0):
        self.state = int(seed) & _MASK64

    def next_u64(self, n):
        """Return the next ``n`` raw 64-bit outputs as a uint64 array."""
        steps = np.arange(1, n + 1, dtype=np.uint64) * np.uint64(_GAMMA)
        z = steps + np.uint64(self.state)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        z = z ^ (z >> np.uint64(31))
        self.state = (self.state + n * _GAMMA) & _MASK64
        return z

    def uniform(self, size=None):
        """Uniform draw(s) in [0, 1)."""
        n = 1 if size is None else int(np.prod(size))
        u = (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
        if size is None:
            return float(u[0])
        return u.reshape(size)

    def uniform_range(self, lo, hi, size=None):
        if not lo < hi:
            raise ValidationError(f"uniform_range needs lo < hi, got lo={lo}, hi={hi}")
        u = self.uniform(size)
        out = lo + (hi - lo) * u
        # guard against rounding up to hi
        if size is None:
            return out if out < hi else math.nextafter(hi, lo)
        return np.where(out < hi, out, np.nextafter(hi, lo))

    def normal(self, size=None, sigma=1.0):
        n = 1 if size is None else int(np.prod(size))
        pairs = (n + 1) // 2
        u = self.uniform(2 * pairs).reshape(pairs, 2)
        r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        z = np.empty((pairs, 2))
        z[:, 0] = r * np.cos(2.0 * np.pi * u[:, 1])
        z[:, 1] = r * np.sin(2.0 * np.pi * u[:, 1])
        z = sigma * z.reshape(-1)[:n]
        if size is None:
            return float(z[0])
        return z.reshape(size)

    def permutation(self, n):
        """Fisher-Yates shuffle of ``range(n)``."""
        perm = np.arange(n)
        if n < 2:
            return perm
        u = self.uniform(n - 1)
        for step, i in enumerate(range(n - 1, 0, -1)):
            j = int(u[step] * (i + 1))
            perm[i], perm[j] = perm[j], perm[i]
        return perm

    def spawn(self, *keys):
        """Independent child stream keyed by the current state and ``keys``."""
        return Rng(derive_seed(self.state, *keys))


def _check_vec(name, v, n, axis_name):
    if v.shape[-1] != n:
        raise ShapeError(f"{name} has length {v.shape[-1]}, expected {n} ({axis_name})")


def zeros_tensor3(d1, d2, d3):
    """Zero tensor with ``d3`` slices of shape ``d1 x d2``."""
    return np.zeros((d3, d1, d2))


def matvec(m, v):
    m = np.asarray(m, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if m.ndim != 2 or m.shape[1] != v.shape[-1]:
        raise ShapeError(f"matvec: matrix {m.shape} incompatible with vector {v.shape}")
    return v @ m.T


def bilinear_slices(t, u, v):
    """``out[k] = sum_ij u[i] T[i,j,k] v[j]``, one quadratic form per slice."""
    t = np.asarray(t, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if t.ndim != 3:
        raise ShapeError(f"bilinear_slices: tensor must be 3-D, got shape {t.shape}")
    _check_vec("u", u, t.shape[1], "slice rows")
    _check_vec("v", v, t.shape[2], "slice cols")
    if u.shape[:-1] != v.shape[:-1]:
        raise ShapeError(f"bilinear_slices: batch shapes differ, {u.shape} vs {v.shape}")
    tv = np.tensordot(v, t, axes=([-1], [2]))  # (..., k, i)
    return np.einsum("...i,...ki->...k", u, tv)


def contract_13(t, u, h):
    """``out[j] = sum_ik u[i] T[i,j,k] h[k]``: contraction over rows and slices."""
    t = np.asarray(t, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if t.ndim != 3:
        raise ShapeError(f"contract_13: tensor must be 3-D, got shape {t.shape}")
    _check_vec("u", u, t.shape[1], "slice rows")
    _check_vec("h", h, t.shape[0], "slice count")
    if u.shape[:-1] != h.shape[:-1]:
        raise ShapeError(f"contract_13: batch shapes differ, {u.shape} vs {h.shape}")
    tu = np.tensordot(u, t, axes=([-1], [1]))  # (..., k, j)
    return np.einsum("...k,...kj->...j", h, tu)


def tanh_vec(v):
    return np.tanh(np.asarray(v, dtype=np.float64))


def jacobi_eigensym(m, max_sweeps=100, tol=1e-14):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues in descending
    order and eigenvectors as orthonormal columns.  Each eigenvector is
    signed so that its largest-magnitude entry is non-negative.
    """
    a = np.array(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"jacobi_eigensym needs a square matrix, got {a.shape}")
    n = a.shape[0]
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if np.max(np.abs(a - a.T), initial=0.0) > 1e-12 * scale:
        raise ValidationError("jacobi_eigensym: matrix is not symmetric within 1e-12")
    a = 0.5 * (a + a.T)
    v = np.eye(n)
    frob = np.sqrt(np.sum(a * a))
    tiny = 1e-18 * frob
    for _ in range(max_sweeps):
        off = _off_norm(a)
        if off <= tol * frob:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= tiny:
                    a[p, q] = a[q, p] = 0.0
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                cp = a[:, p].copy()
                cq = a[:, q]
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                rp = a[p, :].copy()
                rq = a[q, :]
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q]
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        if _off_norm(a) > tol * frob:
            raise NumericalError(f"jacobi_eigensym did not converge in {max_sweeps} sweeps")
    evals = np.diag(a).copy()
    order = np.argsort(-evals, kind="stable")
    evals = evals[order]
    v = v[:, order]
    return evals, _fix_signs(v)


def _off_norm(a):
    off = a - np.diag(np.diag(a))
    return float(np.sqrt(np.sum(off * off)))


def _fix_signs(vecs):
    """Flip columns so the largest-magnitude entry of each is non-negative."""
    if vecs.size == 0:
        return vecs
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs
