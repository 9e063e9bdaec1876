"""Label corruption for the denoising auto-encoder."""

import numpy as np

from .errors import ValidationError


def corrupt(v, p, rng):
    """Zero each coordinate of ``v`` independently with probability ``p``.

    Returns ``(corrupted, keep)`` where ``keep`` is 1.0 for kept coordinates
    and 0.0 for zeroed ones.
    """
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"corruption probability must lie in [0, 1], got {p}")
    v = np.asarray(v, dtype=np.float64)
    keep = (rng.uniform(v.shape) >= p).astype(np.float64)
    return v * keep, keep


def corrupt_gaussian(v, sigma, rng):
    """Additive isotropic Gaussian noise; the keep mask is all ones."""
    if sigma < 0:
        raise ValidationError(f"noise sigma must be non-negative, got {sigma}")
    v = np.asarray(v, dtype=np.float64)
    return v + rng.normal(v.shape, sigma=sigma), np.ones_like(v)
