"""Two-dimensional synthetic target distributions."""
import numpy as np

from .errors import ParameterError

SHAPES = ("s_curve", "ring", "blobs")


def make_shape(shape, n, noise=0.1, seed=0):
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    rng = np.random.Generator(np.random.PCG64(seed))
    if shape == "s_curve":
        # S traced by (sin t, sign(t)(cos t - 1)) for t in (-3pi/2, 3pi/2)
        t = rng.uniform(-1.5 * np.pi, 1.5 * np.pi, size=n)
        X = np.column_stack((np.sin(t), np.sign(t) * (np.cos(t) - 1.0)))
    elif shape == "ring":
        t = rng.uniform(0.0, 2.0 * np.pi, size=n)
        X = np.column_stack((np.cos(t), np.sin(t)))
    elif shape == "blobs":
        centers = np.array([[0.0, 0.0], [2.0, 2.0], [-2.0, 2.0]])
        X = centers[rng.integers(0, len(centers), size=n)]
    else:
        raise ParameterError(f"unknown shape {shape!r}; choose from {SHAPES}")
    return X + noise * rng.standard_normal(size=X.shape)


def uniform_box(X, count, seed=0, margin=0.0):
    """Uniform points in the bounding box of X, widened by ``margin`` times its extent."""
    X = np.asarray(X, dtype=np.float64)
    lo, hi = X.min(axis=0), X.max(axis=0)
    pad = margin * (hi - lo)
    rng = np.random.Generator(np.random.PCG64(seed))
    return rng.uniform(lo - pad, hi + pad, size=(count, X.shape[1]))
