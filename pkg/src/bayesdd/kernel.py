"""Kernel functions and Gram matrices.

The implicit feature map is never materialized; everything downstream works
on kernel evaluations only.
"""
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, EmptyDatasetError, ParameterError

FAMILIES = ("gaussian", "linear")

# bound on the n*m*d temporary used for pairwise differences
_CHUNK_ELEMENTS = 1 << 22


@dataclass(frozen=True)
class KernelSpec:
    family: str = "gaussian"
    bandwidth: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ParameterError(f"unknown kernel family {self.family!r}")
        if self.family == "gaussian" and not self.bandwidth > 0:
            raise ParameterError(f"gaussian bandwidth must be > 0, got {self.bandwidth}")

    def to_dict(self):
        return {"family": self.family, "bandwidth": float(self.bandwidth)}

    @classmethod
    def from_dict(cls, d):
        return cls(family=d["family"], bandwidth=float(d["bandwidth"]))


@dataclass(frozen=True, eq=False)
class GramMatrix:
    values: np.ndarray
    degrees: np.ndarray

    @property
    def n(self):
        return self.values.shape[0]

    def diag(self):
        return np.diagonal(self.values).copy()


def as_matrix(X, name="X"):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2:
        raise ParameterError(f"{name} must be a 2-D array, got shape {X.shape}")
    return X


def squared_distances(Z, X):
    # Direct differences rather than |z|^2 + |x|^2 - 2 z.x: the result is
    # bit-symmetric and exactly zero on the diagonal.
    m, d = Z.shape
    n = X.shape[0]
    out = np.empty((m, n))
    step = max(1, _CHUNK_ELEMENTS // max(1, n * d))
    for start in range(0, m, step):
        diff = Z[start:start + step, None, :] - X[None, :, :]
        out[start:start + step] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


def _apply(spec, Z, X):
    if spec.family == "gaussian":
        return np.exp(-squared_distances(Z, X) / (2.0 * spec.bandwidth ** 2))
    return Z @ X.T


def eval_kernel(spec, x, y):
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape[0] != y.shape[0]:
        raise DimensionMismatchError(x.shape[0], y.shape[0])
    if spec.family == "gaussian":
        diff = x - y
        return float(np.exp(-np.dot(diff, diff) / (2.0 * spec.bandwidth ** 2)))
    return float(np.dot(x, y))


def cross_kernel(spec, X, Z):
    """Kernel values between rows of ``Z`` (m rows) and ``X`` (n rows), shape (m, n)."""
    X = as_matrix(X)
    Z = as_matrix(Z, "Z")
    if X.shape[1] != Z.shape[1]:
        raise DimensionMismatchError(X.shape[1], Z.shape[1])
    return _apply(spec, Z, X)


def gram_matrix(spec, X):
    X = as_matrix(X)
    if X.shape[0] == 0:
        raise EmptyDatasetError("cannot build a Gram matrix over zero samples")
    K = _apply(spec, X, X)
    if spec.family != "gaussian":
        # BLAS products are not guaranteed bit-symmetric; mirror the upper triangle
        K = np.triu(K) + np.triu(K, 1).T
    K.setflags(write=False)
    degrees = K.sum(axis=1)
    degrees.setflags(write=False)
    return GramMatrix(values=K, degrees=degrees)


def self_kernel(spec, Z):
    """Diagonal K(z, z) for each row of Z."""
    Z = as_matrix(Z, "Z")
    if spec.family == "gaussian":
        return np.ones(Z.shape[0])
    return np.einsum("ij,ij->i", Z, Z)
