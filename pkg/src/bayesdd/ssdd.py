"""Semi-supervised data description.

Unlabeled samples only shape the prior. The prior mean uses weighted degrees
over labeled and unlabeled samples together, and optionally the prior
precision is taken from the labeled block of a regularized inverse graph
Laplacian built on a k-nn graph over all samples. The QP itself stays
n-dimensional.

Ordering contract: labeled samples always occupy the first n rows.
"""
from dataclasses import dataclass

import numpy as np

from . import qp
from .bdd import Prior, _check_nu, degree_power_mean, fit_map
from .errors import DimensionMismatchError, EmptyDatasetError, ParameterError
from .kernel import GramMatrix, as_matrix, squared_distances, gram_matrix

DEFAULT_GRAPH_K = 7
DEFAULT_EPSILON = 1e-3


@dataclass(frozen=True, eq=False)
class NeighborGraph:
    weights: np.ndarray
    k: int
    bandwidth: float


@dataclass(frozen=True, eq=False)
class LaplacianPrecision:
    matrix: np.ndarray
    regularization: float


def knn_graph(X_all, k, bandwidth):
    """Symmetrized k-nn graph with Gaussian edge weights.

    i and j are joined when either is among the other's k nearest neighbours;
    distance ties go to the lower index.
    """
    X_all = as_matrix(X_all)
    N = X_all.shape[0]
    if not 1 <= k < N:
        raise ParameterError(f"k must satisfy 1 <= k < {N}, got {k}")
    if not bandwidth > 0:
        raise ParameterError(f"graph bandwidth must be > 0, got {bandwidth}")
    d2 = squared_distances(X_all, X_all)
    ranked = d2.copy()
    np.fill_diagonal(ranked, np.inf)
    nearest = np.argsort(ranked, axis=1, kind="stable")[:, :k]
    adj = np.zeros((N, N), dtype=bool)
    adj[np.repeat(np.arange(N), k), nearest.ravel()] = True
    adj |= adj.T
    W = np.where(adj, np.exp(-d2 / (2.0 * bandwidth ** 2)), 0.0)
    np.fill_diagonal(W, 0.0)
    return NeighborGraph(weights=W, k=int(k), bandwidth=float(bandwidth))


def graph_laplacian(graph):
    W = graph.weights if isinstance(graph, NeighborGraph) else np.asarray(graph, dtype=np.float64)
    return np.diag(W.sum(axis=1)) - W


def laplacian_precision(L, labeled_count, epsilon=DEFAULT_EPSILON):
    """Labeled block of ``(L + eps I)^-1``.

    L is singular (constant vectors lie in its null space), so the ridge is
    what makes the inverse exist. Principal blocks of a PD matrix are PD.
    """
    L = np.asarray(L, dtype=np.float64)
    N = L.shape[0]
    if not epsilon > 0:
        raise ParameterError(f"epsilon must be > 0, got {epsilon}")
    if not 1 <= labeled_count <= N:
        raise ParameterError(f"labeled_count must lie in [1, {N}], got {labeled_count}")
    inv = qp.solve_spd_linear(L + epsilon * np.eye(N), np.eye(N))
    block = inv[:labeled_count, :labeled_count]
    return LaplacianPrecision(matrix=0.5 * (block + block.T), regularization=float(epsilon))


def semi_prior_mean(gram_full, labeled_count, nu):
    """``m_i = -(sum_{j in L u U} K_ij)^nu`` for the labeled rows."""
    _check_nu(nu)
    if not 1 <= labeled_count <= gram_full.n:
        raise ParameterError(f"labeled_count must lie in [1, {gram_full.n}], got {labeled_count}")
    return degree_power_mean(gram_full.degrees[:labeled_count], nu)


def train_ssdd(X_labeled, X_unlabeled, nu, kernel, graph_k=DEFAULT_GRAPH_K,
               graph_bandwidth=None, epsilon=DEFAULT_EPSILON,
               use_laplacian_precision=False, upper_bound=1.0, method="smo",
               **solver_opts):
    X_l = np.asarray(X_labeled, dtype=np.float64)
    if X_l.ndim != 2 or X_l.shape[0] == 0:
        raise EmptyDatasetError("need at least one labeled point")
    X_u = np.asarray(X_unlabeled, dtype=np.float64)
    if X_u.size == 0:
        X_u = np.zeros((0, X_l.shape[1]))
    if X_u.ndim != 2 or X_u.shape[1] != X_l.shape[1]:
        raise DimensionMismatchError(X_l.shape[1], X_u.shape[-1])
    _check_nu(nu)
    n = X_l.shape[0]
    if graph_bandwidth is None:
        graph_bandwidth = kernel.bandwidth

    gram = gram_matrix(kernel, X_l)
    if X_u.shape[0] == 0:
        gram_full = gram
    else:
        X_all = np.vstack((X_l, X_u))
        gram_full = gram_matrix(kernel, X_all)
        # the likelihood term only sees the labeled block
        block = gram_full.values[:n, :n]
        gram = GramMatrix(values=block, degrees=block.sum(axis=1))
    mean = semi_prior_mean(gram_full, n, nu)

    if use_laplacian_precision:
        X_all = np.vstack((X_l, X_u))
        graph = knn_graph(X_all, graph_k, graph_bandwidth)
        precision = laplacian_precision(graph_laplacian(graph), n, epsilon).matrix
        prior = Prior(mean=mean, precision=precision)
    else:
        prior = Prior(mean=mean)

    params = {"nu": float(nu), "unlabeled_count": int(X_u.shape[0]),
              "use_laplacian_precision": bool(use_laplacian_precision)}
    if use_laplacian_precision:
        params.update(graph_k=int(graph_k), graph_bandwidth=float(graph_bandwidth),
                      epsilon=float(epsilon))
    return fit_map(X_l, kernel, gram, prior, "ssdd", upper_bound, True,
                   params=params, method=method, **solver_opts)
