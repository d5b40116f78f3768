"""Support vector data description.

Dual problem: minimize ``a'Ka - a'diag(K)`` over the capped simplex with
bound ``1/(n nu)``; the hypersphere center is ``sum_i a_i phi(x_i)``.
"""
import warnings

import numpy as np

from . import qp
from .errors import (ConvergenceWarning, EmptyDatasetError, NoBoundarySupportVectorError,
                     ParameterError)
from .kernel import gram_matrix
from .model import DescriptionModel, score  # noqa: F401  (re-exported scorer)


def svdd_problem(gram, upper_bound, **solver_opts):
    K = gram.values
    return qp.QpProblem(Q=K, q=-np.diagonal(K), upper_bound=upper_bound, **solver_opts)


def train_svdd(X, nu, kernel, gram=None, method="smo", **solver_opts):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyDatasetError("SVDD needs at least one training point")
    if not 0.0 < nu <= 1.0:
        raise ParameterError(f"nu must lie in (0, 1], got {nu}")
    n = X.shape[0]
    upper = 1.0 / (n * nu)
    if gram is None:
        gram = gram_matrix(kernel, X)
    problem = svdd_problem(gram, upper, **solver_opts)
    sol = qp.solve(problem, method=method)
    if not sol.converged:
        warnings.warn(f"SVDD solver stopped after {sol.iterations} iterations "
                      f"with KKT residual {sol.kkt_residual:.3g}", ConvergenceWarning)
    return DescriptionModel.from_weights(X, sol.alpha, kernel, gram, "svdd",
                                         upper_bound=problem.upper_bound,
                                         params={"nu": float(nu)}, solution=sol)


def radius_sq(model, gram, rtol=1e-9):
    """Squared radius: mean score of the unbounded support vectors.

    Unbounded means ``0 < alpha_i < upper_bound``; by complementary slackness
    these all sit on the sphere.
    """
    alpha = model.alpha
    if model.n == 1:
        return float(max(0.0, model.center_norm_sq + gram.values[0, 0]
                         - 2.0 * alpha[0] * gram.values[0, 0]))
    sv = model.support_indices
    unbounded = sv[alpha[sv] < model.upper_bound * (1.0 - rtol)]
    if unbounded.size == 0:
        raise NoBoundarySupportVectorError(
            "no support vector strictly inside its box; use the largest "
            "support-vector score as the radius instead")
    K = gram.values
    scores = model.center_norm_sq + np.diagonal(K)[unbounded] - 2.0 * (K[unbounded] @ alpha)
    return float(np.mean(scores))
