"""Bayesian data description.

The embedded training points are modelled as Gaussian with identity
covariance around the weighted center ``sum_i a_i phi(x_i)``, with a Gaussian
prior ``a ~ N(m, C)``. The MAP estimate minimizes::

    a'(n K + C^-1) a - 2 a'(D1 + C^-1 m)

over the simplex, where ``D1`` holds the kernel row sums (weighted degrees).
The default prior uses ``C = I`` and ``m_i = -(D1_i)^nu`` so that points in
dense regions are pulled towards zero weight and the description is carried
by boundary points. Dropping the prior (``C^-1 = 0``) gives the maximum
likelihood fit, which sits at the plain kernel mean.
"""
import warnings
from dataclasses import dataclass

import numpy as np

from . import qp
from .errors import ConvergenceWarning, DimensionMismatchError, EmptyDatasetError, ParameterError
from .kernel import gram_matrix
from .model import DescriptionModel


@dataclass(eq=False)
class Prior:
    mean: np.ndarray
    precision: np.ndarray = None
    precision_is_identity: bool = False

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64).ravel()
        if not np.all(np.isfinite(self.mean)):
            raise ParameterError("prior mean must be finite")
        n = self.mean.shape[0]
        if self.precision is None:
            self.precision_is_identity = True
        if self.precision_is_identity:
            self.precision = np.eye(n)
        else:
            P = np.asarray(self.precision, dtype=np.float64)
            if P.shape != (n, n):
                raise DimensionMismatchError(P.shape, (n, n), "prior precision shape")
            if not np.allclose(P, P.T, rtol=0.0, atol=1e-10):
                raise ParameterError("prior precision must be symmetric")
            self.precision = P

    @property
    def n(self):
        return self.mean.shape[0]


def _check_nu(nu):
    if not 0.0 < nu < 1.0:
        raise ParameterError(f"nu must lie in (0, 1), got {nu}")


def degree_power_mean(degrees, nu):
    degrees = np.asarray(degrees, dtype=np.float64)
    bad = np.flatnonzero(~(degrees > 0.0))
    if bad.size:
        i = int(bad[0])
        raise ParameterError(f"weighted degree of sample {i} is {degrees[i]}; must be positive")
    return -np.power(degrees, nu)


def density_prior_mean(gram, nu):
    """Prior mean ``m_i = -(sum_j K_ij)^nu``; denser points get more negative means."""
    _check_nu(nu)
    return degree_power_mean(gram.degrees, nu)


def build_map_problem(gram, prior, upper_bound=1.0, **solver_opts):
    n = gram.n
    if prior.n != n:
        raise DimensionMismatchError(prior.n, n, "prior dimension")
    K = gram.values
    if prior.precision_is_identity:
        Q = n * K + np.eye(n)
        lin = gram.degrees + prior.mean
    else:
        Q = n * K + prior.precision
        lin = gram.degrees + prior.precision @ prior.mean
    return qp.QpProblem(Q=Q, q=-2.0 * lin, upper_bound=upper_bound, **solver_opts)


def _prepare(X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyDatasetError("need at least one training point")
    return X


def fit_map(X, kernel, gram, prior, method_tag, upper_bound=1.0, constrained=True,
            params=None, method="smo", **solver_opts):
    """Solve the MAP problem for a given prior and wrap the result as a model."""
    problem = build_map_problem(gram, prior, upper_bound, **solver_opts)
    if constrained:
        sol = qp.solve(problem, method=method)
        if not sol.converged:
            warnings.warn(f"{method_tag} solver stopped after {sol.iterations} iterations "
                          f"with KKT residual {sol.kkt_residual:.3g}", ConvergenceWarning)
    else:
        sol = qp.solve_unconstrained(problem)
    params = dict(params or {})
    params["constrained"] = bool(constrained)
    return DescriptionModel.from_weights(X, sol.alpha, kernel, gram, method_tag,
                                         upper_bound=problem.upper_bound,
                                         params=params, solution=sol)


def train_bdd(X, nu, kernel, precision=None, upper_bound=1.0, constrained=True,
              gram=None, method="smo", **solver_opts):
    X = _prepare(X)
    _check_nu(nu)
    if gram is None:
        gram = gram_matrix(kernel, X)
    prior = Prior(mean=density_prior_mean(gram, nu), precision=precision)
    return fit_map(X, kernel, gram, prior, "bdd", upper_bound, constrained,
                   params={"nu": float(nu)}, method=method, **solver_opts)


def ml_problem(gram, **solver_opts):
    return qp.QpProblem(Q=gram.n * gram.values, q=-2.0 * gram.degrees, **solver_opts)


def train_ml(X, kernel, gram=None, method="smo", **solver_opts):
    """Maximum-likelihood weighted Gaussian (no prior)."""
    X = _prepare(X)
    if gram is None:
        gram = gram_matrix(kernel, X)
    problem = ml_problem(gram, **solver_opts)
    sol = qp.solve(problem, method=method)
    return DescriptionModel.from_weights(X, sol.alpha, kernel, gram, "ml",
                                         upper_bound=problem.upper_bound, solution=sol)


def score_bdd(model, Z):
    return model.score(Z)
