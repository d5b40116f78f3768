"""Convex quadratic programs over the capped simplex.

Problems have the form::

    minimize    a' Q a + q' a
    subject to  0 <= a_i <= u,  sum(a) = 1

and solved either by sequential minimal optimization (pairwise steps with
second-order working-set selection) or by projected gradient descent with a
1/L step and an exact Euclidean projection onto the feasible set. Both
methods decrease the objective monotonically and stop on the same KKT
violating-pair residual.
"""
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack

from .errors import InfeasibleError, NotPositiveDefiniteError, ParameterError

DEFAULT_TOLERANCE = 1e-8
DEFAULT_MAX_ITERATIONS = 50_000


@dataclass(eq=False)
class QpProblem:
    Q: np.ndarray
    q: np.ndarray
    upper_bound: float = 1.0
    tolerance: float = DEFAULT_TOLERANCE
    max_iterations: int = DEFAULT_MAX_ITERATIONS

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=np.float64)
        q = np.asarray(self.q, dtype=np.float64).ravel()
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or Q.shape[0] != q.shape[0]:
            raise ParameterError(f"incompatible shapes Q{Q.shape}, q{q.shape}")
        if not (np.all(np.isfinite(Q)) and np.all(np.isfinite(q))):
            raise ParameterError("Q and q must be finite")
        if not self.tolerance > 0:
            raise ParameterError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ParameterError("max_iterations must be positive")
        self.Q = 0.5 * (Q + Q.T)
        self.q = q
        self.upper_bound = float(min(self.upper_bound, 1.0))
        _check_feasible(self.n, self.upper_bound)

    @property
    def n(self):
        return self.q.shape[0]

    def objective(self, alpha):
        return float(alpha @ self.Q @ alpha + self.q @ alpha)

    def gradient(self, alpha):
        return 2.0 * (self.Q @ alpha) + self.q


@dataclass(eq=False)
class QpSolution:
    alpha: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int
    converged: bool
    history: list = field(default=None, repr=False)


def _check_feasible(n, u):
    if n < 1:
        raise InfeasibleError("empty problem")
    # small slack so that u = 1/n computed in floating point stays feasible
    if not u > 0 or u * n < 1.0 - 1e-12:
        raise InfeasibleError(f"capped simplex is empty: upper bound {u} * n {n} < 1")


def _is_feasible(v, u):
    tol = 4.0 * v.shape[0] * np.finfo(float).eps
    return bool(np.all(v >= 0.0) and np.all(v <= u) and abs(v.sum() - 1.0) <= tol)


def project_capped_simplex(v, u=1.0):
    """Euclidean projection of ``v`` onto {w : 0 <= w_i <= u, sum(w) = 1}.

    The projection is ``clip(v - tau, 0, u)`` for the shift ``tau`` at which the
    clipped sum equals one. The clipped sum is piecewise linear and
    non-increasing in tau with breakpoints at ``v_i`` and ``v_i - u``; the
    bracketing pair of breakpoints fixes which coordinates are free, and tau
    is then solved for exactly on that piece.
    """
    v = np.asarray(v, dtype=np.float64).ravel()
    n = v.shape[0]
    u = float(min(u, 1.0))
    _check_feasible(n, u)
    if _is_feasible(v, u):
        return v.copy()
    if u * n <= 1.0:
        return np.full(n, 1.0 / n)

    sv = np.sort(v)
    csum = np.concatenate(([0.0], np.cumsum(sv)))

    def pieces(tau):
        lo = np.searchsorted(sv, tau, side="right")      # v_i <= tau     -> 0
        hi = np.searchsorted(sv, tau + u, side="left")   # v_i >= tau + u -> u
        return lo, hi

    def clipped_sum(tau):
        lo, hi = pieces(tau)
        return u * (n - hi) + (csum[hi] - csum[lo]) - tau * (hi - lo)

    bps = np.unique(np.concatenate((sv, sv - u)))
    s = clipped_sum(bps)
    # s is non-increasing; s(min bp) = n*u >= 1 and s(max bp) = 0 < 1
    j = int(np.searchsorted(-s, -1.0, side="right")) - 1
    j = min(max(j, 0), bps.shape[0] - 2)
    mid = 0.5 * (bps[j] + bps[j + 1])
    lo, hi = pieces(np.array([mid]))
    lo, hi = int(lo[0]), int(hi[0])
    n_free = hi - lo
    if n_free == 0:
        tau = mid
    else:
        tau = (csum[hi] - csum[lo] + u * (n - hi) - 1.0) / n_free
    w = np.clip(v - tau, 0.0, u)
    # v - tau cancels digits when tau is large; hand the rounding residue of
    # the sum back to the free coordinates so the result passes _is_feasible
    # (which makes the projection exactly idempotent)
    free = (w > 0.0) & (w < u)
    if free.any():
        w[free] += (1.0 - w.sum()) / np.count_nonzero(free)
        w = np.clip(w, 0.0, u)
    return w


def _largest_eigenvalue(Q, iterations=500, rtol=1e-10):
    """Power-iteration estimate of the largest |eigenvalue| of symmetric Q."""
    n = Q.shape[0]
    x = 1.0 + 0.5 * np.sin(np.arange(1, n + 1))
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(iterations):
        y = Q @ x
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return 0.0
        x = y / norm
        if abs(norm - lam) <= rtol * norm:
            lam = norm
            break
        lam = norm
    return lam


def _face_step(problem, alpha, f):
    """Move toward the minimizer of the face of the feasible set holding ``alpha``.

    Coordinates sitting on a bound stay there; the free ones solve the
    equality-constrained stationarity system. The step is cut at the first
    bound it would cross and taken only if it lowers the objective.
    Returns the (possibly unchanged) point and its objective.
    """
    u = problem.upper_bound
    free = (alpha > 0.0) & (alpha < u)
    nf = int(free.sum())
    if nf < 2:
        return alpha, f
    Q, q = problem.Q, problem.q
    fixed = ~free
    c = q[free] + 2.0 * (Q[np.ix_(free, fixed)] @ alpha[fixed])
    kkt = np.zeros((nf + 1, nf + 1))
    kkt[:nf, :nf] = 2.0 * Q[np.ix_(free, free)]
    kkt[:nf, nf] = -1.0
    kkt[nf, :nf] = 1.0
    rhs = np.concatenate((-c, [1.0 - alpha[fixed].sum()]))
    sol = None
    try:
        sol = np.linalg.solve(kkt, rhs)
        scale = np.abs(kkt).max() * max(1.0, np.abs(sol).max())
        if not np.all(np.isfinite(sol)) or np.abs(kkt @ sol - rhs).max() > 1e-10 * scale:
            sol = None
    except np.linalg.LinAlgError:
        pass
    if sol is None:
        # singular face (rank-deficient kernel block): minimum-norm stationary point
        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    direction = np.zeros_like(alpha)
    direction[free] = sol[:nf] - alpha[free]
    with np.errstate(divide="ignore", invalid="ignore"):
        t_up = np.where(direction > 0, (u - alpha) / direction, np.inf)
        t_down = np.where(direction < 0, -alpha / direction, np.inf)
    i_up, i_down = int(np.argmin(t_up)), int(np.argmin(t_down))
    t = min(1.0, t_up[i_up], t_down[i_down])
    if not t > 0.0:
        return alpha, f
    trial = np.clip(alpha + t * direction, 0.0, u)
    if t < 1.0:
        # land the blocking coordinate exactly on its bound
        if t_down[i_down] <= t_up[i_up]:
            trial[i_down] = 0.0
        else:
            trial[i_up] = u
    if not _is_feasible(trial, u):
        return alpha, f
    f_trial = problem.objective(trial)
    if f_trial < f:
        return trial, f_trial
    return alpha, f


def kkt_residual(problem, alpha, grad=None):
    """Largest violating-pair gap of the KKT conditions.

    At a minimizer every coordinate that can still increase has a gradient no
    smaller than every coordinate that can still decrease; the residual is how
    far the worst pair is from satisfying that.
    """
    if grad is None:
        grad = problem.gradient(alpha)
    u = problem.upper_bound
    up = alpha < u
    low = alpha > 0.0
    if not up.any() or not low.any():
        return 0.0
    return max(0.0, float(np.max(grad[low]) - np.min(grad[up])))


def _initial_point(problem, alpha0):
    n, u = problem.n, problem.upper_bound
    if alpha0 is None:
        return np.full(n, 1.0 / n)
    alpha = np.asarray(alpha0, dtype=np.float64).ravel().copy()
    if alpha.shape[0] != n:
        raise ParameterError(f"alpha0 has length {alpha.shape[0]}, expected {n}")
    if not _is_feasible(alpha, u):
        alpha = project_capped_simplex(alpha, u)
    return alpha


def solve(problem, alpha0=None, method="smo", record_history=False):
    """Minimize ``problem`` over the capped simplex.

    ``method`` is ``"smo"`` (pairwise coordinate steps, the default) or
    ``"pg"`` (projected gradient with a 1/L step). Both stop once
    :func:`kkt_residual` drops to ``problem.tolerance``. Non-convergence is not
    an error: the last iterate is returned with ``converged=False``.
    """
    alpha = _initial_point(problem, alpha0)
    if problem.n == 1:
        f = problem.objective(alpha)
        return QpSolution(alpha, f, 0.0, 0, True, [f] if record_history else None)
    if method == "smo":
        return _solve_smo(problem, alpha, record_history)
    if method == "pg":
        return _solve_pg(problem, alpha, record_history)
    raise ParameterError(f"unknown QP method {method!r}")


def _solve_smo(problem, alpha, record_history, tau=1e-12, face_every=50):
    Q, u, tol = problem.Q, problem.upper_bound, problem.tolerance
    diag = np.diagonal(Q).copy()
    grad = problem.gradient(alpha)
    history = [problem.objective(alpha)] if record_history else None
    residual = kkt_residual(problem, alpha, grad)
    it = 0
    while residual > tol and it < problem.max_iterations:
        it += 1
        up = alpha < u
        low = alpha > 0.0
        g_up = np.where(up, grad, np.inf)
        i = int(np.argmin(g_up))
        # second-order choice of the partner among coordinates that can decrease
        b = grad - grad[i]
        a = diag[i] + diag - 2.0 * Q[i]
        a = np.where(a > tau, a, tau)
        gain = np.where(low & (b > 0.0), b * b / a, -np.inf)
        j = int(np.argmax(gain))
        if not np.isfinite(gain[j]) or j == i:
            break
        # f changes by -b*delta + a*delta^2 when a_i += delta and a_j -= delta
        delta = b[j] / (2.0 * a[j])
        delta = min(delta, u - alpha[i], alpha[j])
        if delta <= 0.0:
            break
        if delta == u - alpha[i]:
            alpha[i] = u
        else:
            alpha[i] += delta
        if delta == alpha[j]:
            alpha[j] = 0.0
        else:
            alpha[j] -= delta
        grad += 2.0 * delta * (Q[:, i] - Q[:, j])
        if record_history:
            history.append(problem.objective(alpha))
        if face_every and it % face_every == 0:
            f = problem.objective(alpha)
            moved, f_moved = _face_step(problem, alpha, f)
            if moved is not alpha:
                alpha = moved
                if record_history:
                    history.append(f_moved)
            # also clears drift from the incremental updates
            grad = problem.gradient(alpha)
        residual = kkt_residual(problem, alpha, grad)
    grad = problem.gradient(alpha)
    residual = kkt_residual(problem, alpha, grad)
    return QpSolution(alpha=alpha, objective=problem.objective(alpha), kkt_residual=residual,
                      iterations=it, converged=residual <= tol, history=history)


def _solve_pg(problem, alpha, record_history):
    u, tol = problem.upper_bound, problem.tolerance
    L = 2.0 * _largest_eigenvalue(problem.Q) * 1.01
    if L <= 0.0:
        L = 1.0
    f = problem.objective(alpha)
    history = [f] if record_history else None
    grad = problem.gradient(alpha)
    residual = kkt_residual(problem, alpha, grad)
    it = 0
    while residual > tol and it < problem.max_iterations:
        it += 1
        candidate = project_capped_simplex(alpha - grad / L, u)
        f_new = problem.objective(candidate)
        if f_new > f + 1e-15 * max(1.0, abs(f)):
            # the power-iteration estimate of L was too small
            L *= 2.0
            continue
        if np.array_equal(candidate, alpha):
            break
        alpha, f = candidate, f_new
        grad = problem.gradient(alpha)
        residual = kkt_residual(problem, alpha, grad)
        if record_history:
            history.append(f)
    return QpSolution(alpha=alpha, objective=f, kkt_residual=residual,
                      iterations=it, converged=residual <= tol, history=history)


def solve_unconstrained(problem):
    """Stationary point of the objective without the simplex constraints.

    Solves ``2 Q a = -q`` by Cholesky; Q must be positive definite.
    """
    alpha = solve_spd_linear(2.0 * problem.Q, -problem.q.reshape(-1, 1)).ravel()
    return QpSolution(alpha=alpha, objective=problem.objective(alpha),
                      kkt_residual=0.0, iterations=0, converged=True)


def brute_force_reference(problem, resolution=0.005):
    """Best point of a regular grid on the capped simplex. Test oracle only."""
    n, u = problem.n, problem.upper_bound
    if n > 4:
        raise ParameterError(f"brute force reference refuses n={n} > 4")
    steps = int(round(1.0 / resolution))
    if steps < 1:
        raise ParameterError("resolution must be at most 1")
    h = 1.0 / steps
    cap = int(math.floor(u / h + 1e-9))
    if n == 1:
        grid = np.array([[steps]])
    else:
        # all compositions of `steps` into n nonnegative parts, each <= cap
        cuts = np.array(list(itertools.combinations(range(steps + n - 1), n - 1)))
        edges = np.hstack((np.full((len(cuts), 1), -1), cuts,
                           np.full((len(cuts), 1), steps + n - 1)))
        grid = np.diff(edges, axis=1) - 1
    grid = grid[np.all(grid <= cap, axis=1)]
    if len(grid) == 0:
        raise InfeasibleError("grid too coarse for the upper bound")
    A = grid * h
    values = np.einsum("ij,jk,ik->i", A, problem.Q, A) + A @ problem.q
    best = int(np.argmin(values))
    return QpSolution(alpha=A[best], objective=float(values[best]), kkt_residual=math.nan,
                      iterations=len(A), converged=True)


def solve_spd_linear(A, B):
    """Solve A X = B for symmetric positive-definite A via Cholesky."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    vector = B.ndim == 1
    if vector:
        B = B.reshape(-1, 1)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] != B.shape[0]:
        raise ParameterError(f"incompatible shapes A{A.shape}, B{B.shape}")
    if not np.all(np.isfinite(A)):
        raise ParameterError("A must be finite")
    c, info = lapack.dpotrf(A, lower=1, clean=1)
    if info > 0:
        # LAPACK reports the 1-based order of the failing leading minor
        raise NotPositiveDefiniteError(info - 1)
    if info < 0:
        raise ParameterError(f"dpotrf argument {-info} invalid")
    X, info = lapack.dpotrs(c, B, lower=1)
    if info != 0:
        raise ParameterError(f"dpotrs failed with info={info}")
    return X.ravel() if vector else X
