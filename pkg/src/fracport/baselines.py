"""Reference solvers used for comparison and as test oracles."""

import enum
import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConfigError, SingularSystemError, SolverError
from .problem import max_step_size, smooth_objective, tracking_error

# condition numbers above this are treated as singular
MAX_CONDITION = 1e12


class Method(enum.Enum):
    MARKOWITZ_EQUALITY = "markowitz_equality"
    L1_PENALIZED = "l1_penalized"
    EXACT_CARDINALITY = "exact_cardinality"


@dataclass
class BaselineResult:
    x: np.ndarray
    objective: float
    method: Method
    iterations: int = 0
    converged: bool = True
    objective_trace: list = None
    lam: float = None

    @property
    def support(self):
        return np.flatnonzero(self.x)


def _kkt_solve(R, A, b, beta, T):
    n = R.shape[1]
    m = A.shape[0]
    K = np.zeros((n + m, n + m))
    K[:n, :n] = (2.0 / T) * (R.T @ R)
    K[:n, n:] = A.T
    K[n:, :n] = A
    rhs = np.concatenate([(2.0 * beta / T) * R.sum(axis=0), b])
    cond = np.linalg.cond(K)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise SingularSystemError("KKT system is singular", condition_number=cond)
    sol = np.linalg.solve(K, rhs)
    return sol[:n], sol[n:]


def markowitz_equality(p):
    """Minimum tracking error subject to ``A x = b``, from the KKT system."""
    x, _ = _kkt_solve(p.R, p.A, p.b, p.beta, p.T)
    return BaselineResult(x=x, objective=tracking_error(p, x), method=Method.MARKOWITZ_EQUALITY)


def kkt_residuals(p, x, multipliers=None):
    """Constraint residual and Lagrangian gradient norm at ``x``."""
    x = np.asarray(x, dtype=float)
    grad = (2.0 / p.T) * (p.R.T @ (p.R @ x - p.beta))
    if multipliers is None:
        # least-squares multipliers for the stationarity equation
        multipliers = np.linalg.lstsq(p.A.T, -grad, rcond=None)[0]
    return (float(np.linalg.norm(p.A @ x - p.b)),
            float(np.linalg.norm(grad + p.A.T @ multipliers)))


def l1_penalized(p, lam, eta, max_iters=50_000, tol=None, x0=None, epsilon=0.01):
    """Proximal gradient with soft thresholding on the l1-penalized objective.

    Minimizes ``(1/T) ||R x - beta e||^2 + lam ||x||_1 + eta ||A x - b||^2``
    with the same step size rule as the fraction-penalty solvers.
    """
    if lam < 0 or eta <= 0:
        raise ConfigError("need lam >= 0 and eta > 0")
    n = p.n
    tol = 1e-8 * math.sqrt(n) if tol is None else tol
    phi = max_step_size(p, eta, epsilon)
    G = np.ascontiguousarray(p.R.T @ p.R / p.T + eta * (p.A.T @ p.A))
    c = (p.beta / p.T) * p.R.sum(axis=0) + eta * (p.A.T @ p.b)
    s0 = p.beta**2 + eta * float(p.b @ p.b)
    x0 = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    trace = np.empty(max_iters + 1)
    x, it, converged, _ = _kernels.soft_threshold_loop(G, c, s0, x0, phi, float(lam),
                                                       max_iters, tol, trace)
    if not np.all(np.isfinite(x)):
        raise SolverError("non-finite iterate in l1 solver")
    objective = smooth_objective(p, eta, x) + lam * float(np.abs(x).sum())
    return BaselineResult(x=x, objective=objective, method=Method.L1_PENALIZED,
                          iterations=int(it), converged=bool(converged),
                          objective_trace=trace[:it + 1].tolist(), lam=float(lam))


def l1_for_sparsity(p, k, eta, max_iters=20_000, bisection_steps=40, epsilon=0.01):
    """l1 solution with the largest support not exceeding ``k``.

    Bisects ``log(lam)`` between the zero-solution level and a near-dense
    level. The support size need not be monotone in ``lam``, so the best
    candidate seen along the way is kept.
    """
    if not 1 <= k <= p.n:
        raise ConfigError(f"k must lie in [1, {p.n}]")
    c = (p.beta / p.T) * p.R.sum(axis=0) + eta * (p.A.T @ p.b)
    hi = 2.0 * float(np.max(np.abs(c))) * (1 + 1e-9)  # soft threshold kills B_phi(0)
    lo = hi * 1e-8
    best = l1_penalized(p, hi, eta, max_iters=max_iters, epsilon=epsilon)
    x_warm = None
    for _ in range(bisection_steps):
        mid = math.sqrt(lo * hi)
        res = l1_penalized(p, mid, eta, max_iters=max_iters, x0=x_warm, epsilon=epsilon)
        size = res.support.size
        if size <= k:
            hi = mid
            if size >= best.support.size:
                best = res
            x_warm = res.x
            if size == k:
                break
        else:
            lo = mid
        if hi / lo < 1.0 + 1e-6:
            break
    return best


def exact_cardinality(p, k, n_cap=15, eta=None):
    """Best portfolio with at most ``k`` nonzeros, by enumerating supports.

    With ``eta=None`` each support solves the equality-constrained least
    squares problem (supports that cannot meet ``A x = b`` are skipped).
    With ``eta > 0`` each support minimizes the penalized smooth objective
    ``(1/T) ||R x - beta e||^2 + eta ||A x - b||^2`` instead. Ties go to the
    lexicographically smallest support.
    """
    n = p.n
    if n > n_cap:
        raise ConfigError(f"support enumeration limited to n <= {n_cap}, got n={n}")
    if not 1 <= k <= n:
        raise ConfigError(f"k must lie in [1, {n}]")
    best_obj, best_support, best_x = math.inf, None, None
    for size in range(1, k + 1):
        for support in itertools.combinations(range(n), size):
            cols = list(support)
            Rs, As = p.R[:, cols], p.A[:, cols]
            if eta is None:
                z = _constrained_lsq(Rs, As, p.b, p.beta, p.T)
                if z is None:
                    continue
                x = np.zeros(n)
                x[cols] = z
                obj = tracking_error(p, x)
            else:
                M = np.vstack([Rs / math.sqrt(p.T), math.sqrt(eta) * As])
                rhs = np.concatenate([np.full(p.T, p.beta / math.sqrt(p.T)),
                                      math.sqrt(eta) * p.b])
                z = np.linalg.lstsq(M, rhs, rcond=None)[0]
                x = np.zeros(n)
                x[cols] = z
                obj = smooth_objective(p, eta, x)
            if obj < best_obj or (obj == best_obj and support < best_support):
                best_obj, best_support, best_x = obj, support, x
    if best_x is None:
        raise SolverError(f"no support of size <= {k} satisfies the constraints")
    return BaselineResult(x=best_x, objective=best_obj, method=Method.EXACT_CARDINALITY)


def _constrained_lsq(Rs, As, b, beta, T, feas_tol=1e-8):
    """Equality-constrained least squares on one support, or None if infeasible."""
    s = Rs.shape[1]
    K = np.zeros((s + 2, s + 2))
    K[:s, :s] = (2.0 / T) * (Rs.T @ Rs)
    K[:s, s:] = As.T
    K[s:, :s] = As
    rhs = np.concatenate([(2.0 * beta / T) * Rs.sum(axis=0), b])
    sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    z = sol[:s]
    if np.linalg.norm(As @ z - b) > feas_tol * max(1.0, np.linalg.norm(b)):
        return None
    return z
