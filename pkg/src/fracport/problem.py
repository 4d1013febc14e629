"""Problem data for penalized sparse mean-variance portfolio selection.

The penalized objective is

    C(x) = (1/T) ||R x - beta e_T||^2 + lam * P_a(x) + eta * ||A x - b||^2

with ``A = (mu, e_n)^T`` and ``b = (beta, 1)``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, MissingDataError
from .penalty import PenaltyParams, penalty


@dataclass(frozen=True)
class PortfolioProblem:
    R: np.ndarray
    mu: np.ndarray
    beta: float
    A: np.ndarray
    b: np.ndarray
    T: int = field(init=False)
    n: int = field(init=False)

    def __post_init__(self):
        R = np.asarray(self.R, dtype=float)
        T, n = R.shape
        if T < 2 or n < 2:
            raise DimensionError(f"need T >= 2 and n >= 2, got R of shape {R.shape}")
        if self.A.shape != (2, n) or self.b.shape != (2,) or self.mu.shape != (n,):
            raise DimensionError("A must be 2 x n, b length 2, mu length n")
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "n", n)
        for arr in (self.R, self.mu, self.A, self.b):
            arr.setflags(write=False)


@dataclass(frozen=True)
class ObjectiveParams:
    a: float
    lam: float
    eta: float

    def __post_init__(self):
        for name in ("a", "lam", "eta"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ConfigError(f"{name} must be positive, got {value!r}")


def build_problem(returns, beta):
    """Assemble a problem from a ``T x n`` matrix of returns and a target return."""
    R = np.array(returns, dtype=float)
    if R.ndim != 2:
        raise DimensionError(f"returns must be a 2-d matrix, got ndim={R.ndim}")
    if not np.all(np.isfinite(R)):
        bad = np.argwhere(~np.isfinite(R))[0]
        raise MissingDataError(f"non-finite return at row {bad[0]}, column {bad[1]}")
    T, n = R.shape
    if T < 2 or n < 2:
        raise DimensionError(f"need T >= 2 and n >= 2, got {T} x {n}")
    beta = float(beta)
    mu = R.mean(axis=0)
    A = np.vstack([mu, np.ones(n)])
    b = np.array([beta, 1.0])
    return PortfolioProblem(R=R, mu=mu, beta=beta, A=A, b=b)


def _check_x(p, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (p.n,):
        raise DimensionError(f"x must have length {p.n}, got shape {x.shape}")
    return x


def tracking_error(p, x):
    """``(1/T) ||R x - beta e_T||^2``."""
    x = _check_x(p, x)
    resid = p.R @ x - p.beta
    return float(resid @ resid) / p.T


def constraint_violation(p, x):
    """Euclidean norm of ``A x - b``."""
    x = _check_x(p, x)
    return float(np.linalg.norm(p.A @ x - p.b))


def objective_constrained(p, a, lam, x):
    """Tracking error plus ``lam * P_a(x)``; feasibility is the caller's concern."""
    x = _check_x(p, x)
    value = tracking_error(p, x)
    if lam:
        value += lam * penalty(PenaltyParams(a), x)
    return value


def objective_penalized(p, params, x):
    x = _check_x(p, x)
    resid = p.A @ x - p.b
    return objective_constrained(p, params.a, params.lam, x) + params.eta * float(resid @ resid)


def smooth_objective(p, eta, x):
    """The differentiable part: tracking error plus ``eta * ||A x - b||^2``."""
    x = _check_x(p, x)
    resid = p.A @ x - p.b
    return tracking_error(p, x) + eta * float(resid @ resid)


def gradient_step(p, eta, phi, z):
    """``z + (phi/T) R^T (beta e_T - R z) + phi eta A^T (b - A z)``.

    Equivalent to ``z - (phi/2) * grad(smooth_objective)(z)``.
    """
    if phi <= 0:
        raise ConfigError(f"step size must be positive, got {phi!r}")
    z = _check_x(p, z)
    return z + (phi / p.T) * (p.R.T @ (p.beta - p.R @ z)) + phi * eta * (p.A.T @ (p.b - p.A @ z))


def spectral_norm(M, tol=1e-10, max_iters=10_000):
    """Largest singular value of ``M`` by power iteration on ``M^T M``."""
    M = np.asarray(M, dtype=float)
    G = M.T @ M
    v = np.ones(G.shape[0]) / np.sqrt(G.shape[0])
    # an all-ones start can be orthogonal to the top eigenvector; perturb it
    v += 1e-3 * np.cos(np.arange(G.shape[0]) + 1.0)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iters):
        w = G @ v
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        new = float(v @ w)
        v = w / nrm
        if abs(new - est) <= tol * max(new, 1.0):
            est = new
            break
        est = new
    # Rayleigh quotient from below; one more product tightens it
    est = max(est, float(v @ (G @ v)))
    return float(np.sqrt(est))


def lipschitz_constant(p, eta):
    """``(1/T) ||R||_2^2 + eta ||A||_2^2``."""
    return spectral_norm(p.R) ** 2 / p.T + eta * spectral_norm(p.A) ** 2


def max_step_size(p, eta, epsilon=0.01):
    """Step size ``(1 - epsilon) / ((1/T) ||R||_2^2 + eta ||A||_2^2)``."""
    if not 0 < epsilon < 1:
        raise ConfigError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    return (1.0 - epsilon) / lipschitz_constant(p, eta)


def surrogate(p, params, phi, x, z):
    """Majorizing surrogate used in the convergence argument of the solver."""
    x = _check_x(p, x)
    z = _check_x(p, z)
    dR = p.R @ (x - z)
    dA = p.A @ (x - z)
    d = x - z
    return (phi * (objective_penalized(p, params, x) - float(dR @ dR) / p.T
                   - params.eta * float(dA @ dA)) + float(d @ d))
