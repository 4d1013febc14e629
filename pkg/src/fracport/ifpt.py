"""Iterative fraction penalty thresholding (IFPT).

Each iteration takes a gradient step on the smooth part of the penalized
objective and applies the closed-form thresholding operator with weight
``lam * phi``::

    x <- G_{lam phi}(x + (phi/T) R^T (beta e - R x) + phi eta A^T (b - A x))

With ``phi`` below the reciprocal Lipschitz bound the penalized objective
is non-increasing along the iterates (for fixed ``lam``). In target-sparsity
mode ``lam`` is re-chosen every iteration from the order statistics of the
gradient-step vector so that exactly ``r`` entries pass the threshold.
"""

import enum
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .errors import ConfigError, DimensionError, NumericDomainError, SolverError
from .problem import (
    ObjectiveParams,
    constraint_violation,
    gradient_step,
    max_step_size,
    objective_penalized,
)
from .prox import ProxParams, Regime, prox_vector, threshold

logger = logging.getLogger(__name__)

LAMBDA_MIN = 1e-12


class Termination(enum.Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"
    ZERO_SOLUTION = "zero_solution"
    STALLED = "stalled"


@dataclass(frozen=True)
class FixedLambda:
    lam: float

    def __post_init__(self):
        if not np.isfinite(self.lam) or self.lam <= 0:
            raise ConfigError(f"lambda must be positive, got {self.lam!r}")


@dataclass(frozen=True)
class TargetSparsity:
    r: int

    def __post_init__(self):
        if int(self.r) != self.r or self.r < 1:
            raise ConfigError(f"target sparsity must be a positive integer, got {self.r!r}")


@dataclass(frozen=True)
class SolverConfig:
    """Parameters shared by the IFPT and INFPT solvers.

    ``tol_x`` defaults to ``1e-8 * sqrt(n)`` once the problem size is known;
    a run whose step falls to ``tol_x`` is converged. ``tol_obj`` stops a
    fixed-lambda run whose objective decrease falls below
    ``tol_obj * max(1, |C|)``; that is reported separately as stalled,
    since the iterates may still be moving. Set it to 0 to disable.
    """

    mode: object = field(default_factory=lambda: FixedLambda(1e-3))
    a: float = 1.0
    eta: float = 1.0
    epsilon: float = 0.01
    max_iters: int = 50_000
    tol_x: float = None
    tol_obj: float = 1e-12

    def __post_init__(self):
        if not isinstance(self.mode, (FixedLambda, TargetSparsity)):
            raise ConfigError(f"mode must be FixedLambda or TargetSparsity, got {self.mode!r}")
        if not np.isfinite(self.a) or self.a <= 0:
            raise ConfigError(f"a must be positive, got {self.a!r}")
        if not np.isfinite(self.eta) or self.eta <= 0:
            raise ConfigError(f"eta must be positive, got {self.eta!r}")
        if not 0 < self.epsilon < 1:
            raise ConfigError(f"epsilon must lie in (0, 1), got {self.epsilon!r}")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be positive")
        if self.tol_x is not None and self.tol_x <= 0:
            raise ConfigError("tol_x must be positive")
        if self.tol_obj < 0:
            raise ConfigError("tol_obj must be nonnegative")

    def resolved_tol_x(self, n):
        return self.tol_x if self.tol_x is not None else 1e-8 * math.sqrt(n)


@dataclass
class SolveResult:
    x: np.ndarray
    objective_trace: list
    lambda_trace: list
    iterations: int
    termination: Termination
    support: np.ndarray
    phi: float
    last_step: float
    lam: float

    @property
    def support_size(self):
        return int(self.support.size)


@dataclass
class NonnegSolveResult(SolveResult):
    feasibility_violation: float = 0.0


@dataclass(frozen=True)
class AdaptiveLambda:
    """Choice of ``lam`` for one iteration.

    ``t_star`` is the prox threshold of ``lam * phi``; ``cut`` is the
    magnitude at or below which entries are zeroed. They coincide in the
    small-lambda regime. In the large-lambda regime ``t_star`` equals the
    r-th largest magnitude, where zero and the nonzero root tie, and ``cut``
    is the (r+1)-th so that the r-th entry is kept.
    """

    lam: float
    regime: Regime
    t_star: float
    cut: float


def adaptive_lambda(B, a, phi, r):
    """Regularization weight that leaves ``r`` entries of ``B`` above threshold.

    With ``|B|_(1) >= |B|_(2) >= ...`` the small-lambda candidate is
    ``2 |B|_(r+1) / (a phi)``; if it exceeds ``1 / (a^2 phi)`` the
    large-lambda candidate ``(2 a |B|_(r) + 1)^2 / (4 a^2 phi)`` is used.
    Entries tied at the cut are all zeroed.
    """
    mag = np.abs(np.asarray(B, dtype=float))
    n = mag.size
    if int(r) != r or not 1 <= r < n:
        raise ConfigError(f"target sparsity r must satisfy 1 <= r < n={n}, got {r!r}")
    lam, code, cut = _kernels.adaptive_core(mag, float(a), float(phi), int(r), LAMBDA_MIN)
    if code == _kernels.SMALL:
        regime, t_star = Regime.SMALL_LAMBDA, cut
    else:
        regime = Regime.LARGE_LAMBDA
        t_star = float(np.sort(mag)[n - r])
    return AdaptiveLambda(float(lam), regime, float(t_star), float(cut))


def lambda_bar(p, a, eta):
    """Regularization level at and above which zero is a global minimizer."""
    base = p.beta**2 + eta * float(p.b @ p.b)
    v = (p.beta / p.T) * p.R.sum(axis=0) + eta * (p.A.T @ p.b)
    vinf = float(np.max(np.abs(v)))
    return base + vinf / a + math.sqrt(vinf**2 + 2.0 * a * base * vinf) / a


def _project(v):
    return np.maximum(v, 0.0)


_TERMINATION = {
    _kernels.CONVERGED: Termination.CONVERGED,
    _kernels.MAX_ITERS: Termination.MAX_ITERS,
    _kernels.ZERO_SOLUTION: Termination.ZERO_SOLUTION,
    _kernels.STALLED: Termination.STALLED,
}


def _run(p, cfg, x0, nonneg):
    n = p.n
    x = np.array(x0, dtype=float)
    if x.shape != (n,):
        raise DimensionError(f"x0 must have length {n}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ConfigError("x0 must be finite")
    adaptive = isinstance(cfg.mode, TargetSparsity)
    if adaptive and not cfg.mode.r < n:
        raise ConfigError(f"target sparsity r={cfg.mode.r} must be below n={n}")

    a, eta = cfg.a, cfg.eta
    phi = max_step_size(p, eta, cfg.epsilon)
    tol_x = cfg.resolved_tol_x(n)
    lbar = lambda_bar(p, a, eta)
    # smooth part as a quadratic: x^T G x - 2 c^T x + s0
    G = np.ascontiguousarray(p.R.T @ p.R / p.T + eta * (p.A.T @ p.A))
    c = (p.beta / p.T) * p.R.sum(axis=0) + eta * (p.A.T @ p.b)
    s0 = p.beta**2 + eta * float(p.b @ p.b)
    if adaptive:
        r, lam0, t0 = int(cfg.mode.r), 0.0, 0.0
    else:
        r, lam0 = 0, float(cfg.mode.lam)
        t0 = threshold(ProxParams(a, lam0 * phi)).t_star

    obj_trace = np.empty(cfg.max_iters + 1)
    lam_trace = np.empty(cfg.max_iters)
    x, it, term, last_step, lam, status, bad = _kernels.thresholding_loop(
        G, c, s0, x, a, phi, lam0, t0, r, nonneg, cfg.max_iters, tol_x,
        cfg.tol_obj, lbar, LAMBDA_MIN, obj_trace, lam_trace,
    )
    if status == _kernels.DOMAIN:
        raise NumericDomainError(f"thresholding failed at index {bad} in iteration {it}")
    if status == _kernels.NONFINITE:
        raise SolverError(f"non-finite iterate at iteration {it}")
    termination = _TERMINATION[term]
    objective_trace = obj_trace[:it + 1].tolist()
    lambda_trace = lam_trace[:it].tolist()
    if termination is Termination.MAX_ITERS:
        logger.debug("hit max_iters=%d with last step %.3e", cfg.max_iters, last_step)

    support = np.flatnonzero(x)
    cls = NonnegSolveResult if nonneg else SolveResult
    result = cls(
        x=x,
        objective_trace=objective_trace,
        lambda_trace=lambda_trace,
        iterations=it,
        termination=termination,
        support=support,
        phi=phi,
        last_step=last_step if it else 0.0,
        lam=float(lam),
    )
    if nonneg:
        result.feasibility_violation = constraint_violation(p, x)
    if adaptive and support.size > cfg.mode.r:
        logger.warning("support size %d exceeds target %d", support.size, cfg.mode.r)
    return result


def default_start(n):
    """Equal-weight portfolio."""
    return np.full(n, 1.0 / n)


def ifpt_solve(p, cfg, x0=None):
    """Run IFPT from ``x0`` (equal weights by default)."""
    if x0 is None:
        x0 = default_start(p.n)
    return _run(p, cfg, x0, nonneg=False)


def fixed_point_residual(p, cfg, result, nonneg=False):
    """``||x - G_{lam phi}(B_phi(x))||`` at the solver output, using its final ``lam``."""
    B = gradient_step(p, cfg.eta, result.phi, result.x)
    V = _project(B) if nonneg else B
    if isinstance(cfg.mode, TargetSparsity):
        choice = adaptive_lambda(V, cfg.a, result.phi, cfg.mode.r)
        image = prox_vector(ProxParams(cfg.a, choice.lam * result.phi), V, t_star=choice.cut)
    else:
        image = prox_vector(ProxParams(cfg.a, result.lam * result.phi), V)
    return float(np.linalg.norm(result.x - image))


@dataclass
class FirstOrderReport:
    max_residual: float
    residuals: dict
    passed: bool


def check_first_order(p, params, x, tol):
    """Stationarity residuals on the support of ``x``.

    For every ``i`` with ``x_i != 0`` compares
    ``sign(x_i) * [(2/T) R^T (beta e - R x) + 2 eta A^T (b - A x)]_i``
    against ``a lam / (1 + a |x_i|)^2``.
    """
    x = np.asarray(x, dtype=float)
    lhs = (2.0 / p.T) * (p.R.T @ (p.beta - p.R @ x)) + 2.0 * params.eta * (p.A.T @ (p.b - p.A @ x))
    residuals = {}
    for i in np.flatnonzero(x):
        rhs = params.a * params.lam / (1.0 + params.a * abs(x[i])) ** 2
        residuals[int(i)] = float(abs(lhs[i] * np.sign(x[i]) - rhs))
    worst = max(residuals.values(), default=0.0)
    return FirstOrderReport(worst, residuals, worst <= tol)


@dataclass
class LowerBoundCheck:
    index: int
    applicable: bool
    bound: float
    value: float
    holds: bool


@dataclass
class BoundsReport:
    lower: list
    upper_applicable: bool
    upper_bound: float
    sup_norm: float
    upper_holds: bool

    @property
    def lower_holds(self):
        return all(c.holds for c in self.lower if c.applicable)

    @property
    def passed(self):
        return self.lower_holds and self.upper_holds


def check_bounds(p, params, x):
    """Check the magnitude bounds on the nonzero entries of a solution.

    Lower bound, per support index ``i`` with
    ``c_i = (1/T) ||R_i||^2 + eta ||A_i||^2`` and only when ``a > c_i / sqrt(lam)``::

        |x_i| >= sqrt(lam) / c_i - 1/a

    Upper bound, only when ``lam > f0 = (1/T) ||beta e||^2 + eta ||b||^2``::

        ||x||_inf <= f0 / (a (lam - f0))
    """
    x = np.asarray(x, dtype=float)
    a, lam, eta = params.a, params.lam, params.eta
    col = (p.R**2).sum(axis=0) / p.T + eta * (p.A**2).sum(axis=0)
    lower = []
    for i in np.flatnonzero(x):
        c = float(col[i])
        applicable = a > c / math.sqrt(lam)
        bound = math.sqrt(lam) / c - 1.0 / a
        lower.append(LowerBoundCheck(int(i), applicable, bound, float(abs(x[i])),
                                     (not applicable) or abs(x[i]) >= bound))
    f0 = p.beta**2 + eta * float(p.b @ p.b)
    sup = float(np.max(np.abs(x))) if x.size else 0.0
    if lam > f0:
        ub = f0 / (a * (lam - f0))
        return BoundsReport(lower, True, ub, sup, sup <= ub)
    return BoundsReport(lower, False, math.nan, sup, True)


@dataclass
class EtaSweepPoint:
    eta: float
    x: np.ndarray
    violation: float
    result: SolveResult


def eta_sweep(p, cfg, etas, x0=None, solver=None):
    """Solve at each penalty weight in ``etas``, warm-starting from the previous solution."""
    etas = list(etas)
    if not etas or any(e <= 0 for e in etas) or any(e2 <= e1 for e1, e2 in zip(etas, etas[1:])):
        raise ConfigError("etas must be positive and strictly increasing")
    solver = solver or ifpt_solve
    x = default_start(p.n) if x0 is None else np.asarray(x0, dtype=float)
    out = []
    for eta in etas:
        res = solver(p, replace(cfg, eta=eta), x)
        x = res.x
        out.append(EtaSweepPoint(eta, x, constraint_violation(p, x), res))
    return out


def objective_params(cfg, lam):
    return ObjectiveParams(cfg.a, lam, cfg.eta)


def penalized_value(p, cfg, result):
    return objective_penalized(p, objective_params(cfg, result.lam), result.x)
