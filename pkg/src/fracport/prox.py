"""Closed-form thresholding operator of the fraction penalty.

For ``gamma`` in R the scalar problem

    minimize over beta:  (beta - gamma)**2 + lam * rho_a(beta)

has the solution ``0`` when ``|gamma| <= t*`` and a root of a depressed
cubic otherwise. The root is written with the trigonometric form of
Cardano's formula so the whole operator vectorizes over numpy arrays.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from . import _kernels
from .errors import ConfigError, NumericDomainError


class Regime(enum.Enum):
    SMALL_LAMBDA = "small_lambda"
    LARGE_LAMBDA = "large_lambda"


@dataclass(frozen=True)
class ProxParams:
    """Shape ``a`` and the effective weight ``lam`` seen by the prox.

    Inside the solvers ``lam`` is the product of the regularization
    parameter and the step size.
    """

    a: float
    lam: float

    def __post_init__(self):
        if not np.isfinite(self.a) or self.a <= 0:
            raise ConfigError(f"a must be positive, got {self.a!r}")
        if not np.isfinite(self.lam) or self.lam <= 0:
            raise ConfigError(f"lam must be positive, got {self.lam!r}")


@dataclass(frozen=True)
class ThresholdValue:
    t_star: float
    regime: Regime


def threshold_small(a, lam):
    return lam * a / 2.0


def threshold_large(a, lam):
    return max(math.sqrt(lam) - 1.0 / (2.0 * a), 0.0)


def threshold(params):
    """Magnitude below which the prox returns zero."""
    a, lam = params.a, params.lam
    if lam <= 1.0 / (a * a):
        return ThresholdValue(threshold_small(a, lam), Regime.SMALL_LAMBDA)
    return ThresholdValue(threshold_large(a, lam), Regime.LARGE_LAMBDA)


def apply_threshold(a, lam, t_star, x):
    """Thresholding kernel without parameter validation, for inner loops."""
    x = np.ascontiguousarray(x, dtype=float)
    out = np.zeros_like(x)
    flat = x.reshape(-1)
    bad = _kernels.prox_array(float(a), float(lam), float(t_star), flat, out.reshape(-1))
    if bad >= 0:
        raise NumericDomainError(
            f"arccos argument outside [-1, 1] at index {bad} (a={a}, lam={lam}, "
            f"gamma={flat[bad]!r})",
        )
    return out


def prox_scalar(params, gamma):
    """Global minimizer of ``(beta - gamma)**2 + lam * rho_a(beta)``."""
    t_star = threshold(params).t_star
    return float(apply_threshold(params.a, params.lam, t_star, np.array([float(gamma)]))[0])


def prox_vector(params, x, t_star=None):
    """Apply :func:`prox_scalar` to every entry of ``x``.

    ``t_star`` overrides the threshold; the adaptive solvers pass the exact
    order statistic they were calibrated against so that rounding in
    ``lam`` cannot let an extra entry through.
    """
    if t_star is None:
        t_star = threshold(params).t_star
    return apply_threshold(params.a, params.lam, t_star, x)


def prox_objective(params, gamma, beta):
    """The scalar objective minimized by the prox, for use in checks."""
    ab = params.a * np.abs(beta)
    return (beta - gamma) ** 2 + params.lam * ab / (ab + 1.0)


def prox_oracle(params, gamma, grid_halfwidth=1.0, grid_step=1e-4):
    """Brute-force minimizer of the prox objective.

    Evaluates the objective on a uniform grid covering
    ``[-(|gamma| + grid_halfwidth), |gamma| + grid_halfwidth]``, refines every
    discrete local minimum with a bounded scalar search, and also tries
    ``beta = 0`` where the objective has its kink. Only meant for tests.
    """
    if grid_step > 1e-3:
        raise ConfigError("grid_step must be at most 1e-3")
    gamma = float(gamma)
    half = abs(gamma) + grid_halfwidth
    num = int(math.ceil(2 * half / grid_step)) + 1
    grid = np.linspace(-half, half, num)

    def f(beta):
        return float(prox_objective(params, gamma, beta))

    vals = prox_objective(params, gamma, grid)
    left = np.r_[np.inf, vals[:-1]]
    right = np.r_[vals[1:], np.inf]
    basins = np.flatnonzero((vals <= left) & (vals <= right))

    best_x, best_f = 0.0, f(0.0)
    for i in basins:
        lo = grid[max(i - 1, 0)]
        hi = grid[min(i + 1, num - 1)]
        res = minimize_scalar(f, bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-13})
        for cand in (res.x, grid[i]):
            fc = f(cand)
            if fc < best_f:
                best_x, best_f = float(cand), fc
    return best_x


def prox_nonneg_oracle(params, v, grid_step=1e-3):
    """Brute-force minimizer of ``||x - v||**2 + lam * P_a(x)`` over ``x >= 0``.

    The objective separates over coordinates, so each one is searched on a
    grid over ``[0, |v_i| + 1]`` and refined locally.
    """
    v = np.asarray(v, dtype=float)
    out = np.empty_like(v)
    for i, vi in enumerate(v):
        hi = abs(vi) + 1.0
        grid = np.linspace(0.0, hi, int(math.ceil(hi / grid_step)) + 1)
        vals = prox_objective(params, vi, grid)
        j = int(np.argmin(vals))

        def f(beta, vi=vi):
            return float(prox_objective(params, vi, beta))

        res = minimize_scalar(f, bounds=(grid[max(j - 1, 0)], grid[min(j + 1, len(grid) - 1)]),
                              method="bounded", options={"xatol": 1e-13})
        cands = [0.0, grid[j], float(res.x)]
        out[i] = min(cands, key=f)
    return out
