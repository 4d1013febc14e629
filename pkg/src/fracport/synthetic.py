"""Seeded synthetic data: factor-model return panels and planted sparse instances."""

import numpy as np

from .data import ReturnsPanel, YearMonth
from .errors import ConfigError
from .problem import build_problem


def factor_panel(n, start, end, seed, n_factors=3, name_prefix="P"):
    """Monthly returns from a linear factor model, rounded like the library files.

    The first factor plays the market (mean about 0.9% a month, volatility
    about 4.5%); the remaining ones are smaller long-short factors. Loadings
    and idiosyncratic volatilities are drawn per asset. Values are rounded to
    two decimals in percent, as in the published files.
    """
    if n < 2 or n_factors < 1:
        raise ConfigError("need n >= 2 and at least one factor")
    rng = np.random.default_rng(seed)
    start, end = YearMonth.parse(start), YearMonth.parse(end)
    T = end.index - start.index + 1
    if T < 2:
        raise ConfigError("need at least two months")
    means = np.r_[0.009, np.full(n_factors - 1, 0.002)]
    vols = np.r_[0.045, np.full(n_factors - 1, 0.025)]
    F = means + vols * rng.standard_normal((T, n_factors))
    loadings = np.column_stack([rng.uniform(0.6, 1.4, n),
                                rng.normal(0.0, 0.5, (n, n_factors - 1))])
    alpha = rng.normal(0.0, 0.002, n)
    idio = rng.uniform(0.015, 0.04, n)
    R = alpha + F @ loadings.T + idio * rng.standard_normal((T, n))
    R = np.round(R * 100.0, 2) / 100.0
    dates = tuple(start.shift(k) for k in range(T))
    assets = tuple(f"{name_prefix}{i + 1:03d}" for i in range(n))
    return ReturnsPanel(dates, assets, R)


def planted_instance(rng, n, T, r, nonneg=False, beta=0.1, min_weight=0.2):
    """Problem whose returns admit an ``r``-sparse portfolio with zero tracking error.

    Weights have magnitudes at least ``min_weight`` and sum to one (and are
    nonnegative when ``nonneg``). ``R`` is Gaussian noise with a rank-one
    correction so that ``R x = beta e``; the planted ``x`` then satisfies
    ``A x = b`` too. Returns ``(problem, x)``.
    """
    if not 1 <= r <= n:
        raise ConfigError("need 1 <= r <= n")
    if nonneg and r * min_weight > 1.0:
        raise ConfigError(f"{r} nonnegative weights of at least {min_weight} cannot sum to one")
    while True:
        if nonneg:
            w = rng.uniform(min_weight, 1.0, r)
            w = w / w.sum()
        else:
            w = rng.uniform(min_weight, 0.6, r) * rng.choice([-1.0, 1.0], r)
            w[-1] += 1.0 - w.sum()
        if np.abs(w).min() >= min_weight:
            break
    x = np.zeros(n)
    x[rng.choice(n, r, replace=False)] = w
    R0 = rng.standard_normal((T, n))
    R = R0 + np.outer(beta - R0 @ x, x) / (x @ x)
    return build_problem(R, beta), x


def random_instance(rng, n, T, scale=0.05, beta=None):
    """Gaussian returns with standard deviation ``scale``; ``beta`` defaults to the equal-weight mean."""
    R = scale * rng.standard_normal((T, n)) + scale / 5.0
    if beta is None:
        beta = float(R.mean())
    return build_problem(R, beta)
