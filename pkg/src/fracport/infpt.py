"""Nonnegative variant of the thresholding solver (no short selling).

The gradient-step vector is projected onto the nonnegative orthant before
thresholding. Projection followed by the fraction prox is exactly the prox
restricted to ``x >= 0``, so every iterate is nonnegative.
"""

import numpy as np

from .errors import ConfigError
from .ifpt import _run, default_start
from .prox import prox_vector


def project_nonneg(v):
    """Componentwise ``max(0, v)``."""
    return np.maximum(np.asarray(v, dtype=float), 0.0)


def prox_nonneg(params, v):
    """Minimizer of ``||x - v||^2 + lam * P_a(x)`` subject to ``x >= 0``."""
    return prox_vector(params, project_nonneg(v))


def infpt_solve(p, cfg, x0=None):
    """Run the nonnegative solver from ``x0`` (equal weights by default)."""
    if x0 is None:
        x0 = default_start(p.n)
    x0 = np.asarray(x0, dtype=float)
    if np.any(x0 < 0):
        raise ConfigError("starting point must be nonnegative")
    return _run(p, cfg, x0, nonneg=True)
