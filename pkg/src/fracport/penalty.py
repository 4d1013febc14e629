"""The fraction function ``rho_a(t) = a|t| / (a|t| + 1)`` and its sum over a vector."""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class PenaltyParams:
    """Shape parameter of the fraction penalty.

    Larger ``a`` makes the penalty closer to a count of nonzeros, smaller
    ``a`` makes it behave like a scaled l1 norm near the origin.
    """

    a: float

    def __post_init__(self):
        if not np.isfinite(self.a) or self.a <= 0:
            raise ConfigError(f"penalty shape parameter a must be positive, got {self.a!r}")


def rho(params, t):
    """Evaluate the fraction function elementwise; accepts scalars or arrays."""
    at = params.a * np.abs(t)
    out = at / (at + 1.0)
    return float(out) if np.ndim(out) == 0 else out


def penalty(params, x):
    """Sum of ``rho`` over the entries of ``x``."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return 0.0
    at = params.a * np.abs(x)
    return float(np.sum(at / (at + 1.0)))


def rho_derivative(params, t):
    """Derivative ``sign(t) * a / (1 + a|t|)**2`` for ``t != 0``.

    The fraction function has a kink at the origin, so zero is rejected.
    """
    t = float(t)
    if t == 0.0:
        raise ValueError("rho is not differentiable at t = 0")
    a = params.a
    return np.sign(t) * a / (1.0 + a * abs(t)) ** 2
