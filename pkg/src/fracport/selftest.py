"""Quick end-to-end checks against independent oracles."""

import numpy as np

from .ifpt import FixedLambda, SolverConfig, TargetSparsity, ifpt_solve
from .infpt import infpt_solve
from .prox import (
    ProxParams,
    prox_objective,
    prox_oracle,
    prox_scalar,
    threshold,
    threshold_large,
    threshold_small,
)
from .synthetic import planted_instance, random_instance


def _check_prox(rng, trials=60):
    worst = 0.0
    for j in range(2 * trials):
        a = 10 ** rng.uniform(-1, 1)
        lam = 10 ** rng.uniform(-2, 1)
        params = ProxParams(a, lam)
        if j < trials:
            gamma = rng.uniform(-3, 3)
        else:
            # near the threshold, where a wrong constant changes the answer
            gamma = threshold(params).t_star * rng.uniform(0.5, 1.5) * rng.choice([-1.0, 1.0])
        closed = prox_objective(params, gamma, prox_scalar(params, gamma))
        brute = prox_objective(params, gamma, prox_oracle(params, gamma, grid_step=1e-3))
        worst = max(worst, closed - brute)
    return worst <= 1e-9, f"worst objective excess {worst:.2e} over {2 * trials} triples"


def _check_continuity():
    gaps = [abs(threshold_small(a, 1 / a**2) - threshold_large(a, 1 / a**2)) for a in (0.1, 1.0, 10.0)]
    worst = max(gaps)
    return worst <= 1e-12, f"max regime gap {worst:.1e}"


def _check_descent(rng):
    p = random_instance(rng, n=20, T=60)
    res = ifpt_solve(p, SolverConfig(mode=FixedLambda(0.05), max_iters=20_000))
    diffs = np.diff(res.objective_trace)
    worst = float(diffs.max()) if diffs.size else 0.0
    return worst <= 1e-12, f"{res.iterations} iterations, largest increase {worst:.1e}"


def _check_recovery(rng):
    p, x = planted_instance(rng, n=30, T=60, r=4, nonneg=True)
    res = infpt_solve(p, SolverConfig(mode=TargetSparsity(4)))
    same = set(res.support) == set(np.flatnonzero(x))
    err = float(np.linalg.norm(res.x - x))
    ok = same and err <= 1e-3 and bool(np.all(res.x >= 0))
    return ok, f"support recovered: {same}, error {err:.1e}"


def run_selftest(seed=0):
    """Return ``(name, passed, detail)`` rows."""
    rng = np.random.default_rng(seed)
    checks = [
        ("prox closed form vs brute force", lambda: _check_prox(rng)),
        ("threshold continuity at lam = 1/a^2", _check_continuity),
        ("monotone objective (fixed lambda)", lambda: _check_descent(rng)),
        ("planted support recovery (nonnegative)", lambda: _check_recovery(rng)),
    ]
    rows = []
    for name, fn in checks:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failed check, not an abort
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        rows.append((name, bool(ok), detail))
    return rows
