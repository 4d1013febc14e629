"""Acceptance criteria, one test per criterion.

Each test records a one-line verdict (see the ``verdict`` fixture) before
asserting, so a failing criterion still prints its line.
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from fracport.backtest import emit_report, run_backtest
from fracport.baselines import exact_cardinality
from fracport.data import default_plan, parse_returns_csv, serialize_returns_csv
from fracport.ifpt import (
    FixedLambda,
    SolverConfig,
    TargetSparsity,
    Termination,
    check_bounds,
    eta_sweep,
    fixed_point_residual,
    ifpt_solve,
    lambda_bar,
    objective_params,
)
from fracport.infpt import infpt_solve, prox_nonneg
from fracport.problem import smooth_objective
from fracport.prox import (
    ProxParams,
    prox_nonneg_oracle,
    prox_objective,
    prox_oracle,
    prox_scalar,
    threshold,
    threshold_large,
    threshold_small,
)
from fracport.synthetic import factor_panel, planted_instance, random_instance

PAPER_KS = list(range(6, 21, 2))


def _nonzero_basin(params, gamma):
    """Best point of the prox objective on the side of zero that contains ``gamma``."""
    s = 1.0 if gamma >= 0 else -1.0
    hi = abs(gamma) + 1.0
    grid = np.linspace(1e-12, hi, 20_001)
    vals = prox_objective(params, abs(gamma), grid)
    j = int(np.argmin(vals))
    res = minimize_scalar(lambda b: float(prox_objective(params, abs(gamma), b)),
                          bounds=(grid[max(j - 1, 0)], grid[min(j + 1, grid.size - 1)]),
                          method="bounded", options={"xatol": 1e-13})
    return s * float(res.x)


def test_criterion_01_prox_closed_form(verdict):
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst_obj = worst_arg = 0.0
    unique = 0
    for j in range(1000):
        a = 10 ** rng.uniform(-1, 1)
        lam = 10 ** rng.uniform(-2, 1)
        params = ProxParams(a, lam)
        if j % 2:
            gamma = threshold(params).t_star * rng.uniform(0.5, 1.5) * rng.choice([-1.0, 1.0])
        else:
            gamma = rng.uniform(-3, 3)
        closed = prox_scalar(params, gamma)
        brute = prox_oracle(params, gamma)
        f_closed = float(prox_objective(params, gamma, closed))
        f_brute = float(prox_objective(params, gamma, brute))
        worst_obj = max(worst_obj, f_closed - f_brute)
        other = _nonzero_basin(params, gamma)
        gap = abs(float(prox_objective(params, gamma, other)) - float(prox_objective(params, gamma, 0.0)))
        if gap > 1e-6:
            unique += 1
            worst_arg = max(worst_arg, abs(closed - brute))
    elapsed = time.perf_counter() - start
    ok = worst_obj <= 1e-9 and worst_arg <= 1e-6 and elapsed < 30
    verdict(1, ok, f"objective excess {worst_obj:.1e}, argument gap {worst_arg:.1e} "
                   f"on {unique} unique-minimizer triples, {elapsed:.1f} s")
    assert ok


def test_criterion_02_threshold_continuity(verdict):
    gaps = {a: abs(threshold_small(a, 1 / a**2) - threshold_large(a, 1 / a**2))
            for a in (0.1, 1.0, 10.0)}
    ok = max(gaps.values()) <= 1e-12
    verdict(2, ok, "gaps " + ", ".join(f"a={a}: {g:.1e}" for a, g in gaps.items()))
    assert ok


@pytest.fixture(scope="module")
def descent_runs():
    """Fixed-lambda runs on 50 instances (n=50, T=120).

    Each instance is solved at a small lambda with the default limits and at
    a moderate lambda with the stall rule off, so those runs end on the step
    criterion.
    """
    rng = np.random.default_rng(303)
    runs = []
    for _ in range(50):
        p = random_instance(rng, n=50, T=120)
        for cfg in (SolverConfig(mode=FixedLambda(1e-3)),
                    SolverConfig(mode=FixedLambda(0.03), max_iters=500_000, tol_obj=0.0)):
            runs.append((p, cfg, ifpt_solve(p, cfg)))
    return runs


def test_criterion_03_monotone_descent(descent_runs, verdict):
    worst_rise = -math.inf
    converged = 0
    worst_step = 0.0
    for p, cfg, res in descent_runs:
        worst_rise = max(worst_rise, float(np.diff(res.objective_trace).max()))
        if res.termination is Termination.CONVERGED:
            converged += 1
            worst_step = max(worst_step, res.last_step / cfg.resolved_tol_x(p.n))
    ok = worst_rise <= 1e-12 and converged > 0 and worst_step <= 1.0
    verdict(3, ok, f"{len(descent_runs)} runs, largest objective increase {worst_rise:.1e}, "
                   f"{converged} converged with last step <= {worst_step:.2f} tol")
    assert ok


def test_criterion_04_fixed_point(descent_runs, verdict):
    rng = np.random.default_rng(404)
    ratios = []
    for p, cfg, res in descent_runs:
        if res.termination is Termination.CONVERGED:
            ratios.append(fixed_point_residual(p, cfg, res) / cfg.resolved_tol_x(p.n))
    # adaptive runs on planted instances too
    for _ in range(10):
        p, _ = planted_instance(rng, n=48, T=60, r=6)
        cfg = SolverConfig(mode=TargetSparsity(6))
        res = ifpt_solve(p, cfg)
        if res.termination is Termination.CONVERGED:
            ratios.append(fixed_point_residual(p, cfg, res) / cfg.resolved_tol_x(p.n))
    ok = bool(ratios) and max(ratios) <= 10.0
    verdict(4, ok, f"{len(ratios)} converged solutions, worst residual "
                   f"{max(ratios, default=math.nan):.2f} tol_x")
    assert ok


def test_criterion_05_zero_solution_and_bounds(verdict):
    rng = np.random.default_rng(505)
    nonzero = 0
    upper_checked = upper_failed = upper_nonzero = 0
    lower_checked = lower_failed = 0
    for _ in range(20):
        p = random_instance(rng, n=20, T=60)
        lbar = lambda_bar(p, 1.0, 1.0)
        cfg = SolverConfig(mode=FixedLambda(1.01 * lbar))
        for _ in range(10):
            x0 = rng.normal(0.0, 1.0, p.n)
            res = ifpt_solve(p, cfg, x0)
            nonzero += int(np.any(res.x))
        f0 = p.beta**2 + float(p.b @ p.b)
        for lam in (1e-3, 1e-2, 0.1 * lbar, 0.5 * lbar, 1.5 * f0, 3.0 * f0):
            run = SolverConfig(mode=FixedLambda(lam), max_iters=200_000)
            for x0 in (None, rng.normal(0.0, 1.0, p.n)):
                res = ifpt_solve(p, run, x0)
                bounds = check_bounds(p, objective_params(run, lam), res.x)
                if bounds.upper_applicable:
                    upper_checked += 1
                    upper_failed += not bounds.upper_holds
                    upper_nonzero += bool(np.any(res.x))
                for c in bounds.lower:
                    if c.applicable:
                        lower_checked += 1
                        lower_failed += not c.holds
    ok = nonzero == 0 and upper_failed == 0 and lower_failed == 0 and upper_checked > 0
    verdict(5, ok, f"{nonzero}/200 nonzero runs above lambda_bar; upper bound failed "
                   f"{upper_failed}/{upper_checked} ({upper_nonzero} at nonzero x), lower bound failed "
                   f"{lower_failed}/{lower_checked} applicable checks")
    assert ok


def test_criterion_06_nonnegative_prox(verdict):
    rng = np.random.default_rng(606)
    worst = -math.inf
    negative = 0
    for _ in range(1000):
        n = int(rng.integers(1, 4))
        params = ProxParams(10 ** rng.uniform(-1, 1), 10 ** rng.uniform(-2, 1))
        v = rng.uniform(-3, 3, n)
        mine = prox_nonneg(params, v)
        brute = prox_nonneg_oracle(params, v)
        f = lambda x: float(np.sum(prox_objective(params, v, x)))  # noqa: E731
        worst = max(worst, f(mine) - f(brute))
        negative += int(np.any(mine < 0))
    # the solver's iterates: rerunning with a cap of j iterations yields iterate j
    iterates = 0
    for _ in range(100):
        # a problem needs at least two assets
        n = int(rng.integers(2, 4))
        p = random_instance(rng, n=n, T=12)
        cfg = SolverConfig(mode=FixedLambda(10 ** rng.uniform(-4, -1)))
        x0 = rng.uniform(0.0, 1.0, n)
        for j in range(1, 21):
            x = infpt_solve(p, replace(cfg, max_iters=j), x0).x
            negative += int(np.any(x < 0))
            iterates += 1
    ok = worst <= 1e-6 and negative == 0
    verdict(6, ok, f"worst objective excess {worst:.1e} over 1000 prox cases; "
                   f"{negative} negative entries in prox outputs and {iterates} iterates")
    assert ok


def test_criterion_07_sparsity_targeting(verdict):
    rng = np.random.default_rng(707)
    summary = []
    ok = True
    for solver, r, nonneg in ((ifpt_solve, 6, False), (infpt_solve, 4, True)):
        sizes = []
        for _ in range(50):
            p, _ = planted_instance(rng, n=48, T=60, r=r, nonneg=nonneg)
            sizes.append(solver(p, SolverConfig(mode=TargetSparsity(r))).support_size)
        exact = sum(s == r for s in sizes)
        ok &= exact >= 45 and max(sizes) <= r
        summary.append(f"{solver.__name__} r={r}: {exact}/50 exact, max {max(sizes)}")
    verdict(7, ok, "; ".join(summary))
    assert ok


def test_criterion_08_eta_sweep(verdict):
    rng = np.random.default_rng(808)
    etas = [1.0, 10.0, 100.0, 1000.0, 1e4]
    worst_ratio = 0.0
    worst_final = 0.0
    for mode in (FixedLambda(1e-3), TargetSparsity(6)):
        for _ in range(10):
            p = random_instance(rng, n=20, T=60, scale=1.0)
            points = eta_sweep(p, SolverConfig(mode=mode), etas)
            v = [pt.violation for pt in points]
            worst_ratio = max(worst_ratio, max(b / a for a, b in zip(v, v[1:])))
            worst_final = max(worst_final, v[-1])
    ok = worst_ratio <= 1.1 and worst_final <= 1e-2
    verdict(8, ok, f"largest step ratio {worst_ratio:.3f}, worst violation at eta=1e4 "
                   f"{worst_final:.1e}")
    assert ok


def test_criterion_09_exact_dominates(verdict):
    rng = np.random.default_rng(909)
    worst = -math.inf
    compared = 0
    for _ in range(20):
        p = random_instance(rng, n=8, T=40)
        for k in (2, 3, 4):
            cfg = SolverConfig(mode=TargetSparsity(k))
            res = ifpt_solve(p, cfg)
            s = res.support_size
            if s == 0:
                continue
            exact = exact_cardinality(p, s, eta=cfg.eta)
            worst = max(worst, exact.objective - smooth_objective(p, cfg.eta, res.x))
            compared += 1
    ok = compared > 0 and worst <= 1e-10
    verdict(9, ok, f"{compared} comparisons, largest exact-minus-IFPT gap {worst:.1e}")
    assert ok


def _table_backtest(tmp_path, n, seed, methods):
    path = tmp_path / f"ff{n}.csv"
    path.write_text(serialize_returns_csv(factor_panel(n, "197101", "200612", seed=seed)))
    panel = parse_returns_csv(path)
    report = run_backtest(panel, default_plan(), methods, PAPER_KS, SolverConfig(a=1.0))
    return report, emit_report(report, "markdown").decode()


def test_criterion_10_backtest_pipeline(tmp_path, verdict):
    start = time.perf_counter()
    ff48, md48 = _table_backtest(tmp_path, 48, 48, ["ifpt", "l1"])
    ff100, md100 = _table_backtest(tmp_path, 100, 100, ["infpt"])
    elapsed = time.perf_counter() - start

    problems = []
    for report, md in ((ff48, md48), (ff100, md100)):
        if len(report.periods) != 7:
            problems.append(f"{len(report.periods)} period rows")
        if report.failures():
            problems.append(f"{len(report.failures())} failed cells")
        for k in PAPER_KS:
            for m in report.methods:
                if f"k={k} " not in md:
                    problems.append(f"no k={k} column")
    ifpt = [c for c in ff48.cells if c.method == "ifpt"]
    if not all(math.isfinite(c.sharpe) for c in ifpt):
        problems.append("non-finite IFPT Sharpe")
    sub = [c for c in ifpt if c.termination != "aggregate"]
    positive = sum(c.sharpe > 0 for c in sub)
    if positive <= len(sub) / 2:
        problems.append(f"only {positive}/{len(sub)} positive IFPT sub-period ratios")
    if any(c.support_size != c.k for c in sub):
        problems.append("IFPT support size differs from k")
    infpt = [c for c in ff100.cells if c.termination != "aggregate"]
    if any(c.support_size > c.k or min(c.holdings) < 0 for c in infpt):
        problems.append("INFPT support above k or negative weight")
    if elapsed >= 300:
        problems.append(f"took {elapsed:.0f} s")
    ok = not problems
    verdict(10, ok, f"synthetic FF48/FF100-format files, {elapsed:.0f} s, IFPT positive in "
                    f"{positive}/{len(sub)} sub-periods"
                    + ("" if ok else "; " + "; ".join(problems)))
    assert ok
