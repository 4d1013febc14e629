"""Compiled inner loops.

The public functions in :mod:`fracport.prox` and :mod:`fracport.ifpt`
wrap these; they are kept free of Python objects so numba can compile them.
"""

import math

import numpy as np
from numba import njit

ARCCOS_SLACK = 1e-12

SMALL, LARGE = 0, 1
CONVERGED, MAX_ITERS, ZERO_SOLUTION, STALLED = 0, 1, 2, 3
OK, NONFINITE, DOMAIN = 0, 1, 2


@njit(cache=True)
def prox_entry(a, lam, t_star, g):
    """Thresholded cubic root for one entry; returns (value, ok)."""
    mag = abs(g)
    if mag <= t_star:
        return 0.0, True
    one_plus = 1.0 + a * mag
    arg = 27.0 * lam * a * a / (4.0 * one_plus**3) - 1.0
    if arg < -1.0 - ARCCOS_SLACK or arg > 1.0 + ARCCOS_SLACK:
        return math.nan, False
    arg = min(max(arg, -1.0), 1.0)
    psi = math.acos(arg)
    root = (one_plus / 3.0 * (1.0 + 2.0 * math.cos(psi / 3.0 - math.pi / 3.0)) - 1.0) / a
    # rounding right at the threshold can push the root slightly out of [0, |g|]
    root = min(max(root, 0.0), mag)
    return math.copysign(root, g) if root > 0.0 else 0.0, True


@njit(cache=True)
def prox_array(a, lam, t_star, x, out):
    """Fill ``out`` with the thresholded entries of ``x``; returns the first bad index or -1."""
    for i in range(x.shape[0]):
        v, ok = prox_entry(a, lam, t_star, x[i])
        if not ok:
            return i
        out[i] = v
    return -1


@njit(cache=True)
def adaptive_core(mag, a, phi, r, lam_min):
    """Order-statistic choice of lambda; ``mag`` holds nonnegative magnitudes."""
    n = mag.shape[0]
    s = np.sort(mag)
    b_r = s[n - r]
    b_r1 = s[n - r - 1]
    lam1 = 2.0 * b_r1 / (a * phi)
    if lam1 <= 1.0 / (a * a * phi):
        # lam1 * phi * a / 2 == b_r1 in exact arithmetic
        if lam1 < lam_min:
            return lam_min, SMALL, max(b_r1, lam_min * phi * a / 2.0)
        return lam1, SMALL, b_r1
    lam2 = (2.0 * a * b_r + 1.0) ** 2 / (4.0 * a * a * phi)
    # lam2 puts the prox threshold exactly at b_r, where zero and the cubic
    # root tie; cutting at b_r1 keeps the r-th entry on the nonzero branch
    return lam2, LARGE, b_r1


@njit(cache=True)
def _penalty(a, x):
    total = 0.0
    for i in range(x.shape[0]):
        ax = a * abs(x[i])
        total += ax / (ax + 1.0)
    return total


@njit(cache=True)
def _quad(G, c, s0, x, Gx):
    # x^T G x - 2 c^T x + s0, with Gx filled as a by-product
    n = x.shape[0]
    val = s0
    for i in range(n):
        acc = 0.0
        for j in range(n):
            acc += G[i, j] * x[j]
        Gx[i] = acc
        val += x[i] * acc - 2.0 * c[i] * x[i]
    return val


@njit(cache=True)
def thresholding_loop(G, c, s0, x0, a, phi, lam_fixed, t_fixed, r, nonneg,
                      max_iters, tol_x, tol_obj, lam_bar, lam_min,
                      obj_trace, lam_trace):
    """Run the gradient-step/threshold iteration.

    ``r > 0`` selects the adaptive (target sparsity) mode, in which
    ``lam_fixed`` and ``t_fixed`` are ignored. Returns
    ``(x, iterations, termination, last_step, lam, status, bad_index)``.
    """
    n = x0.shape[0]
    adaptive = r > 0
    x = x0.copy()
    x_new = np.empty(n)
    Gx = np.empty(n)
    V = np.empty(n)
    mag = np.empty(n)
    smooth = _quad(G, c, s0, x, Gx)
    lam = lam_fixed
    t_star = t_fixed
    termination = MAX_ITERS
    last_step = math.inf
    it = 0
    while it < max_iters:
        it += 1
        for i in range(n):
            v = x[i] + phi * (c[i] - Gx[i])
            if nonneg and v < 0.0:
                v = 0.0
            V[i] = v
            mag[i] = abs(v)
        if adaptive:
            lam, _, t_star = adaptive_core(mag, a, phi, r, lam_min)
        if it == 1:
            obj_trace[0] = smooth + lam * _penalty(a, x)
        if lam >= lam_bar:
            zero = True
            for i in range(n):
                if x[i] != 0.0:
                    zero = False
                    break
            if zero:
                return x, it - 1, ZERO_SOLUTION, 0.0, lam, OK, -1
        bad = prox_array(a, lam * phi, t_star, V, x_new)
        if bad >= 0:
            return x, it, termination, last_step, lam, DOMAIN, bad
        smooth = _quad(G, c, s0, x_new, Gx)
        obj = smooth + lam * _penalty(a, x_new)
        if not math.isfinite(obj):
            return x, it, termination, last_step, lam, NONFINITE, -1
        step = 0.0
        for i in range(n):
            d = x_new[i] - x[i]
            step += d * d
            x[i] = x_new[i]
        last_step = math.sqrt(step)
        prev = obj_trace[it - 1]
        obj_trace[it] = obj
        lam_trace[it - 1] = lam
        if last_step <= tol_x:
            termination = CONVERGED
            break
        if not adaptive and abs(prev - obj) <= tol_obj * max(1.0, abs(prev)):
            termination = STALLED
            break
    return x, it, termination, last_step, lam, OK, -1


@njit(cache=True)
def soft_threshold_loop(G, c, s0, x0, phi, lam, max_iters, tol_x, obj_trace):
    """Proximal gradient on ``x^T G x - 2 c^T x + s0 + lam ||x||_1``.

    Returns ``(x, iterations, converged, last_step)``.
    """
    n = x0.shape[0]
    x = x0.copy()
    Gx = np.empty(n)
    smooth = _quad(G, c, s0, x, Gx)
    l1 = 0.0
    for i in range(n):
        l1 += abs(x[i])
    obj_trace[0] = smooth + lam * l1
    kappa = lam * phi / 2.0
    last_step = math.inf
    it = 0
    while it < max_iters:
        it += 1
        step = 0.0
        for i in range(n):
            v = x[i] + phi * (c[i] - Gx[i])
            if v > kappa:
                v -= kappa
            elif v < -kappa:
                v += kappa
            else:
                v = 0.0
            d = v - x[i]
            step += d * d
            x[i] = v
        smooth = _quad(G, c, s0, x, Gx)
        l1 = 0.0
        for i in range(n):
            l1 += abs(x[i])
        obj_trace[it] = smooth + lam * l1
        last_step = math.sqrt(step)
        if last_step <= tol_x:
            return x, it, True, last_step
    return x, it, False, last_step
