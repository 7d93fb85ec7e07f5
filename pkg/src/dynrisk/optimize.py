"""Golden-section search and feasibility bisection, scalar and vectorized.

The vectorized variants run one bracket per array element in lockstep,
which lets grid solvers optimize every node of a time slice with a fixed
number of numpy calls.
"""

import math

import numpy as np

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_max_scalar(f, a: float, b: float, tol: float = 1e-8) -> float:
    """Argmax of a unimodal f on [a, b] to absolute tolerance tol."""
    if b - a <= tol:
        return 0.5 * (a + b)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def _n_golden_iters(span: float, tol: float) -> int:
    return max(1, int(math.ceil(math.log(tol / max(span, tol)) / math.log(_INVPHI))))


def golden_extremum_arrays(f, a, b, tol, maximize: bool):
    """Vectorized golden-section extremum over per-element brackets [a, b].

    Returns (argext, f(argext)). Elements with a >= b collapse to the
    midpoint. f must map arrays to arrays elementwise.
    """
    a = np.asarray(a, dtype=float).copy()
    b = np.asarray(b, dtype=float).copy()
    sign = 1.0 if maximize else -1.0
    n_iter = _n_golden_iters(float(np.max(b - a, initial=0.0)), tol)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc = sign * f(c)
    fd = sign * f(d)
    for _ in range(n_iter):
        left = fc > fd  # extremum bracketed in [a, d]
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        c = b - _INVPHI * (b - a)
        d = a + _INVPHI * (b - a)
        probe = np.where(left, c, d)
        f_new = sign * f(probe)
        fc, fd = (np.where(left, f_new, fd), np.where(left, fc, f_new))
    mid = 0.5 * (a + b)
    return mid, f(mid)


def golden_max_arrays(f, a, b, tol):
    return golden_extremum_arrays(f, a, b, tol, maximize=True)


def golden_min_arrays(f, a, b, tol):
    return golden_extremum_arrays(f, a, b, tol, maximize=False)


def golden_min_scalar(f, a: float, b: float, tol: float):
    """Scalar golden-section minimum; returns (argmin, f(argmin))."""
    if b - a <= tol:
        mid = 0.5 * (a + b)
        return mid, f(mid)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    mid = 0.5 * (a + b)
    return mid, f(mid)


def bisect_boundary_scalar(ok, bad: float, good: float, tol: float) -> float:
    """Scalar feasibility bisection; returns the feasible side."""
    n_iter = max(1, int(math.ceil(math.log2(max(abs(good - bad), tol) / tol))))
    for _ in range(n_iter):
        mid = 0.5 * (bad + good)
        if ok(mid):
            good = mid
        else:
            bad = mid
    return good


def bisect_boundary_arrays(ok, bad, good, tol):
    """Vectorized bisection between an infeasible point (bad) and a
    feasible one (good); returns the feasible side of the final bracket,
    so results re-evaluate as feasible."""
    bad = np.asarray(bad, dtype=float).copy()
    good = np.asarray(good, dtype=float).copy()
    width = float(np.max(np.abs(good - bad), initial=0.0))
    n_iter = max(1, int(math.ceil(math.log2(max(width, tol) / tol))))
    for _ in range(n_iter):
        mid = 0.5 * (bad + good)
        is_ok = ok(mid)
        good = np.where(is_ok, mid, good)
        bad = np.where(is_ok, bad, mid)
    return good
