"""Safeguarded scalar root finding for strictly increasing maps.

The saddle-point equations of this package all reduce to solving
F(x) = target where F is smooth and strictly increasing with derivative
bounded in [slope_lo, slope_hi]. Newton from a bracket with bisection
fallback converges unconditionally; the slope bounds give the initial
bracket without any search.
"""

from __future__ import annotations

import numpy as np

from .errors import SolverError

__all__ = ["solve_increasing", "solve_increasing_batch"]


def solve_increasing(f, target, x0, *, slope_lo, slope_hi, df=None,
                     tol, max_iter=100):
    """Solve f(x) = target for strictly increasing f with f' in [slope_lo, slope_hi].

    x0 is any starting point; the bracket [x0 + r/slope_hi, x0 + r/slope_lo]
    (r = target - f(x0), ordered) contains the root by the mean value
    theorem, padded slightly against roundoff. Newton steps are clipped to
    the bracket and the bracket shrinks every iteration.

    tol is the absolute tolerance on |f(x) - target|.
    """
    if not (0 < slope_lo <= slope_hi):
        raise SolverError("slope bounds must satisfy 0 < slope_lo <= slope_hi")
    x = float(x0)
    r = target - float(f(x))
    if abs(r) <= tol:
        return x
    pad = 1e-9 * (1.0 + abs(r) / slope_lo)
    steps = sorted((r / slope_hi, r / slope_lo))
    a, b = x + steps[0] - pad, x + steps[1] + pad
    fa = float(f(a)) - target
    fb = float(f(b)) - target
    # pad should make this unreachable; expand defensively if roundoff bites
    grow = max(1.0, abs(r) / slope_lo)
    for _ in range(60):
        if fa <= 0 <= fb:
            break
        if fa > 0:
            a -= grow
            fa = float(f(a)) - target
        if fb < 0:
            b += grow
            fb = float(f(b)) - target
        grow *= 2
    else:
        raise SolverError("failed to bracket the root")

    x = 0.5 * (a + b)
    for _ in range(max_iter):
        fx = float(f(x)) - target
        if abs(fx) <= tol:
            return x
        if fx > 0:
            b = x
        else:
            a = x
        slope = float(df(x)) if df is not None else None
        if slope is not None and slope > 0:
            step = -fx / slope
            xn = x + step
        else:
            xn = None
        if xn is None or not (a < xn < b):
            xn = 0.5 * (a + b)
        x = xn
    raise SolverError("root solve did not converge")


def solve_increasing_batch(f, target, x0, *, slope_lo, slope_hi, df,
                           tol, stall_tol=None, max_iter=60):
    """Vectorized variant: f maps an array to an array elementwise.

    All rows share the slope bounds. The hot path is pure clipped Newton
    inside the mean-value-theorem bracket with no extra f evaluations; if
    the slope bounds were only estimates and that fails to converge, a
    verified expand-and-bisect pass takes over.

    stall_tol handles evaluations of f that are themselves noisy (adaptive
    quadrature underneath): when the residual stops improving but already
    sits below stall_tol, the current iterate is accepted.
    """
    if not (0 < slope_lo <= slope_hi):
        raise SolverError("slope bounds must satisfy 0 < slope_lo <= slope_hi")
    target = np.asarray(target, dtype=float)
    x = np.broadcast_to(np.asarray(x0, dtype=float), target.shape).astype(float).copy()
    fx = np.asarray(f(x), dtype=float) - target
    if np.all(np.abs(fx) <= tol):
        return x
    r = -fx
    pad = 1e-9 * (1.0 + np.abs(r) / slope_lo)
    a = x + np.minimum(r / slope_hi, r / slope_lo) - pad
    b = x + np.maximum(r / slope_hi, r / slope_lo) + pad
    best_err = np.inf
    no_improve = 0
    for _ in range(max_iter):
        above = fx > 0
        b = np.where(above, np.minimum(b, x), b)
        a = np.where(above, a, np.maximum(a, x))
        slope = np.asarray(df(x), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = x - fx / slope
        bad = ~np.isfinite(xn) | (xn <= a) | (xn >= b)
        x = np.where(bad, 0.5 * (a + b), xn)
        fx = np.asarray(f(x), dtype=float) - target
        err = float(np.max(np.abs(fx)))
        if err <= tol:
            return x
        if err < 0.5 * best_err:
            best_err = err
            no_improve = 0
        else:
            no_improve += 1
        if stall_tol is not None and no_improve >= 2 and err <= stall_tol:
            return x
    # slow path: the MVT bracket was wrong, so build a certain one
    fa = np.asarray(f(a), dtype=float) - target
    fb = np.asarray(f(b), dtype=float) - target
    grow = np.maximum(1.0, np.abs(r) / slope_lo)
    for _ in range(60):
        bad_a = fa > 0
        bad_b = fb < 0
        if not (bad_a.any() or bad_b.any()):
            break
        a = np.where(bad_a, a - grow, a)
        b = np.where(bad_b, b + grow, b)
        if bad_a.any():
            fa = np.asarray(f(a), dtype=float) - target
        if bad_b.any():
            fb = np.asarray(f(b), dtype=float) - target
        grow = grow * 2
    else:
        raise SolverError("failed to bracket the batched roots")
    x = 0.5 * (a + b)
    for _ in range(200):
        fx = np.asarray(f(x), dtype=float) - target
        if np.all(np.abs(fx) <= tol):
            return x
        above = fx > 0
        b = np.where(above, x, b)
        a = np.where(above, a, x)
        slope = np.asarray(df(x), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = x - fx / slope
        bad = ~np.isfinite(xn) | (xn <= a) | (xn >= b)
        x = np.where(bad, 0.5 * (a + b), xn)
    raise SolverError("batched root solve did not converge")
