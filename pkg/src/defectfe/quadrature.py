"""Adaptive log-domain quadrature for strictly log-concave integrands.

Every integral in this package has the form integral exp(g(y)) dy with g
strongly concave (second derivative <= -kappa_lo < 0). That structure fixes
the whole strategy: locate the maximizer, truncate where the integrand has
decayed below machine noise, and integrate the shifted exponential with
composite Gauss-Legendre panels, doubling the node count until two
consecutive refinements agree.

The truncation half-width is m/sqrt(kappa_lo); with the default m = 12 the
neglected tails are bounded by exp(-72) relative to the peak, far below the
requested tolerances.
"""

from __future__ import annotations

import dataclasses
from typing import Callable

import numpy as np
from scipy import optimize

from .errors import QuadratureError

__all__ = ["QuadratureConfig", "log_integral_exp", "weighted_mean"]


@dataclasses.dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    trunc_multiplier: float = 12.0
    max_subdivisions: int = 14

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.trunc_multiplier < 4:
            raise ValueError("truncation multiplier too small to be safe")
        if self.max_subdivisions < 2:
            raise ValueError("max_subdivisions must be >= 2")


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gl_nodes(n: int) -> tuple[np.ndarray, np.ndarray]:
    got = _GL_CACHE.get(n)
    if got is None:
        got = np.polynomial.legendre.leggauss(n)
        _GL_CACHE[n] = got
    return got


def _find_maximizer(g: Callable, kappa_lo: float, center_hint: float | None,
                    d1: Callable | None, d2: Callable | None) -> float:
    """Maximizer of a strongly concave g.

    With an analytic first derivative this is damped Newton (quadratic
    convergence, the concavity bound guards the step); otherwise bracket
    the peak by doubling steps away from the hint and polish with Brent.
    """
    x = 0.0 if center_hint is None else float(center_hint)
    if d1 is not None:
        for _ in range(200):
            slope = float(d1(x))
            curv = float(d2(x)) if d2 is not None else -kappa_lo
            if curv >= 0:
                curv = -kappa_lo
            step = -slope / curv
            # strong concavity bounds the distance to the maximizer
            cap = abs(slope) / kappa_lo
            if abs(step) > cap:
                step = np.sign(step) * cap
            x += step
            if abs(slope) <= 1e-13 * kappa_lo * (1.0 + abs(x)):
                return x
        if abs(float(d1(x))) <= 1e-9 * kappa_lo * (1.0 + abs(x)):
            return x
        raise QuadratureError("maximizer search did not converge")
    # derivative-free: expand a bracket [a, b] with g(mid) above both ends
    step = max(1.0, 1.0 / np.sqrt(kappa_lo))
    a, b = x - step, x + step
    ga, gx, gb = float(g(a)), float(g(x)), float(g(b))
    for _ in range(200):
        if gx >= ga and gx >= gb:
            break
        if ga > gx:
            a, x, gx = a - 2 * (x - a), a, ga
            ga = float(g(a))
        else:
            b, x, gx = b + 2 * (b - x), b, gb
            gb = float(g(b))
    else:
        raise QuadratureError("could not bracket the integrand peak")
    if gx > ga and gx > gb:
        res = optimize.minimize_scalar(lambda t: -float(g(t)), bracket=(a, x, b),
                                       method="brent", options={"xtol": 1e-12})
    else:
        # a tie at an endpoint (symmetric integrand) breaks Brent's strict
        # bracket requirement; a bounded search has no such condition
        res = optimize.minimize_scalar(lambda t: -float(g(t)), bounds=(a, b),
                                       method="bounded", options={"xatol": 1e-12})
    return float(res.x)


def _panel_log_sum(g: Callable, lo: float, hi: float, n: int, shift: float) -> float:
    """log of integral exp(g - shift) over [lo, hi] with n-point panels.

    The interval is split into ceil(n/32)-ish panels of 32 nodes each so
    the Gauss rule keeps its accuracy as n doubles.
    """
    per = 32
    panels = max(1, n // per)
    edges = np.linspace(lo, hi, panels + 1)
    x, w = _gl_nodes(per)
    mid = 0.5 * (edges[:-1] + edges[1:])[:, None]
    half = 0.5 * (edges[1:] - edges[:-1])[:, None]
    nodes = mid + half * x[None, :]
    vals = np.asarray(g(nodes.ravel()), dtype=float).reshape(nodes.shape)
    contrib = np.exp(vals - shift) * (half * w[None, :])
    total = float(np.sum(contrib))
    if total <= 0.0:
        return -np.inf
    return float(np.log(total))


def log_integral_exp(g: Callable, kappa_lo: float, *, center_hint: float | None = None,
                     cfg: QuadratureConfig | None = None,
                     d1: Callable | None = None, d2: Callable | None = None) -> float:
    """log of integral over R of exp(g(y)) dy for strongly concave g.

    Args:
        g: vectorized log-integrand.
        kappa_lo: certified lower bound on -g''; controls truncation.
        center_hint: starting point for the maximizer search.
        d1, d2: optional analytic derivatives of g (enables Newton search).

    Raises QuadratureError if the doubling sequence fails to produce two
    consecutive agreements within tolerance.
    """
    if kappa_lo <= 0:
        raise QuadratureError("kappa_lo must be positive (strong concavity required)")
    cfg = cfg or QuadratureConfig()
    ystar = _find_maximizer(g, kappa_lo, center_hint, d1, d2)
    half_width = cfg.trunc_multiplier / np.sqrt(kappa_lo)
    lo, hi = ystar - half_width, ystar + half_width
    shift = float(np.asarray(g(np.array([ystar])), dtype=float).ravel()[0])

    # local curvature can be much larger than kappa_lo (stiff peak inside a
    # wide window); keep enough nodes per peak width
    curv_loc = _local_curvature(g, ystar, kappa_lo, d2)
    n = 64
    floor = int(32 * max(1.0, np.sqrt(curv_loc / kappa_lo) / 4.0))
    while n < floor:
        n *= 2

    prev = None
    agreements = 0
    for _ in range(cfg.max_subdivisions):
        cur = _panel_log_sum(g, lo, hi, n, shift)
        if prev is not None and np.isfinite(cur):
            tol = cfg.rel_tol + cfg.abs_tol
            if abs(cur - prev) <= tol:
                agreements += 1
                if agreements >= 2 or abs(cur - prev) <= 0.01 * tol:
                    return cur + shift
            else:
                agreements = 0
        prev = cur
        n *= 2
    raise QuadratureError("quadrature did not converge within the subdivision budget")


def _local_curvature(g: Callable, ystar: float, kappa_lo: float, d2: Callable | None) -> float:
    if d2 is not None:
        c = -float(d2(ystar))
        return max(c, kappa_lo)
    eps = 1e-4 / np.sqrt(kappa_lo)
    pts = np.array([ystar - eps, ystar, ystar + eps])
    v = np.asarray(g(pts), dtype=float)
    c = -(v[0] - 2 * v[1] + v[2]) / (eps * eps)
    if not np.isfinite(c) or c <= 0:
        return kappa_lo
    return max(float(c), kappa_lo)


def weighted_mean(f: Callable, g: Callable, kappa_lo: float, *, center_hint: float | None = None,
                  cfg: QuadratureConfig | None = None,
                  d1: Callable | None = None, d2: Callable | None = None) -> float:
    """Mean of f under the probability density proportional to exp(g).

    Shares the interval and node layout of log_integral_exp so numerator
    and denominator see identical discretizations.
    """
    if kappa_lo <= 0:
        raise QuadratureError("kappa_lo must be positive (strong concavity required)")
    cfg = cfg or QuadratureConfig()
    ystar = _find_maximizer(g, kappa_lo, center_hint, d1, d2)
    half_width = cfg.trunc_multiplier / np.sqrt(kappa_lo)
    lo, hi = ystar - half_width, ystar + half_width
    shift = float(np.asarray(g(np.array([ystar])), dtype=float).ravel()[0])

    curv_loc = _local_curvature(g, ystar, kappa_lo, d2)
    n = 64
    floor = int(32 * max(1.0, np.sqrt(curv_loc / kappa_lo) / 4.0))
    while n < floor:
        n *= 2

    prev = None
    agreements = 0
    for _ in range(cfg.max_subdivisions):
        per = 32
        panels = max(1, n // per)
        edges = np.linspace(lo, hi, panels + 1)
        x, w = _gl_nodes(per)
        mid = 0.5 * (edges[:-1] + edges[1:])[:, None]
        half = 0.5 * (edges[1:] - edges[:-1])[:, None]
        nodes = (mid + half * x[None, :]).ravel()
        gv = np.asarray(g(nodes), dtype=float)
        fv = np.asarray(f(nodes), dtype=float)
        wts = (np.ones_like(mid) * (half * w[None, :])).ravel()
        dens = np.exp(gv - shift) * wts
        denom = float(np.sum(dens))
        if denom > 0:
            cur = float(np.sum(fv * dens) / denom)
            if prev is not None:
                tol = (cfg.rel_tol + cfg.abs_tol) * (1.0 + abs(cur))
                if abs(cur - prev) <= tol:
                    agreements += 1
                    if agreements >= 2 or abs(cur - prev) <= 0.01 * tol:
                        return cur
                else:
                    agreements = 0
            prev = cur
        n *= 2
    raise QuadratureError("weighted mean did not converge within the subdivision budget")


class RowsBudgetExceeded(Exception):
    """A batched integral wants more nodes than the caller's memory budget.

    Carries no recovery policy of its own: the caller decides whether to
    split the row block and retry or give up.
    """


def _log_integral_exp_rows(g_rows: Callable, centers: np.ndarray, kappa_lo: float,
                           cfg: QuadratureConfig | None = None,
                           n: int | None = None, max_nodes: int | None = None) -> np.ndarray:
    """Batched log-integrals with per-row centers.

    g_rows(nodes) takes a (B, n) matrix of evaluation points (row b holds
    the nodes of integral b) and returns the matching matrix of
    log-integrand values. centers must already be the per-row maximizers
    (or good approximations; the truncation margin absorbs slack).

    All rows share one node count, so a single stiff row drags the whole
    block along. When max_nodes is set, a multi-row block that would
    exceed it raises RowsBudgetExceeded instead of allocating; a single
    row is always allowed to refine to the subdivision limit.

    Internal: used by the tilted-statistics hot paths where hundreds of
    closely related integrals share one potential evaluation.
    """
    if kappa_lo <= 0:
        raise QuadratureError("kappa_lo must be positive (strong concavity required)")
    cfg = cfg or QuadratureConfig()
    centers = np.asarray(centers, dtype=float)
    half_width = cfg.trunc_multiplier / np.sqrt(kappa_lo)

    def attempt(m: int) -> np.ndarray:
        per = 32
        panels = max(1, m // per)
        x, w = _gl_nodes(per)
        # panel edges per row: centers[b] +- half_width
        offs = np.linspace(-half_width, half_width, panels + 1)
        mid = 0.5 * (offs[:-1] + offs[1:])
        half = 0.5 * (offs[1:] - offs[:-1])
        rel = (mid[:, None] + half[:, None] * x[None, :]).ravel()  # (panels*per,)
        nodes = centers[:, None] + rel[None, :]  # (B, K)
        vals = np.asarray(g_rows(nodes), dtype=float)
        shift = np.max(vals, axis=1, keepdims=True)
        wts = np.broadcast_to((half[:, None] * w[None, :]).ravel(), nodes.shape)
        total = np.sum(np.exp(vals - shift) * wts, axis=1)
        return np.log(total) + shift[:, 0]

    m = n or 64
    prev = None
    agreements = 0
    # a row whose log-integral has magnitude L cannot agree below ~ulp(L):
    # the integrand values themselves round at eps*L. Far-tail rows (huge
    # negative logs, zero weight upstream) would otherwise stall the block.
    ulp = 64.0 * np.finfo(float).eps
    for _ in range(cfg.max_subdivisions):
        if max_nodes is not None and len(centers) > 1 and len(centers) * m > max_nodes:
            raise RowsBudgetExceeded(m)
        cur = attempt(m)
        if prev is not None and np.all(np.isfinite(cur)):
            tol = cfg.rel_tol + cfg.abs_tol + ulp * np.abs(cur)
            gap = np.abs(cur - prev)
            if np.all(gap <= tol):
                agreements += 1
                if agreements >= 2 or np.all(gap <= 0.01 * tol):
                    return cur
            else:
                agreements = 0
        prev = cur
        m *= 2
    raise QuadratureError("batched quadrature did not converge")
