"""Independent reference routes for the defect free energy.

Three families live here, all deliberately separate from the production
evaluator so that agreement between them is evidence rather than tautology:

* closed forms for the quadratic chain (finite length and the long-chain
  limit, with optional per-bond loads in the limit formula),
* a completing-the-squares recursion for the coarsened quadratic chain,
  exact for any coarsening factor,
* a brute-force nested-quadrature evaluation of the defining ratio of
  partition integrals, feasible for chains of at most four bonds.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
from scipy import optimize
from scipy.interpolate import CubicSpline

from .cauchy_born import global_curvature_min
from .coarse_grain import ChainSpec, _combined_first_bond
from .errors import ConfigError, NumericalError
from .quadrature import QuadratureConfig, RowsBudgetExceeded, _log_integral_exp_rows

__all__ = [
    "HarmonicParams",
    "harmonic_free_energy",
    "harmonic_limit_free_energy",
    "coarsening_coefficients",
    "coarsened_free_energy",
    "dense_free_energy",
]


@dataclasses.dataclass(frozen=True)
class HarmonicParams:
    """Quadratic chain: bond energy alpha*y^2, defect adds beta_def*y^2.

    The optional load summaries (first-bond load h1, total H of the
    remaining loads, total H_bar of their squares) only enter the
    long-chain limit formula; the finite-N closed form requires a
    load-free chain.
    """

    alpha: float
    beta_def: float
    A: float
    N: int
    h1: float = 0.0
    H: float = 0.0
    H_bar: float = 0.0

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("bond stiffness must be positive")
        if self.beta_def < 0:
            raise ValueError("defect stiffness must be nonnegative")
        if self.N < 2:
            raise ValueError("chain needs at least two bonds")

    @property
    def has_loads(self) -> bool:
        return self.h1 != 0.0 or self.H != 0.0 or self.H_bar != 0.0


def harmonic_free_energy(params: HarmonicParams) -> float:
    """Exact defect free energy of the load-free quadratic chain.

    Written as the long-chain limit plus the two O(1/N) corrections, so
    the difference to harmonic_limit_free_energy is computed without
    cancellation. beta_def = 0 gives exactly 0 for every N.
    """
    if params.has_loads:
        raise ValueError("finite-chain closed form covers the load-free chain only")
    a, b, A, N = params.alpha, params.beta_def, params.A, params.N
    s = a + b
    D = N * s - b
    limit = a * b * A * A / s + 0.5 * math.log(s / a)
    corr = a * b * b * A * A / (s * D) + 0.5 * math.log1p(-b / (N * s))
    return limit + corr


def harmonic_limit_free_energy(params: HarmonicParams) -> float:
    """Long-chain limit for the quadratic chain, loads allowed.

    The load contribution is exact: the first-bond load couples to the
    defect stiffness, the remaining loads enter only through their sum H
    and sum of squares H_bar.
    """
    a, b, A = params.alpha, params.beta_def, params.A
    s = a + b
    base = a * b * A * A / s + 0.5 * math.log(s / a)
    if not params.has_loads:
        return base
    h1 = params.h1
    loads = a * A * h1 / s - h1 * h1 / (4.0 * s) + A * params.H - params.H_bar / (4.0 * a)
    return base + loads


# -- coarsened quadratic chain -------------------------------------------


def coarsening_coefficients(m_nodes: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Completing-the-squares coefficients (c_i, d_i, f_i), i = 1..M-1.

    Integrating the coarse nodes out from the fixed end inward, the
    effective single-node potential carries a curvature coefficient c,
    a boundary coupling d and a boundary constant f, updated by

        c_{i} = 2 - 1/c_{i+1},  d_i = d_{i+1}/c_{i+1},
        f_i = f_{i+1} - d_{i+1}^2/c_{i+1},

    from the base case c_{M-1} = 2, d_{M-1} = f_{M-1} = 1. Returned
    arrays are indexed so coefficient i sits at slot i-1.
    """
    M = int(m_nodes)
    if M < 3:
        raise ValueError("need at least three coarse nodes")
    c = np.empty(M - 1)
    d = np.empty(M - 1)
    f = np.empty(M - 1)
    c[-1], d[-1], f[-1] = 2.0, 1.0, 1.0
    for i in range(M - 3, -1, -1):
        c[i] = 2.0 - 1.0 / c[i + 1]
        d[i] = d[i + 1] / c[i + 1]
        f[i] = f[i + 1] - d[i + 1] ** 2 / c[i + 1]
    return c, d, f


def coarsened_free_energy(m_nodes: int, factor: int, stiffness: float,
                          defect_stiffness: float, strain: float,
                          n_bonds: int | None = None) -> float:
    """Defect free energy of the quadratic chain coarsened in blocks.

    The chain of N = factor*(M-1) + 1 bonds keeps its first bond refined
    (that is where the defect sits) and lumps each remaining block of
    `factor` bonds into one coarse spring of stiffness stiffness/factor.
    Because every integral is Gaussian the block replacement is exact:
    the result is independent of the coarsening and equals the full-chain
    value. Only the first-node integral differs between the perturbed and
    unperturbed chain, so everything upstream of it cancels and the
    answer needs just the i = 1 coefficients.
    """
    M, p = int(m_nodes), int(factor)
    if p < 1:
        raise ValueError("coarsening factor must be at least 1")
    if stiffness <= 0:
        raise ValueError("stiffness must be positive")
    N = p * (M - 1) + 1
    if n_bonds is not None and n_bonds != N:
        raise ValueError(f"inconsistent geometry: {M} nodes at factor {p} "
                         f"make a chain of {N} bonds, not {n_bonds}")
    c, d, f = coarsening_coefficients(M)
    k = stiffness / p
    # total curvature at the first node: refined first bond (p springs act
    # as one of stiffness k*p) plus the coarse tail via c_1 = 1 + gamma_1
    q0 = k * (c[0] + p - 1)
    qP = q0 + defect_stiffness
    span = N * strain
    C0 = k * f[0] * span * span - (k * d[0] * span) ** 2 / q0
    CP = k * f[0] * span * span - (k * d[0] * span) ** 2 / qP
    return (CP - C0) + 0.5 * math.log(qP / q0)


# -- brute-force small chains --------------------------------------------


_DENSE_MAX_N = 4


def _bare_strains(spec: ChainSpec, with_defect: bool) -> np.ndarray:
    """Energy-minimizing strains under the total-length constraint.

    Used only to place quadrature centers; the truncation margin absorbs
    the (small, curvature-bounded) offset between the energy minimum and
    the actual mode of each conditional integral.
    """
    N, A = spec.N, spec.A
    h = np.zeros(N)
    if spec.forces is not None:
        h[:] = spec.forces.entries
    first = _combined_first_bond(spec) if with_defect else spec.psi

    def split(u):
        return np.diff(np.concatenate(([0.0], u, [N * A])))

    def energy(u):
        y = split(u)
        v = float(np.sum(spec.psi.value(y) + h * y))
        return v + float(first.value(y[0]) - spec.psi.value(y[0]))

    def grad(u):
        y = split(u)
        d = spec.psi.d1(y) + h
        d[0] += first.d1(y[0]) - spec.psi.d1(y[0])
        return d[:-1] - d[1:]

    u0 = A * np.arange(1, N)
    res = optimize.minimize(energy, u0, jac=grad, method="L-BFGS-B",
                            options={"gtol": 1e-12, "ftol": 1e-15})
    return split(res.x)


def _dense_rows_engine(bond, hk: float, tail, centers_of, kap: float,
                       cfg: QuadratureConfig, chunk: int = 8192,
                       budget: int = 1 << 22):
    """Batched evaluator for one peel level of the chain integral.

    Returns evaluate(s) = log integral exp(-bond(y) - hk*y + tail(s+y)) dy
    for an array of partial strains s. Three defenses keep the cost sane:
    a node budget that splits blocks so one stiff row cannot drag 8k
    neighbours to its resolution, and a relevance cut: rows whose peak
    sits >= 900 log-units under the block top never survive the
    consumer's exp (they underflow outright or enter with weight below
    e^-150), so their center value stands in for the integral.
    """
    def evaluate(s: np.ndarray) -> np.ndarray:
        def run(sblk: np.ndarray) -> np.ndarray:
            def g_rows(nodes: np.ndarray) -> np.ndarray:
                flat = (sblk[:, None] + nodes).ravel()
                return -bond.value(nodes) - hk * nodes + tail(flat).reshape(nodes.shape)

            centers = centers_of(sblk)
            if len(sblk) >= 64:
                v = g_rows(centers[:, None])[:, 0]
                live = v >= float(np.max(v)) - 900.0
                if not np.all(live):
                    out = np.empty(len(sblk))
                    out[~live] = v[~live]
                    out[live] = run(sblk[live])
                    return out
            try:
                return _log_integral_exp_rows(g_rows, centers, kap, cfg,
                                              n=32, max_nodes=budget)
            except RowsBudgetExceeded:
                mid = len(sblk) // 2
                return np.concatenate([run(sblk[:mid]), run(sblk[mid:])])

        return np.concatenate([run(s[lo:lo + chunk])
                               for lo in range(0, len(s), chunk)])

    return evaluate


def _tabulate_tail(evaluate, rng: tuple[float, float], target: float,
                   max_rounds: int = 9):
    """Spline table of one peel level, refined until certified accurate.

    Midpoint refinement with a Richardson acceptance: the coarse spline's
    error at the fresh midpoints overestimates the refined spline's error
    by ~16x (cubic order). Accuracy is only demanded where values are
    within 760 of the peak (deeper rows underflow upstream), but the
    refined region extends another 120 below that: stopping refinement
    exactly at the measured zone would park a coarse interval next to
    every measured boundary point and pin its error at the coarse rate.
    """
    lo, hi = rng
    xs = np.linspace(lo, hi, 257)
    vals = evaluate(xs)
    for _ in range(max_rounds):
        peak = float(np.max(vals))
        live = vals >= peak - 880.0
        ref = np.flatnonzero(live[:-1] | live[1:])
        mids = 0.5 * (xs[ref] + xs[ref + 1])
        mvals = evaluate(mids)
        sel = mvals >= peak - 760.0
        err = float(np.max(np.abs(CubicSpline(xs, vals)(mids[sel]) - mvals[sel]))) \
            if np.any(sel) else 0.0
        xs = np.insert(xs, ref + 1, mids)
        vals = np.insert(vals, ref + 1, mvals)
        if err <= 16.0 * target:
            spline = CubicSpline(xs, vals)

            def tail(q: np.ndarray) -> np.ndarray:
                q = np.asarray(q, dtype=float)
                if q.size and (q.min() < lo - 1e-9 or q.max() > hi + 1e-9):
                    raise NumericalError("tail table queried outside its range")
                return spline(q)

            return tail
    raise NumericalError("tail tabulation did not converge")


def dense_free_energy(spec: ChainSpec, quad: QuadratureConfig | None = None) -> float:
    """Perturbation free energy by direct nested quadrature, N <= 4 bonds.

    Evaluates the defining -log of the ratio of partition integrals with
    no model reduction at all, which makes it the arbiter for every other
    route at small N. The perturbation comprises the first-bond defect
    and the loads together: the reference integral is always the bare
    chain, matching the coarse-grained and sampled routes (without loads
    this is exactly the defect formation free energy).

    The chain is peeled one bond at a time: the value function of bonds
    k..N given the strain already used is built once as a spline table
    (bottom-up), so the levels above integrate against a cheap smooth
    function instead of re-running nested quadrature. Without loads the
    two partition integrals differ only in the first bond, so they share
    the tables and tabulation error cancels in the difference; with
    loads the perturbed side gets its own stack. Cost grows
    geometrically with N; refuse beyond 4.
    """
    if spec.N > _DENSE_MAX_N:
        raise ConfigError(f"dense route supports at most {_DENSE_MAX_N} bonds, got {spec.N}")
    if spec.forces is not None and spec.forces.kind != "explicit":
        raise ConfigError("dense route takes explicit load lists only")
    if spec.defect is None and spec.forces is None:
        return 0.0

    first = _combined_first_bond(spec)
    kt = global_curvature_min(spec.psi)
    kf = global_curvature_min(first)
    if not (kt > 0 and kf > 0):
        raise NumericalError("bond potentials must be uniformly convex")

    base = quad or QuadratureConfig()
    # each level integrates values carrying the level below's noise, so
    # its convergence threshold sits a geometric step above it
    top = max(base.rel_tol, 1e-10)
    cfgs = []
    for k in range(spec.N):
        rel = max(top * 0.04 ** k, 5e-14)
        cfgs.append(dataclasses.replace(base, rel_tol=rel, abs_tol=rel * 0.1))

    ystar = _bare_strains(spec, False)
    sstar = np.concatenate(([0.0], np.cumsum(ystar)))
    ystar_d = _bare_strains(spec, True)
    h0 = np.zeros(spec.N)

    if spec.forces is None:
        pair = _stack_log_z(spec, cfgs, h0, ystar, sstar,
                            [(spec.psi, kt, ystar[0]), (first, kf, ystar_d[0])])
        return float(pair[0] - pair[1])
    h = np.asarray(spec.forces.entries, dtype=float)
    log_plain = _stack_log_z(spec, cfgs, h0, ystar, sstar,
                             [(spec.psi, kt, ystar[0])])[0]
    log_pert = _stack_log_z(spec, cfgs, h, ystar, sstar,
                            [(first, kf, ystar_d[0])])[0]
    return float(log_plain - log_pert)


def _stack_log_z(spec: ChainSpec, cfgs: list[QuadratureConfig], h: np.ndarray,
                 ystar: np.ndarray, sstar: np.ndarray, outers) -> list[float]:
    """Integrate one tail-table stack for each (bond, curvature, center) outer.

    A single stack serves several outermost levels because the tails
    never see the first bond; callers pass one outer per partition
    integral that shares this stack's loads. Tail centers come from the
    bare strains; the loads shift the true modes by at most max|h| over
    the curvature floor, which the window margin absorbs.
    """
    N, A = spec.N, spec.A
    span = N * A
    kt = global_curvature_min(spec.psi)
    margin = float(np.max(np.abs(h))) / kt + 2.0 / math.sqrt(kt)

    def widened(cfg: QuadratureConfig, kap: float) -> QuadratureConfig:
        return dataclasses.replace(
            cfg, trunc_multiplier=cfg.trunc_multiplier + margin * math.sqrt(kap))

    # strain ranges each level can be queried on, outermost first; the
    # map s -> s + center(s) is affine increasing, so endpoints suffice
    base_trunc = cfgs[0].trunc_multiplier
    w_tail = base_trunc / math.sqrt(kt) + margin
    lo1 = min(c - (base_trunc / math.sqrt(kap) + margin) for _, kap, c in outers)
    hi1 = max(c + (base_trunc / math.sqrt(kap) + margin) for _, kap, c in outers)
    ranges = {2: (lo1 - 1.0, hi1 + 1.0)}
    for k in range(2, N - 1):
        n_rem = N - k + 1
        def fwd(s, k=k, n_rem=n_rem):
            return s + ystar[k - 1] + (sstar[k - 1] - s) / n_rem
        ranges[k + 1] = (fwd(ranges[k][0]) - w_tail - 1.0,
                         fwd(ranges[k][1]) + w_tail + 1.0)

    def terminal(s: np.ndarray) -> np.ndarray:
        y = span - s
        return -spec.psi.value(y) - h[-1] * y

    tail = terminal
    for k in range(N - 1, 1, -1):
        n_rem = N - k + 1

        def centers_of(sblk, k=k, n_rem=n_rem):
            return ystar[k - 1] + (sstar[k - 1] - sblk) / n_rem

        evaluate = _dense_rows_engine(spec.psi, h[k - 1], tail, centers_of,
                                      kt, widened(cfgs[k - 1], kt))
        target = 0.25 * (cfgs[k - 2].rel_tol + cfgs[k - 2].abs_tol)
        tail = _tabulate_tail(evaluate, ranges[k], target)

    zero = np.zeros(1)
    out = []
    for bond, kap, center in outers:
        ev = _dense_rows_engine(bond, h[0], tail,
                                lambda s, c=center: np.full(len(s), c),
                                kap, widened(cfgs[0], kap))
        out.append(float(ev(zero)[0]))
    return out
