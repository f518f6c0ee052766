"""Coarse-grained chain energies and the two deterministic free-energy routes.

The defect sits on the first bond, so only the first atom is kept as an
explicit degree of freedom; every exterior bond is replaced by its
Cauchy-Born free energy density W. Relaxing the exterior at fixed first
atom gives an effective one-body potential, and the free-energy difference
collapses to a ratio of two one-dimensional integrals. The same structure
survives the thermodynamic limit, where the exterior relaxation becomes a
per-bond separable minimization.
"""

from __future__ import annotations

import dataclasses

import numpy as np
from numpy.polynomial import polynomial as npoly

from ._solvers import solve_increasing_batch
from .cauchy_born import CauchyBornEvaluator, global_curvature_min
from .errors import NumericalError
from .potentials import DefectSpec, ForceSequence, Potential, add_potentials
from .quadrature import QuadratureConfig, log_integral_exp

__all__ = [
    "ChainSpec",
    "RelaxationResult",
    "cg_exterior_energy",
    "relax_exterior",
    "limit_exterior_energy",
    "limit_tail_error_bound",
    "cg_free_energy",
    "limit_free_energy",
]


@dataclasses.dataclass(frozen=True)
class ChainSpec:
    """One finite chain: N bonds, boundary strain A, optional defect and loads.

    The chain has atoms u_0..u_N with u_0 = 0 and u_N = N*A pinned; the
    defect perturbs the first bond only and the loads act per bond. The
    inverse temperature is fixed at 1 (the model is stated at beta = 1;
    other temperatures amount to rescaling the potentials).
    """

    N: int
    A: float
    psi: Potential
    defect: DefectSpec | None = None
    forces: ForceSequence | None = None
    beta: float = 1.0

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("N must be >= 2")
        if self.beta != 1.0:
            raise ValueError("beta is fixed at 1")
        if self.forces is not None and self.forces.N != self.N:
            raise ValueError("force sequence length does not match N")

    @property
    def h1(self) -> float:
        return self.forces.h1 if self.forces is not None else 0.0


@dataclasses.dataclass(frozen=True)
class RelaxationResult:
    """Relaxed exterior at fixed first-atom position.

    multiplier is the common stress of the relaxed bonds (shifted per bond
    by its load); strains are the N-1 exterior bond lengths; residual is
    the defect in the total-length constraint.
    """

    multiplier: float
    strains: np.ndarray
    energy: float
    residual: float


_EV_CACHE: dict[tuple, CauchyBornEvaluator] = {}


def _evaluator(psi: Potential, quad: QuadratureConfig | None) -> CauchyBornEvaluator:
    cfg = quad or QuadratureConfig()
    key = (psi.coeffs, cfg.rel_tol, cfg.abs_tol, cfg.trunc_multiplier, cfg.max_subdivisions)
    ev = _EV_CACHE.get(key)
    if ev is None:
        ev = CauchyBornEvaluator(psi, cfg)
        _EV_CACHE[key] = ev
    return ev


def _exterior_loads(spec: ChainSpec) -> np.ndarray:
    """Loads on bonds 2..N of the finite chain (zeros when absent)."""
    if spec.forces is None:
        return np.zeros(spec.N - 1)
    return np.asarray(spec.forces.entries[1:], dtype=float)


def _has_exterior_loads(spec: ChainSpec) -> bool:
    if spec.forces is None:
        return False
    return bool(np.any(np.asarray(spec.forces.entries[1:]) != 0.0))


# -- finite-chain exterior relaxation ------------------------------------


def _warm_guess(warm: dict | None, key: str, xs: np.ndarray):
    if not warm or key not in warm:
        return None
    wx, wv = warm[key]
    if wx.size < 2:
        return None
    return np.interp(xs, wx, wv)


def _warm_store(warm: dict | None, key: str, xs: np.ndarray, vals: np.ndarray):
    if warm is None:
        return
    if key in warm and warm[key][0].size > xs.size:
        return  # keep the densest grid seen so far
    order = np.argsort(xs)
    warm[key] = (xs[order], vals[order])


def _lambda_batch(ev: CauchyBornEvaluator, spec: ChainSpec, ys: np.ndarray,
                  warm: dict | None = None) -> np.ndarray:
    """Common relaxed stress per first-atom position (vectorized over ys).

    Solves sum_i tilted_mean(lam - h_i) = N*A - y for each y; the left side
    is strictly increasing in lam with slope = sum of tilted variances.
    The warm dict carries (y, lam) pairs between calls on nearby node sets.
    """
    h = _exterior_loads(spec)
    ys = np.asarray(ys, dtype=float)
    target = spec.N * spec.A - ys
    x0 = _warm_guess(warm, "lam", ys)
    if x0 is None:
        x0 = npoly.polyval(target / (spec.N - 1), npoly.polyder(np.asarray(spec.psi.coeffs)))
    cache: dict[bytes, tuple] = {}

    def sums(lam):
        key = lam.tobytes()
        if key not in cache:
            cache.clear()
            tilts = lam[:, None] - h[None, :]
            _, mean, var = ev._stats_rows_chunked(tilts.ravel())
            mean = mean.reshape(tilts.shape)
            var = var.reshape(tilts.shape)
            cache[key] = (np.sum(mean, axis=1), np.sum(var, axis=1))
        return cache[key]

    v0 = sums(np.asarray(x0, dtype=float))[1]
    slope_lo = 0.25 * float(np.min(v0))
    slope_hi = 4.0 * float(np.max(v0))
    # the mean sums carry quadrature noise of roughly N times the per-bond
    # tolerance, so convergence is declared within the residual contract
    tol = 1e-10 * (1.0 + spec.N * abs(spec.A))
    lam = solve_increasing_batch(lambda l: sums(l)[0], target, x0,
                                 slope_lo=slope_lo, slope_hi=slope_hi,
                                 df=lambda l: sums(l)[1], tol=tol,
                                 stall_tol=1e-9 * (1.0 + spec.N * abs(spec.A)))
    _warm_store(warm, "lam", ys, lam)
    return lam


def _exterior_energy_batch(ev: CauchyBornEvaluator, spec: ChainSpec, ys: np.ndarray,
                           with_derivs: bool = False, warm: dict | None = None):
    """Relaxed exterior energy over a vector of first-atom positions.

    Zero-load path: all exterior bonds share the strain A + (A-y)/(N-1)
    and the energy is (N-1) * [W(shared) - W(A)]. Load path: energy from
    the relaxed common stress, lam*(N*A-y) - sum_i log_partition(lam-h_i)
    minus the same (N-1)*W(A) reference. By the envelope theorem the
    y-derivative is minus the relaxed stress in both cases.
    """
    ys = np.asarray(ys, dtype=float)
    n1 = spec.N - 1
    w_ref = ev.strain_energy(spec.A).value
    if not _has_exterior_loads(spec):
        z = spec.A + (spec.A - ys) / n1
        wv, ws, wk = ev.strain_energy_batch(z, tilt_guess=_warm_guess(warm, "tilt", z))
        _warm_store(warm, "tilt", z, ws)
        energy = n1 * (wv - w_ref)
        if not with_derivs:
            return energy
        return energy, -ws, wk / n1
    h = _exterior_loads(spec)
    lam = _lambda_batch(ev, spec, ys, warm=warm)
    tilts = lam[:, None] - h[None, :]
    logz, _, var = ev._stats_rows_chunked(tilts.ravel())
    logz = logz.reshape(tilts.shape)
    var = var.reshape(tilts.shape)
    energy = lam * (spec.N * spec.A - ys) - np.sum(logz, axis=1) - n1 * w_ref
    if not with_derivs:
        return energy
    return energy, -lam, 1.0 / np.sum(var, axis=1)


def cg_exterior_energy(spec: ChainSpec, y: float, quad: QuadratureConfig | None = None) -> float:
    """Relaxed coarse-grained energy of bonds 2..N at first-atom position y,
    measured against the homogeneous chain (N-1 bonds at strain A)."""
    ev = _evaluator(spec.psi, quad)
    return float(_exterior_energy_batch(ev, spec, np.array([float(y)]))[0])


def relax_exterior(spec: ChainSpec, y: float, quad: QuadratureConfig | None = None) -> RelaxationResult:
    """Full relaxation record: common stress, bond strains, energy, residual."""
    ev = _evaluator(spec.psi, quad)
    ys = np.array([float(y)])
    h = _exterior_loads(spec)
    if _has_exterior_loads(spec):
        lam = float(_lambda_batch(ev, spec, ys)[0])
        tilts = lam - h
        _, mean, _ = ev._stats_rows_chunked(tilts)
        strains = mean
    else:
        z = spec.A + (spec.A - float(y)) / (spec.N - 1)
        lam = ev.strain_energy(z).stress
        strains = np.full(spec.N - 1, ev.tilted_stats(lam).mean)
    energy = float(_exterior_energy_batch(ev, spec, ys)[0])
    residual = abs(spec.N * spec.A - float(y) - float(np.sum(strains)))
    bound = 1e-9 * (1.0 + spec.N * abs(spec.A))
    if residual > bound:
        raise NumericalError(f"relaxation residual {residual:.3e} exceeds {bound:.3e}")
    return RelaxationResult(multiplier=lam, strains=strains, energy=energy, residual=residual)


# -- thermodynamic-limit exterior ----------------------------------------


def _limit_constant(spec: ChainSpec, ev: CauchyBornEvaluator, n_exact: int) -> float:
    """y-independent part of the limit exterior energy.

    Per-bond relaxation against the limiting load sequence: bond i
    contributes A*h_i - [log_partition(s0 - h_i) - log_partition(s0)] with
    s0 the homogeneous stress; the first n_exact bonds (i = 2..n_exact+1)
    are evaluated exactly, the rest through the quadratic tail
    -h_i^2 / (2 * stiffness(A)) plus linear term, using closed-form tail
    sums of the load sequence.
    """
    if spec.forces is None:
        return 0.0
    f = spec.forces
    s0 = ev.solve_tilt(spec.A)
    w2 = ev.strain_energy(spec.A).stiffness
    k = n_exact + 1
    head = f.limit_entries(k)[1:]  # h_2 .. h_k of the limiting sequence
    total = 0.0
    if head.size:
        logz, _, _ = ev._stats_rows_chunked(s0 - head)
        logz0 = ev.log_partition(s0)
        total += float(np.sum(-(logz - logz0)))
    total += spec.A * f.tail_sum_H(k) - f.tail_sum_H2(k) / (2.0 * w2)
    return total


def limit_exterior_energy(spec: ChainSpec, y, n_exact: int = 4,
                          quad: QuadratureConfig | None = None,
                          tail_budget: float | None = None):
    """Limit of the relaxed exterior energy as the chain grows.

    Accepts scalar or array y (the dependence on y is exactly linear with
    slope -stress(A)). n_exact controls how many leading bonds of the load
    sequence are relaxed exactly; pass tail_budget to fail loudly when the
    quadratic-tail error bound exceeds it.
    """
    if n_exact < 0:
        raise ValueError("n_exact must be >= 0")
    ev = _evaluator(spec.psi, quad)
    s0 = ev.solve_tilt(spec.A)
    const = _limit_constant(spec, ev, n_exact)
    if tail_budget is not None:
        bound = limit_tail_error_bound(spec, n_exact, quad)
        if bound > tail_budget:
            raise NumericalError(
                f"limit tail error bound {bound:.3e} exceeds budget {tail_budget:.3e}; "
                "raise n_exact")
    y_arr = np.asarray(y, dtype=float)
    out = s0 * (spec.A - y_arr) + const
    return float(out) if np.isscalar(y) or y_arr.ndim == 0 else out


def limit_tail_error_bound(spec: ChainSpec, n_exact: int = 4,
                           quad: QuadratureConfig | None = None) -> float:
    """Upper estimate of the quadratic-tail truncation error.

    Third-order Taylor remainder: sum over tail bonds of |h_i|^3 times a
    local bound on the third derivative of the log-partition (estimated
    from the variance slope around the homogeneous stress).
    """
    if spec.forces is None:
        return 0.0
    f = spec.forces
    ev = _evaluator(spec.psi, quad)
    s0 = ev.solve_tilt(spec.A)
    k = n_exact + 1
    h_next = abs(f.limit_entry(k + 1))
    delta = max(h_next, 1e-4)
    _, _, var = ev._stats_rows_chunked(np.array([s0 - delta, s0, s0 + delta]))
    third = max(abs(var[2] - var[0]) / (2 * delta), abs(var[2] - var[1]) / delta,
                abs(var[1] - var[0]) / delta)
    c3 = 1.5 * max(third, 1e-12)
    return c3 / 6.0 * f.tail_sum_H3_abs(k)


# -- free-energy routes --------------------------------------------------


def _combined_first_bond(spec: ChainSpec) -> Potential:
    if spec.defect is None:
        return spec.psi
    return add_potentials(spec.psi, spec.defect.perturbation)


def _first_bond_curvature(spec: ChainSpec) -> float:
    kc = global_curvature_min(_combined_first_bond(spec))
    if not (kc > 0):
        raise ValueError("first-bond potential must be uniformly convex")
    return kc


def _numerator_hint(spec: ChainSpec, ev: CauchyBornEvaluator, h1: float) -> float:
    """Mode estimate for the defect-bond integral: the tilted mean of the
    perturbed bond at the homogeneous stress shifted by the first load."""
    s0 = ev.solve_tilt(spec.A)
    comb = _combined_first_bond(spec)
    kc = _first_bond_curvature(spec)
    _, mean, _ = ev._stats_rows(np.array([s0 - h1]), coeffs=np.asarray(comb.coeffs), kappa=kc)
    return float(mean[0])


def cg_free_energy(spec: ChainSpec, quad: QuadratureConfig | None = None) -> float:
    """Coarse-grained defect-formation free energy of the finite chain.

    Ratio of two one-dimensional integrals over the first-atom position:
    the numerator carries the perturbed first bond, its load, and the
    relaxed exterior with loads; the denominator is the same chain with no
    defect and no loads.
    """
    cfg = quad or QuadratureConfig()
    ev = _evaluator(spec.psi, cfg)
    h1 = spec.h1
    comb = _combined_first_bond(spec)
    ccomb = np.asarray(comb.coeffs)
    kc = _first_bond_curvature(spec)
    cpsi = np.asarray(spec.psi.coeffs)
    plain = ChainSpec(N=spec.N, A=spec.A, psi=spec.psi)
    warm_num: dict = {}
    warm_den: dict = {}
    # the exterior energy inherits per-bond quadrature noise, so the outer
    # integrals cannot resolve much below N times the per-bond tolerance
    outer_cfg = dataclasses.replace(cfg, rel_tol=max(cfg.rel_tol, 4e-12 * (spec.N - 1)))

    def g_num(y):
        e = _exterior_energy_batch(ev, spec, y, warm=warm_num)
        return -npoly.polyval(y, ccomb) - h1 * y - e

    def g_num_d1(y):
        ya = np.atleast_1d(np.asarray(y, dtype=float))
        _, de, _ = _exterior_energy_batch(ev, spec, ya, with_derivs=True, warm=warm_num)
        return float(-npoly.polyval(ya, npoly.polyder(ccomb))[0] - h1 - de[0])

    def g_num_d2(y):
        ya = np.atleast_1d(np.asarray(y, dtype=float))
        _, _, d2e = _exterior_energy_batch(ev, spec, ya, with_derivs=True, warm=warm_num)
        return float(-npoly.polyval(ya, npoly.polyder(ccomb, 2))[0] - d2e[0])

    def g_den(y):
        return -npoly.polyval(y, cpsi) - _exterior_energy_batch(ev, plain, y, warm=warm_den)

    def g_den_d1(y):
        ya = np.atleast_1d(np.asarray(y, dtype=float))
        _, de, _ = _exterior_energy_batch(ev, plain, ya, with_derivs=True, warm=warm_den)
        return float(-npoly.polyval(ya, npoly.polyder(cpsi))[0] - de[0])

    def g_den_d2(y):
        ya = np.atleast_1d(np.asarray(y, dtype=float))
        _, _, d2e = _exterior_energy_batch(ev, plain, ya, with_derivs=True, warm=warm_den)
        return float(-npoly.polyval(ya, npoly.polyder(cpsi, 2))[0] - d2e[0])

    log_num = log_integral_exp(g_num, kc, center_hint=_numerator_hint(spec, ev, h1),
                               cfg=outer_cfg, d1=g_num_d1, d2=g_num_d2)
    log_den = log_integral_exp(g_den, ev.curvature_min, center_hint=spec.A,
                               cfg=outer_cfg, d1=g_den_d1, d2=g_den_d2)
    return log_den - log_num


def limit_free_energy(spec: ChainSpec, n_exact: int = 4,
                      quad: QuadratureConfig | None = None) -> float:
    """Thermodynamic-limit defect-formation free energy.

    Same two-integral structure as the finite route with the exterior
    replaced by its limit: numerator exponent
    -(psi+P)(y) - h1*y - limit_exterior_energy(y), denominator exponent
    -psi(y) - stress(A)*(A-y). The first-bond load h1 is taken from the
    limiting sequence.
    """
    cfg = quad or QuadratureConfig()
    ev = _evaluator(spec.psi, cfg)
    h1 = spec.forces.h1_limit if spec.forces is not None else 0.0
    comb = _combined_first_bond(spec)
    ccomb = np.asarray(comb.coeffs)
    kc = _first_bond_curvature(spec)
    cpsi = np.asarray(spec.psi.coeffs)
    s0 = ev.solve_tilt(spec.A)
    const = _limit_constant(spec, ev, n_exact)

    def g_num(y):
        return (-npoly.polyval(y, ccomb) - h1 * y
                - (s0 * (spec.A - y) + const))

    def g_num_d1(y):
        return float(-npoly.polyval(y, npoly.polyder(ccomb)) - h1 + s0)

    def g_num_d2(y):
        return float(-npoly.polyval(y, npoly.polyder(ccomb, 2)))

    def g_den(y):
        return -npoly.polyval(y, cpsi) - s0 * (spec.A - y)

    def g_den_d1(y):
        return float(-npoly.polyval(y, npoly.polyder(cpsi)) + s0)

    def g_den_d2(y):
        return float(-npoly.polyval(y, npoly.polyder(cpsi, 2)))

    log_num = log_integral_exp(g_num, kc, center_hint=_numerator_hint(spec, ev, h1),
                               cfg=cfg, d1=g_num_d1, d2=g_num_d2)
    log_den = log_integral_exp(g_den, ev.curvature_min, center_hint=spec.A,
                               cfg=cfg, d1=g_den_d1, d2=g_den_d2)
    return log_den - log_num
