"""Per-bond free energy of the homogeneous chain and its Legendre pair.

For a bond potential psi the tilted partition function

    log_partition(t) = log integral exp(-psi(y) + t*y) dy

is smooth and strictly convex; its derivative (the tilted mean) maps the
tilt to the average strain, and the strain energy density is the Legendre
transform

    strain_energy(A) = sup_t { t*A - log_partition(t) }.

The supremum is attained at the tilt whose tilted mean equals A, so the
pair (strain_energy, log_partition) is a classical convex-dual pair:
strain_energy'(A) is the stress, strain_energy''(A) the stiffness, equal
to the reciprocal tilted variance.
"""

from __future__ import annotations

import dataclasses
from typing import NamedTuple

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.interpolate import CubicSpline

from ._solvers import solve_increasing_batch
from .errors import QuadratureError
from .potentials import Potential, add_potentials
from .quadrature import QuadratureConfig, _gl_nodes

__all__ = ["CauchyBornEvaluator", "TiltedStats", "StrainEnergy", "TabulatedStrainEnergy"]


class TiltedStats(NamedTuple):
    log_partition: float
    mean: float
    variance: float


class StrainEnergy(NamedTuple):
    value: float
    stress: float
    stiffness: float


def global_curvature_min(p: Potential) -> float:
    """Infimum of p'' over the whole line; -inf when unbounded below.

    The second derivative of a polynomial kind is a polynomial; its global
    minimum exists only for even degree with positive leading coefficient
    (or a constant), and is then attained at a critical point.
    """
    d2c = np.asarray(npoly.polyder(np.asarray(p.coeffs), 2))
    # trim trailing zeros to read the true degree
    nz = np.nonzero(d2c)[0]
    if len(nz) == 0:
        return 0.0
    d2c = d2c[: nz[-1] + 1]
    if len(d2c) == 1:
        return float(d2c[0])
    deg = len(d2c) - 1
    if deg % 2 == 1 or d2c[-1] < 0:
        return -np.inf
    crit = npoly.polyroots(npoly.polyder(d2c))
    vals = [npoly.polyval(float(r.real), d2c) for r in crit if abs(r.imag) < 1e-10]
    return float(min(vals)) if vals else float(d2c[0])


class CauchyBornEvaluator:
    """Tilted-measure statistics and strain energy for one bond potential.

    The potential must be uniformly convex on the whole line (global
    curvature bounded below by a positive constant); that makes every
    tilted integrand strongly log-concave and the dual pair well defined
    for all tilts and strains.
    """

    def __init__(self, psi: Potential, quad: QuadratureConfig | None = None):
        self.psi = psi
        self.quad = quad or QuadratureConfig()
        self.curvature_min = global_curvature_min(psi)
        if not (self.curvature_min > 0):
            raise ValueError("potential must be uniformly convex on the line")
        self._coeffs = np.asarray(psi.coeffs)
        self._d1c = npoly.polyder(self._coeffs)
        self._d2c = npoly.polyder(self._coeffs, 2)
        self._peak_tables: dict[bytes, tuple[np.ndarray, np.ndarray]] = {}

    # -- tilted statistics ------------------------------------------------

    def _peak_x0(self, tilts: np.ndarray, c1: np.ndarray) -> np.ndarray:
        """Warm start for the mode solve: inverse of psi' from a monotone table."""
        key = np.asarray(c1).tobytes()
        tab = self._peak_tables.get(key)
        if tab is None:
            grid = np.linspace(-48.0, 48.0, 4097)
            tab = (npoly.polyval(grid, c1), grid)
            self._peak_tables[key] = tab
        return np.interp(tilts, tab[0], tab[1])

    def _peak_batch(self, tilts: np.ndarray, coeffs=None, kappa: float | None = None) -> np.ndarray:
        """Solve psi'(y) = t per row (the tilted-density mode)."""
        c1 = npoly.polyder(coeffs if coeffs is not None else self._coeffs)
        c2 = npoly.polyder(c1)
        k = kappa if kappa is not None else self.curvature_min
        return solve_increasing_batch(
            lambda y: npoly.polyval(y, c1), tilts, self._peak_x0(tilts, c1),
            slope_lo=k, slope_hi=np.inf,
            df=lambda y: npoly.polyval(y, c2),
            tol=1e-12 * (1.0 + np.max(np.abs(tilts))))

    def _stats_rows(self, tilts: np.ndarray, coeffs=None, kappa: float | None = None):
        """(log_partition, mean, variance) per row of tilts, shared nodes.

        One node layout per refinement level serves every row: the rows
        differ only by a per-row center shift, so the potential values on
        the whole matrix come from a single vectorized polyval.
        """
        tilts = np.asarray(tilts, dtype=float)
        c = coeffs if coeffs is not None else self._coeffs
        k = kappa if kappa is not None else self.curvature_min
        centers = self._peak_batch(tilts, coeffs=c, kappa=k)
        half_width = self.quad.trunc_multiplier / np.sqrt(k)
        d2c = npoly.polyder(c, 2)
        curv_loc = float(np.max(npoly.polyval(centers, d2c)))
        n = 32
        floor = int(32 * max(1.0, np.sqrt(max(curv_loc, k) / k) / 4.0))
        while n < floor:
            n *= 2

        prev = None
        agreements = 0
        for _ in range(self.quad.max_subdivisions):
            per = 32
            panels = max(1, n // per)
            x, w = _gl_nodes(per)
            offs = np.linspace(-half_width, half_width, panels + 1)
            mid = 0.5 * (offs[:-1] + offs[1:])
            half = 0.5 * (offs[1:] - offs[:-1])
            rel = (mid[:, None] + half[:, None] * x[None, :]).ravel()
            wts = (np.broadcast_to(half[:, None] * w[None, :], (panels, per))).ravel()
            nodes = centers[:, None] + rel[None, :]
            gv = -npoly.polyval(nodes, c) + tilts[:, None] * nodes
            shift = np.max(gv, axis=1, keepdims=True)
            dens = np.exp(gv - shift) * wts[None, :]
            z = np.sum(dens, axis=1)
            logz = np.log(z) + shift[:, 0]
            # centered coordinates avoid cancellation in the variance
            m_rel = np.sum(rel[None, :] * dens, axis=1) / z
            var = np.sum((rel[None, :] - m_rel[:, None]) ** 2 * dens, axis=1) / z
            mean = centers + m_rel
            cur = (logz, mean, var)
            if prev is not None and np.all(np.isfinite(logz)):
                tol = self.quad.rel_tol + self.quad.abs_tol
                d = max(float(np.max(np.abs(logz - prev[0]))),
                        float(np.max(np.abs(mean - prev[1]))) / (1.0 + float(np.max(np.abs(mean)))),
                        float(np.max(np.abs(var - prev[2]))) / (1.0 + float(np.max(var))))
                # a refinement that changes nothing at 1% of tolerance is
                # already far inside the geometric-convergence regime
                if d <= tol:
                    agreements += 1
                    if agreements >= 2 or d <= 0.01 * tol:
                        return cur
                else:
                    agreements = 0
            prev = cur
            n *= 2
        raise QuadratureError("tilted statistics did not converge")

    def _stats_rows_chunked(self, tilts: np.ndarray, coeffs=None, kappa: float | None = None,
                            chunk: int = 8192):
        """Row-chunked _stats_rows; bounds peak memory for very wide batches."""
        tilts = np.asarray(tilts, dtype=float)
        if tilts.size <= chunk:
            return self._stats_rows(tilts, coeffs=coeffs, kappa=kappa)
        parts = [self._stats_rows(tilts[i:i + chunk], coeffs=coeffs, kappa=kappa)
                 for i in range(0, tilts.size, chunk)]
        return tuple(np.concatenate([p[j] for p in parts]) for j in range(3))

    def tilted_stats(self, tilt: float) -> TiltedStats:
        """Log-partition, mean, and variance of the tilted bond measure."""
        logz, mean, var = self._stats_rows(np.array([float(tilt)]))
        return TiltedStats(float(logz[0]), float(mean[0]), float(var[0]))

    def tilted_stats_batch(self, tilts) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self._stats_rows(np.asarray(tilts, dtype=float))

    def log_partition(self, tilt: float) -> float:
        return self.tilted_stats(tilt).log_partition

    def tilted_mean(self, tilt: float) -> float:
        return self.tilted_stats(tilt).mean

    # -- dual pair --------------------------------------------------------

    def solve_tilt(self, strain: float) -> float:
        """Tilt whose tilted mean equals the strain, to 1e-10*(1+|strain|).

        Newton on the tilted mean (derivative = tilted variance > 0) from
        the zero-temperature guess psi'(strain), with a sign-change bracket
        and bisection fallback.
        """
        return float(self.solve_tilt_batch(np.array([float(strain)]))[0])

    def solve_tilt_batch(self, strains, x0=None) -> np.ndarray:
        strains = np.asarray(strains, dtype=float)
        tol = 1e-10 * (1.0 + float(np.max(np.abs(strains))))
        if x0 is None:
            x0 = npoly.polyval(strains, self._d1c)
        cache: dict[bytes, tuple] = {}

        def stats(t):
            key = t.tobytes()
            if key not in cache:
                cache.clear()
                cache[key] = self._stats_rows(t)
            return cache[key]

        var0 = stats(np.asarray(x0, dtype=float))[2]
        slope_lo = 0.25 * float(np.min(var0))
        slope_hi = 4.0 * float(np.max(var0))
        return solve_increasing_batch(
            lambda t: stats(t)[1], strains, x0,
            slope_lo=slope_lo, slope_hi=slope_hi,
            df=lambda t: stats(t)[2], tol=tol, stall_tol=10.0 * tol)

    def strain_energy(self, strain: float) -> StrainEnergy:
        """(value, stress, stiffness) of the per-bond free energy density."""
        v, s, k = self.strain_energy_batch(np.array([float(strain)]))
        return StrainEnergy(float(v[0]), float(s[0]), float(k[0]))

    def strain_energy_batch(self, strains, tilt_guess=None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        strains = np.asarray(strains, dtype=float)
        tilts = self.solve_tilt_batch(strains, x0=tilt_guess)
        logz, _, var = self._stats_rows(tilts)
        value = tilts * strains - logz
        return value, tilts, 1.0 / var

    # -- defect gap -------------------------------------------------------

    def defect_mean_gap(self, tilt: float, perturbation: Potential) -> float:
        """Tilted-mean shift caused by adding a perturbation to the bond.

        Mean under exp(-(psi+P)(y)+t*y) minus mean under exp(-psi(y)+t*y);
        the perturbed potential must itself be uniformly convex.
        """
        combined = add_potentials(self.psi, perturbation)
        kc = global_curvature_min(combined)
        if not (kc > 0):
            raise ValueError("perturbed potential must be uniformly convex on the line")
        cc = np.asarray(combined.coeffs)
        t = np.array([float(tilt)])
        _, mean_p, _ = self._stats_rows(t, coeffs=cc, kappa=kc)
        _, mean, _ = self._stats_rows(t)
        return float(mean_p[0] - mean[0])

    # -- tabulation -------------------------------------------------------

    def tabulate(self, lo: float, hi: float, n: int) -> "TabulatedStrainEnergy":
        """Cubic-spline table of (value, stress, stiffness) on [lo, hi].

        Each component gets its own not-a-knot spline through exact nodal
        values; n >= 8 nodes are required for the end conditions to settle.
        """
        if n < 8:
            raise ValueError("tabulation needs at least 8 nodes")
        if not (hi > lo):
            raise ValueError("empty tabulation range")
        grid = np.linspace(lo, hi, n)
        value, stress, stiffness = self.strain_energy_batch(grid)
        return TabulatedStrainEnergy(
            grid=grid,
            _value=CubicSpline(grid, value, bc_type="not-a-knot"),
            _stress=CubicSpline(grid, stress, bc_type="not-a-knot"),
            _stiffness=CubicSpline(grid, stiffness, bc_type="not-a-knot"))

    def export_table_csv(self, path, lo: float, hi: float, n: int) -> None:
        """Write a strain-energy table as CSV with 17 significant digits."""
        grid = np.linspace(lo, hi, n)
        value, stress, stiffness = self.strain_energy_batch(grid)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("A,W,W1,W2\n")
            for a, v, s, k in zip(grid, value, stress, stiffness):
                fh.write(f"{a:.17g},{v:.17g},{s:.17g},{k:.17g}\n")


@dataclasses.dataclass(frozen=True)
class TabulatedStrainEnergy:
    """Spline-backed strain energy; same call surface as the exact one."""

    grid: np.ndarray
    _value: CubicSpline
    _stress: CubicSpline
    _stiffness: CubicSpline

    def strain_energy(self, strain: float) -> StrainEnergy:
        return StrainEnergy(float(self._value(strain)), float(self._stress(strain)),
                            float(self._stiffness(strain)))

    def strain_energy_batch(self, strains):
        strains = np.asarray(strains, dtype=float)
        return self._value(strains), self._stress(strains), self._stiffness(strains)
