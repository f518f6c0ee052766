"""Bond potentials, defect perturbations, and external load sequences.

The chain model is assembled from three ingredients: a convex bond
potential psi with certified second-derivative bounds, an optional defect
perturbation P acting on the first bond only, and an optional summable
sequence of per-bond loads h_i. Everything here is immutable and pure.
"""

from __future__ import annotations

import dataclasses
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy import optimize, special

__all__ = [
    "Potential",
    "DefectSpec",
    "ForceSequence",
    "AssumptionReport",
    "make_potential",
    "add_potentials",
    "check_assumptions",
    "build_force_sequence",
]

# Partial-sum horizon for power-law tail sums; the integral remainder
# beyond this index is ~1e-19 for p >= 3.
_TAIL_HORIZON = 10**6


@dataclasses.dataclass(frozen=True)
class Potential:
    """A bond potential with exact value/first/second derivatives.

    All built-in kinds are polynomials in the bond strain; ``coeffs`` holds
    the canonical low-to-high coefficient list so sums of potentials and
    curvature extrema stay exact.

    kind: "harmonic" (alpha*y^2), "quartic-paper" ((y-1)^4/2 + y^2/2),
    or "polynomial" (explicit coefficients).
    window: interval on which the curvature bounds are certified; None
    means the bounds are global (constant or globally minimized curvature).
    """

    kind: str
    params: tuple[float, ...]
    coeffs: tuple[float, ...]
    window: tuple[float, float] | None = None

    def eval(self, y):
        """Return (value, d1, d2) at y; vectorized over arrays."""
        c = np.asarray(self.coeffs)
        v = npoly.polyval(y, c)
        d1 = npoly.polyval(y, npoly.polyder(c))
        d2 = npoly.polyval(y, npoly.polyder(c, 2))
        return v, d1, d2

    def value(self, y):
        return npoly.polyval(y, np.asarray(self.coeffs))

    def d1(self, y):
        return npoly.polyval(y, npoly.polyder(np.asarray(self.coeffs)))

    def d2(self, y):
        return npoly.polyval(y, npoly.polyder(np.asarray(self.coeffs), 2))

    def curvature_bounds(self, lo: float | None = None, hi: float | None = None) -> tuple[float, float]:
        """Exact (min, max) of the second derivative on [lo, hi].

        Defaults to the declared window. The second derivative of a
        polynomial kind is itself a polynomial, so the extrema come from
        the real roots of its derivative plus the endpoints; for an
        unbounded interval only kinds with globally bounded-below curvature
        and even leading term are meaningful (harmonic: constant).
        """
        if lo is None or hi is None:
            if self.window is not None:
                lo, hi = self.window
            elif self.kind == "harmonic":
                a = 2.0 * self.params[0]
                return a, a
            else:
                raise ValueError("curvature_bounds needs an interval for non-constant curvature")
        if not (hi > lo):
            raise ValueError("empty curvature window")
        d2c = npoly.polyder(np.asarray(self.coeffs), 2)
        candidates = [lo, hi]
        d3c = npoly.polyder(d2c)
        if len(d3c) > 1 or d3c[0] != 0.0:
            roots = npoly.polyroots(d3c)
            for r in roots:
                if abs(r.imag) < 1e-12 and lo < r.real < hi:
                    candidates.append(float(r.real))
        vals = npoly.polyval(np.asarray(candidates), d2c)
        return float(np.min(vals)), float(np.max(vals))


@dataclasses.dataclass(frozen=True)
class DefectSpec:
    """A perturbation applied to the first bond only: P(u_1 - u_0), u_0 = 0."""

    perturbation: Potential


@dataclasses.dataclass(frozen=True)
class AssumptionReport:
    kappa1: float
    kappa2: float
    varsigma1: float
    varsigma2: float
    passed: bool
    window: tuple[float, float]


@dataclasses.dataclass(frozen=True)
class ForceSequence:
    """Per-bond loads h_i with the tail sums of the limiting sequence.

    entries holds h_1..h_N for the chain at hand. For the power-law kind
    the finite-chain entry is h_i = -sum_{j=i}^{N-1} j^{-p} while the
    limiting sequence has h_i = -sum_{j=i}^{inf} j^{-p}; H and H_bar are
    the limiting tail sums over i >= 2 (exact for explicit lists, partial
    sum to 10^6 plus an integral remainder bound for the power law).
    """

    kind: str  # "explicit" | "power-law"
    entries: tuple[float, ...]
    N: int
    H: float
    H_bar: float
    H_bar_remainder: float
    p: float | None = None
    node_forces: tuple[float, ...] | None = None

    @property
    def h1(self) -> float:
        return self.entries[0]

    @property
    def h1_limit(self) -> float:
        return self.limit_entry(1)

    def limit_entry(self, i: int) -> float:
        """h_i of the limiting (infinite-chain) sequence."""
        if i < 1:
            raise ValueError("bond index starts at 1")
        if self.kind == "explicit":
            return self.entries[i - 1] if i <= self.N else 0.0
        return -float(special.zeta(self.p, i))

    def limit_entries(self, n: int) -> np.ndarray:
        """h_1..h_n of the limiting sequence as an array."""
        if self.kind == "explicit":
            out = np.zeros(n)
            k = min(n, self.N)
            out[:k] = self.entries[:k]
            return out
        return -special.zeta(self.p, np.arange(1, n + 1, dtype=float))

    def tail_sum_H(self, n: int) -> float:
        """Sum_{i>n} h_i of the limiting sequence (signed, exact)."""
        if self.kind == "explicit":
            return float(sum(self.entries[n:])) if n < self.N else 0.0
        # sum_{i>n} zeta(p,i) = sum_{j>n} (j-n) j^{-p}
        p = self.p
        return -float(special.zeta(p - 1, n + 1) - n * special.zeta(p, n + 1))

    def tail_sum_H2(self, n: int) -> float:
        """Sum_{i>n} h_i^2 of the limiting sequence (partial sum + remainder)."""
        if self.kind == "explicit":
            return float(sum(h * h for h in self.entries[n:])) if n < self.N else 0.0
        idx = np.arange(n + 1, _TAIL_HORIZON + 1, dtype=float)
        s = float(np.sum(special.zeta(self.p, idx) ** 2))
        return s + _h2_integral_remainder(self.p, _TAIL_HORIZON)

    def tail_sum_H3_abs(self, n: int) -> float:
        """Sum_{i>n} |h_i|^3 of the limiting sequence (upper estimate)."""
        if self.kind == "explicit":
            return float(sum(abs(h) ** 3 for h in self.entries[n:])) if n < self.N else 0.0
        p = self.p
        idx = np.arange(n + 1, _TAIL_HORIZON + 1, dtype=float)
        s = float(np.sum(special.zeta(p, idx) ** 3))
        return s + (_TAIL_HORIZON - 1) ** (4 - 3 * p) / ((3 * p - 4) * (p - 1) ** 3)


def _h2_integral_remainder(p: float, k: int) -> float:
    # |h_i| = zeta(p,i) <= (i-1)^{1-p}/(p-1); integrate the square beyond k.
    return (k - 1) ** (3 - 2 * p) / ((2 * p - 3) * (p - 1) ** 2)


def _poly_from(kind: str, params: tuple[float, ...]) -> tuple[float, ...]:
    if kind == "harmonic":
        (alpha,) = params
        return (0.0, 0.0, alpha)
    if kind == "quartic-paper":
        # (y-1)^4/2 + y^2/2 expanded
        return (0.5, -2.0, 3.5, -2.0, 0.5)
    if kind == "polynomial":
        return tuple(float(c) for c in params)
    raise ValueError(f"unknown potential kind: {kind!r}")


def make_potential(kind: str, params: Sequence[float] = (), window: tuple[float, float] | None = None) -> Potential:
    """Construct a built-in potential.

    Args:
        kind: "harmonic" (params = (alpha,), alpha > 0), "quartic-paper"
            (no params), or "polynomial" (params = coefficients, low to high).
        window: optional interval on which curvature bounds are certified.
    """
    params = tuple(float(x) for x in params)
    if kind == "harmonic":
        if len(params) != 1:
            raise ValueError("harmonic takes a single stiffness parameter")
        if params[0] <= 0:
            raise ValueError("harmonic stiffness must be positive")
    elif kind == "quartic-paper":
        if params:
            raise ValueError("quartic-paper takes no parameters")
    elif kind != "polynomial":
        raise ValueError(f"unknown potential kind: {kind!r}")
    return Potential(kind=kind, params=params, coeffs=_poly_from(kind, params), window=window)


def add_potentials(a: Potential, b: Potential) -> Potential:
    """Exact sum of two potentials (used for psi + P)."""
    ca, cb = list(a.coeffs), list(b.coeffs)
    n = max(len(ca), len(cb))
    ca += [0.0] * (n - len(ca))
    cb += [0.0] * (n - len(cb))
    coeffs = tuple(x + y for x, y in zip(ca, cb))
    window = a.window if a.window is not None else b.window
    if a.kind == "harmonic" and b.kind == "harmonic":
        return Potential("harmonic", (a.params[0] + b.params[0],), coeffs, window)
    return Potential("polynomial", coeffs, coeffs, window)


def _grid_extrema(d2_fn, lo: float, hi: float, grid_points: int) -> tuple[float, float]:
    """Min/max of d2_fn over a grid, refined to the true local extremum.

    The refinement matters: a 1000-point grid on [-3,5] straddles the
    quartic minimum at r=1 and would otherwise report 1.0001 instead of 1.
    """
    grid = np.linspace(lo, hi, grid_points)
    vals = d2_fn(grid)
    out = []
    for pick in (np.argmin, np.argmax):
        k = int(pick(vals))
        a = grid[max(k - 1, 0)]
        b = grid[min(k + 1, grid_points - 1)]
        if b > a:
            sign = 1.0 if pick is np.argmin else -1.0
            res = optimize.minimize_scalar(lambda y: sign * float(d2_fn(y)), bounds=(a, b), method="bounded",
                                           options={"xatol": 1e-12 * (1 + abs(b))})
            out.append(sign * res.fun)
        else:
            out.append(float(vals[k]))
    return float(min(out[0], float(np.min(vals)))), float(max(out[1], float(np.max(vals))))


def check_assumptions(psi: Potential, defect: DefectSpec | None, window: tuple[float, float],
                      grid_points: int = 1000) -> AssumptionReport:
    """Certify curvature bounds of psi and psi+P on an interval.

    Returns the extrema of the second derivatives (kappa for psi, varsigma
    for psi+P); passed is False as soon as either lower bound is <= 0.
    """
    lo, hi = float(window[0]), float(window[1])
    if not (hi > lo):
        raise ValueError("empty assumption window")
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    k1, k2 = _grid_extrema(psi.d2, lo, hi, grid_points)
    if defect is not None:
        combined = add_potentials(psi, defect.perturbation)
        s1, s2 = _grid_extrema(combined.d2, lo, hi, grid_points)
    else:
        s1, s2 = k1, k2
    passed = (k1 > 0.0) and (s1 > 0.0)
    return AssumptionReport(kappa1=k1, kappa2=k2, varsigma1=s1, varsigma2=s2,
                            passed=passed, window=(lo, hi))


def build_force_sequence(kind: str, N: int, *, p: float | None = None,
                         entries: Sequence[float] | None = None) -> ForceSequence:
    """Build the per-bond load sequence for a chain of N bonds.

    For the power-law kind the node forces are f_j = j^{-p} on degrees of
    freedom j = 1..N-1 and the bond loads telescope: h_i = -sum_{j>=i} f_j
    (so h_N = 0). p > 2 is required for summability of the limit sequence.
    """
    if N < 2:
        raise ValueError("N must be >= 2")
    if kind == "explicit":
        if entries is None:
            raise ValueError("explicit force sequence needs entries")
        h = [float(x) for x in entries]
        if len(h) > N:
            raise ValueError("more entries than bonds")
        h += [0.0] * (N - len(h))
        H = float(sum(h[1:]))
        H2 = float(sum(x * x for x in h[1:]))
        return ForceSequence(kind="explicit", entries=tuple(h), N=N, H=H, H_bar=H2,
                             H_bar_remainder=0.0)
    if kind == "power-law":
        if p is None or p <= 2:
            raise ValueError("power law needs p > 2 (summable loads)")
        p = float(p)
        f = 1.0 / np.arange(1, N, dtype=float) ** p
        # h_i = -(zeta(p,i) - zeta(p,N)) = -sum_{j=i}^{N-1} j^{-p}, hence h_N = 0
        i = np.arange(1, N + 1, dtype=float)
        h = -(special.zeta(p, i) - special.zeta(p, float(N)))
        h[-1] = 0.0
        # limiting tail sums over i >= 2:
        # sum_{i>=2} zeta(p,i) = zeta(p-1) - zeta(p), so H = zeta(p) - zeta(p-1)
        H = -float(special.zeta(p - 1, 2.0) - special.zeta(p, 2.0))
        idx = np.arange(2, _TAIL_HORIZON + 1, dtype=float)
        zs = special.zeta(p, idx)
        H_bar = float(np.sum(zs**2))
        rem = _h2_integral_remainder(p, _TAIL_HORIZON)
        return ForceSequence(kind="power-law", entries=tuple(float(x) for x in h), N=N,
                             H=H, H_bar=H_bar, H_bar_remainder=rem, p=p,
                             node_forces=tuple(float(x) for x in f))
    raise ValueError(f"unknown force kind: {kind!r}")
