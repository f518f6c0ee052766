"""Tilted single-bond statistics, strain energy density, and its dual map.

The harmonic cases all have hand closed forms. The quartic cases are
checked against scipy.integrate.quad plus a direct supremum search, and
against the structural identities that hold for any uniformly convex bond:
the dual round-trip, variance bounds, and stiffness * variance = 1.
"""

import csv
import math

import numpy as np
import pytest
from scipy import integrate, optimize

from defectfe import CauchyBornEvaluator, make_potential
from defectfe.cauchy_born import global_curvature_min


@pytest.fixture
def ev_harm(harmonic):
    return CauchyBornEvaluator(harmonic)


@pytest.fixture
def ev_quart(quartic):
    return CauchyBornEvaluator(quartic)


def test_global_curvature_min():
    assert global_curvature_min(make_potential("harmonic", (1.0,))) == 2.0
    assert global_curvature_min(make_potential("harmonic", (0.25,))) == 0.5
    assert global_curvature_min(make_potential("quartic-paper")) == pytest.approx(1.0, abs=1e-12)
    # linear and concave bonds have no uniform convexity to offer
    assert global_curvature_min(make_potential("polynomial", (0.0, 1.0))) == 0.0
    assert global_curvature_min(make_potential("polynomial", (0.0, 0.0, -1.0))) == -2.0
    assert global_curvature_min(make_potential("polynomial", (0.0, 0.0, 0.0, 1.0))) == -math.inf


def test_evaluator_rejects_non_convex_bonds():
    with pytest.raises(ValueError):
        CauchyBornEvaluator(make_potential("polynomial", (0.0, 1.0)))
    with pytest.raises(ValueError):
        CauchyBornEvaluator(make_potential("polynomial", (0.0, 0.0, 0.0, 1.0)))


def test_harmonic_log_partition(ev_harm):
    assert ev_harm.log_partition(0.0) == pytest.approx(0.5 * math.log(math.pi), abs=1e-10)
    assert ev_harm.log_partition(2.0) == pytest.approx(1.0 + 0.5 * math.log(math.pi), abs=1e-10)
    ev4 = CauchyBornEvaluator(make_potential("harmonic", (4.0,)))
    assert ev4.log_partition(0.0) == pytest.approx(0.5 * math.log(math.pi / 4), abs=1e-10)


def test_harmonic_tilted_stats(ev_harm):
    st = ev_harm.tilted_stats(2.0)
    assert st.mean == pytest.approx(1.0, abs=1e-10)
    assert st.variance == pytest.approx(0.5, abs=1e-9)
    assert ev_harm.tilted_stats(0.0).mean == pytest.approx(0.0, abs=1e-12)


def test_tilted_mean_slope_within_curvature_bounds(ev_harm, ev_quart):
    # the derivative of the tilt -> mean map is the tilted variance and is
    # pinched between the reciprocal curvature extremes; for the harmonic
    # bond both collapse to 1/(2 alpha)
    for t in (-3.0, 0.0, 1.7):
        assert ev_harm.tilted_stats(t).variance == pytest.approx(0.5, abs=1e-9)
    for t in (-2.0, 0.0, 2.0, 5.0):
        var = ev_quart.tilted_stats(t).variance
        assert 0.0 < var < 1.0 / global_curvature_min(ev_quart.psi) + 1e-9
        # finite-difference check that the variance is that derivative
        d = 1e-4
        fd = (ev_quart.tilted_mean(t + d) - ev_quart.tilted_mean(t - d)) / (2 * d)
        assert fd == pytest.approx(var, rel=1e-5)


def test_solve_tilt_harmonic(ev_harm):
    assert ev_harm.solve_tilt(1.0) == pytest.approx(2.0, abs=1e-10)
    assert ev_harm.solve_tilt(0.0) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("A", [-1.5, -0.2, 0.0, 0.8, 2.0])
def test_dual_round_trip(ev_harm, ev_quart, A):
    for ev in (ev_harm, ev_quart):
        t = ev.solve_tilt(A)
        assert ev.tilted_mean(t) == pytest.approx(A, abs=1e-9)


def test_harmonic_strain_energy(ev_harm):
    w = ev_harm.strain_energy(1.0)
    assert w.value == pytest.approx(1.0 - 0.5 * math.log(math.pi), abs=1e-10)
    assert w.stress == pytest.approx(2.0, abs=1e-10)
    assert w.stiffness == pytest.approx(2.0, abs=1e-8)
    w0 = ev_harm.strain_energy(0.0)
    assert w0.value == pytest.approx(-0.5 * math.log(math.pi), abs=1e-10)
    assert w0.stress == pytest.approx(0.0, abs=1e-10)


def test_strain_energy_is_legendre_transform(ev_quart):
    # W(A) = sigma*A - log Z(sigma*) must attain the supremum; compare
    # against an independent scan with scipy quadrature
    def log_z(sigma):
        val, _ = integrate.quad(
            lambda y: np.exp(-(0.5 * (y - 1) ** 4 + 0.5 * y**2) + sigma * y),
            -25,
            25,
            epsabs=1e-13,
            epsrel=1e-12,
        )
        return math.log(val)

    for A in (-0.5, 0.7, 2.0):
        res = optimize.minimize_scalar(
            lambda s: -(s * A - log_z(s)), bounds=(-60, 60), method="bounded",
            options={"xatol": 1e-10},
        )
        w = ev_quart.strain_energy(A)
        assert w.value == pytest.approx(-res.fun, abs=1e-7)
        assert w.stress == pytest.approx(res.x, abs=1e-5)


def test_fenchel_equality_at_optimum(ev_harm, ev_quart):
    for ev in (ev_harm, ev_quart):
        for A in (-1.0, 0.3, 1.6):
            t = ev.solve_tilt(A)
            assert ev.strain_energy(A).value == pytest.approx(
                t * A - ev.log_partition(t), abs=1e-9
            )


def test_stiffness_times_variance_is_one(ev_harm, ev_quart):
    for ev in (ev_harm, ev_quart):
        for A in (-1.0, 0.0, 0.5, 2.0):
            w = ev.strain_energy(A)
            var = ev.tilted_stats(ev.solve_tilt(A)).variance
            assert w.stiffness * var == pytest.approx(1.0, rel=1e-6)


def test_batch_paths_match_scalar(ev_quart):
    strains = np.array([-1.0, 0.0, 0.4, 1.3, 2.2])
    vals, stresses, stiffs = ev_quart.strain_energy_batch(strains)
    for i, A in enumerate(strains):
        w = ev_quart.strain_energy(float(A))
        # each route carries its own rel_tol=1e-10 quadrature budget
        assert vals[i] == pytest.approx(w.value, rel=1e-9, abs=1e-10)
        assert stresses[i] == pytest.approx(w.stress, rel=1e-9, abs=1e-10)
        assert stiffs[i] == pytest.approx(w.stiffness, rel=1e-7)
    tilts = np.array([-2.0, 0.0, 3.0])
    logz, mean, var = ev_quart.tilted_stats_batch(tilts)
    for i, t in enumerate(tilts):
        st = ev_quart.tilted_stats(float(t))
        assert logz[i] == pytest.approx(st.log_partition, abs=1e-10)
        assert mean[i] == pytest.approx(st.mean, abs=1e-10)
        assert var[i] == pytest.approx(st.variance, rel=1e-8)


def test_defect_mean_gap(ev_harm, harmonic):
    # adding P = y^2 halves the effective width: means are t/4 vs t/2
    gap = ev_harm.defect_mean_gap(2.0, harmonic)
    assert gap == pytest.approx(-0.5, abs=1e-9)
    assert ev_harm.defect_mean_gap(0.0, harmonic) == pytest.approx(0.0, abs=1e-10)


def test_tabulated_strain_energy_matches_direct(ev_harm):
    tab = ev_harm.tabulate(-2.0, 2.0, 65)
    probes = np.linspace(-1.97, 1.97, 41)
    for A in probes:
        direct = ev_harm.strain_energy(float(A))
        interp = tab.strain_energy(float(A))
        assert interp.value == pytest.approx(direct.value, abs=1e-8)
        assert interp.stress == pytest.approx(direct.stress, abs=1e-6)


def test_export_table_csv(tmp_path, ev_harm):
    path = tmp_path / "wtab.csv"
    ev_harm.export_table_csv(path, -1.0, 1.0, 5)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["A", "W", "W1", "W2"]
    assert len(rows) == 6
    mid = rows[3]  # A = 0 row
    assert float(mid[0]) == 0.0
    assert float(mid[1]) == pytest.approx(-0.5 * math.log(math.pi), abs=1e-9)
    assert float(mid[2]) == pytest.approx(0.0, abs=1e-9)
    assert float(mid[3]) == pytest.approx(2.0, abs=1e-7)
