"""Log-domain Gaussian-type quadrature against closed forms and scipy."""

import math

import numpy as np
import pytest
from scipy import integrate

from defectfe.errors import QuadratureError
from defectfe.quadrature import QuadratureConfig, log_integral_exp, weighted_mean


def gaussian_log_z(a, b):
    # log of integral of exp(-a y^2 + b y)
    return b * b / (4 * a) + 0.5 * math.log(math.pi / a)


@pytest.mark.parametrize("a,b", [(1.0, 0.0), (1.0, 2.0), (4.0, 0.0), (0.3, -5.0), (25.0, 40.0)])
def test_gaussian_closed_form(a, b):
    got = log_integral_exp(lambda y: -a * y * y + b * y, 2 * a)
    assert got == pytest.approx(gaussian_log_z(a, b), abs=1e-10)


def test_large_additive_shift_passes_through_exactly():
    # the integrand is evaluated relative to its peak, so constants far
    # outside double range of exp() must still come out right
    base = log_integral_exp(lambda y: -y * y, 2.0)
    for c in (900.0, -900.0):
        got = log_integral_exp(lambda y: -y * y + c, 2.0)
        assert got == pytest.approx(base + c, abs=1e-10)


def test_quartic_against_scipy_quad():
    def g(y):
        return -(0.5 * (y - 1) ** 4 + 0.5 * y**2)

    val, err = integrate.quad(lambda y: np.exp(g(y)), -20, 20, epsabs=1e-14, epsrel=1e-13)
    assert err < 1e-12
    assert log_integral_exp(g, 1.0) == pytest.approx(math.log(val), abs=1e-9)


def test_far_center_hint_recovers():
    got = log_integral_exp(lambda y: -2.0 * (y - 7.0) ** 2, 4.0, center_hint=-50.0)
    assert got == pytest.approx(0.5 * math.log(math.pi / 2.0), abs=1e-10)


def test_analytic_derivatives_give_same_answer():
    a, b = 3.0, 1.5
    plain = log_integral_exp(lambda y: -a * y * y + b * y, 2 * a)
    newton = log_integral_exp(
        lambda y: -a * y * y + b * y,
        2 * a,
        d1=lambda y: -2 * a * y + b,
        d2=lambda y: -2 * a * np.ones_like(y),
    )
    assert newton == pytest.approx(plain, abs=1e-11)


def test_nonpositive_curvature_bound_rejected():
    with pytest.raises(QuadratureError):
        log_integral_exp(lambda y: -y * y, 0.0)
    with pytest.raises(QuadratureError):
        weighted_mean(lambda y: y, lambda y: -y * y, -1.0)


def test_weighted_mean_gaussian_moments():
    a, b = 2.0, 3.0
    mean = weighted_mean(lambda y: y, lambda y: -a * y * y + b * y, 2 * a)
    assert mean == pytest.approx(b / (2 * a), abs=1e-10)
    second = weighted_mean(lambda y: y * y, lambda y: -a * y * y + b * y, 2 * a)
    assert second - mean * mean == pytest.approx(1 / (2 * a), abs=1e-9)


def test_weighted_mean_quartic_against_scipy():
    def g(y):
        return -(0.5 * (y - 1) ** 4 + 0.5 * y**2)

    num, _ = integrate.quad(lambda y: y * np.exp(g(y)), -20, 20, epsabs=1e-14)
    den, _ = integrate.quad(lambda y: np.exp(g(y)), -20, 20, epsabs=1e-14)
    got = weighted_mean(lambda y: y, g, 1.0)
    assert got == pytest.approx(num / den, abs=1e-9)


def test_config_validation():
    with pytest.raises(ValueError):
        QuadratureConfig(rel_tol=0.0)
    with pytest.raises(ValueError):
        QuadratureConfig(abs_tol=-1e-10)
    with pytest.raises(ValueError):
        QuadratureConfig(trunc_multiplier=3.0)
    with pytest.raises(ValueError):
        QuadratureConfig(max_subdivisions=1)


def test_loose_and_tight_tolerances_agree():
    def g(y):
        return -(0.5 * (y - 1) ** 4 + 0.5 * y**2)

    loose = log_integral_exp(g, 1.0, cfg=QuadratureConfig(rel_tol=1e-6, abs_tol=1e-8))
    tight = log_integral_exp(g, 1.0, cfg=QuadratureConfig(rel_tol=1e-12, abs_tol=1e-14))
    assert loose == pytest.approx(tight, abs=1e-5)


def test_stiff_peak_inside_wide_window():
    # kappa_lo certifies only the soft outer bowl; the spike at the center
    # is 1e4 times stiffer and must still be resolved
    def g(y):
        return -0.01 * y * y - 100.0 * y * y

    got = log_integral_exp(g, 0.02)
    assert got == pytest.approx(0.5 * math.log(math.pi / 100.01), abs=1e-9)
