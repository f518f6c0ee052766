"""Bond potentials: derivatives, curvature certificates, load sequences."""

import math

import numpy as np
import pytest

from defectfe import (
    DefectSpec,
    add_potentials,
    build_force_sequence,
    check_assumptions,
    make_potential,
)


def test_harmonic_eval_matches_hand_derivatives():
    p = make_potential("harmonic", (1.0,))
    assert p.eval(2.0) == (4.0, 4.0, 2.0)
    assert p.eval(0.0) == (0.0, 0.0, 2.0)
    v, d1, d2 = make_potential("harmonic", (2.5,)).eval(-1.5)
    assert v == pytest.approx(2.5 * 2.25)
    assert d1 == pytest.approx(2 * 2.5 * -1.5)
    assert d2 == pytest.approx(5.0)


def test_quartic_matches_closed_expression():
    p = make_potential("quartic-paper")
    ys = np.linspace(-3.0, 5.0, 101)
    v, d1, d2 = p.eval(ys)
    np.testing.assert_allclose(v, 0.5 * (ys - 1) ** 4 + 0.5 * ys**2, rtol=1e-13)
    np.testing.assert_allclose(d1, 2 * (ys - 1) ** 3 + ys, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(d2, 6 * (ys - 1) ** 2 + 1, rtol=1e-13)


def test_eval_is_vectorized_and_consistent_with_scalar_accessors():
    p = make_potential("polynomial", (0.3, -1.0, 0.7, 0.0, 0.25))
    ys = np.array([-2.0, 0.0, 0.4, 3.0])
    v, d1, d2 = p.eval(ys)
    for i, y in enumerate(ys):
        assert v[i] == p.value(y)
        assert d1[i] == p.d1(y)
        assert d2[i] == p.d2(y)


@pytest.mark.parametrize(
    "kind,params",
    [
        ("harmonic", ()),
        ("harmonic", (1.0, 2.0)),
        ("harmonic", (0.0,)),
        ("harmonic", (-1.0,)),
        ("quartic-paper", (1.0,)),
        ("cubic", ()),
    ],
)
def test_make_potential_rejects_bad_inputs(kind, params):
    with pytest.raises(ValueError):
        make_potential(kind, params)


def test_add_potentials_is_pointwise_sum():
    a = make_potential("quartic-paper")
    b = make_potential("harmonic", (1.5,))
    s = add_potentials(a, b)
    ys = np.linspace(-2, 4, 37)
    np.testing.assert_allclose(s.value(ys), a.value(ys) + b.value(ys), rtol=1e-14)
    np.testing.assert_allclose(s.d2(ys), a.d2(ys) + b.d2(ys), rtol=1e-14)


def test_add_potentials_keeps_harmonic_kind():
    s = add_potentials(make_potential("harmonic", (1.0,)), make_potential("harmonic", (0.5,)))
    assert s.kind == "harmonic"
    assert s.params == (1.5,)


def test_harmonic_curvature_bounds_are_global_constants():
    p = make_potential("harmonic", (3.0,))
    assert p.curvature_bounds() == (6.0, 6.0)
    assert p.curvature_bounds(-100.0, 5.0) == (6.0, 6.0)


def test_quartic_curvature_bounds_on_interval():
    p = make_potential("quartic-paper")
    lo, hi = p.curvature_bounds(-3.0, 5.0)
    # interior minimum at y=1 must be found exactly, not from a grid
    assert lo == pytest.approx(1.0, abs=1e-12)
    assert hi == pytest.approx(6 * 16 + 1, rel=1e-12)


def test_curvature_bounds_without_interval_requires_window():
    with pytest.raises(ValueError):
        make_potential("quartic-paper").curvature_bounds()
    win = make_potential("quartic-paper", window=(0.0, 2.0))
    lo, hi = win.curvature_bounds()
    assert lo == pytest.approx(1.0, abs=1e-12)
    assert hi == pytest.approx(7.0, rel=1e-12)


class TestCheckAssumptions:
    def test_harmonic_with_harmonic_defect(self):
        rep = check_assumptions(
            make_potential("harmonic", (1.0,)),
            DefectSpec(make_potential("harmonic", (1.0,))),
            window=(-5.0, 5.0),
        )
        assert (rep.kappa1, rep.kappa2) == (2.0, 2.0)
        assert (rep.varsigma1, rep.varsigma2) == (4.0, 4.0)
        assert rep.passed

    def test_quartic_minimum_is_refined_off_grid(self):
        # 1000 grid points on [-3, 5] straddle y=1; the report must still
        # find the exact curvature minimum there
        rep = check_assumptions(make_potential("quartic-paper"), None, window=(-3.0, 5.0))
        assert rep.kappa1 == pytest.approx(1.0, abs=1e-9)
        assert rep.passed

    def test_concave_potential_fails(self):
        rep = check_assumptions(
            make_potential("polynomial", (0.0, 0.0, -1.0)), None, window=(-1.0, 1.0)
        )
        assert rep.kappa1 < 0
        assert not rep.passed

    def test_defect_can_break_convexity(self):
        rep = check_assumptions(
            make_potential("harmonic", (1.0,)),
            DefectSpec(make_potential("polynomial", (0.0, 0.0, -3.0))),
            window=(-1.0, 1.0),
        )
        assert rep.kappa1 == pytest.approx(2.0)
        assert rep.varsigma1 == pytest.approx(-4.0)
        assert not rep.passed

    def test_empty_window_rejected(self):
        with pytest.raises(ValueError):
            check_assumptions(make_potential("harmonic", (1.0,)), None, window=(1.0, 1.0))


def _brute_power_law_entry(p, i, n):
    return -sum(j**-p for j in range(i, n))


def test_power_law_entries_match_brute_force():
    n, p = 6, 3.0
    f = build_force_sequence("power-law", n, p=p)
    assert f.N == n and f.kind == "power-law"
    for i in range(1, n + 1):
        assert f.entries[i - 1] == pytest.approx(_brute_power_law_entry(p, i, n), abs=1e-14)
    assert f.entries[-1] == 0.0
    assert f.node_forces == tuple(1.0 / j**p for j in range(1, n))


def test_power_law_limit_entries_are_zeta_tails():
    f = build_force_sequence("power-law", 4, p=3.5)
    js = np.arange(1, 1_000_000, dtype=float)
    terms = js**-3.5  # truncation past 1e6 is ~4e-16
    for i in (1, 2, 5):
        brute = -math.fsum(terms[i - 1 :])
        assert f.limit_entry(i) == pytest.approx(brute, abs=1e-13)
    np.testing.assert_allclose(
        f.limit_entries(3), [f.limit_entry(1), f.limit_entry(2), f.limit_entry(3)]
    )


def test_power_law_tail_sums_match_series():
    from scipy.special import zeta

    # p=5 so the brute series is converged to machine precision by 1e5 terms
    f = build_force_sequence("power-law", 8, p=5.0)
    idx = np.arange(2, 100_001, dtype=float)
    tails = -zeta(5.0, idx)
    for n in (1, 2, 4):
        assert f.tail_sum_H(n) == pytest.approx(float(np.sum(tails[n - 1 :])), abs=1e-12)
        assert f.tail_sum_H2(n) == pytest.approx(float(np.sum(tails[n - 1 :] ** 2)), abs=1e-12)
    # the limiting H field is the tail sum over i >= 2
    assert f.H == pytest.approx(f.tail_sum_H(1), abs=1e-12)
    assert f.H_bar == pytest.approx(f.tail_sum_H2(1) - f.H_bar_remainder, abs=1e-12)


def test_tail_sums_telescope_against_entries():
    # removing the leading tail term must recover the limiting entry
    # exactly; this ties the closed-form tail sums to limit_entry at an
    # exponent where direct summation would converge too slowly to check
    f = build_force_sequence("power-law", 8, p=3.0)
    for n in (1, 2, 5, 9):
        h_next = f.limit_entry(n + 1)
        assert f.tail_sum_H(n) - f.tail_sum_H(n + 1) == pytest.approx(h_next, rel=1e-12)
        assert f.tail_sum_H2(n) - f.tail_sum_H2(n + 1) == pytest.approx(
            h_next**2, rel=1e-9
        )


def test_power_law_needs_summable_exponent():
    for p in (2.0, 1.5, None):
        with pytest.raises(ValueError):
            build_force_sequence("power-law", 8, p=p)


def test_explicit_entries_pad_to_chain_length():
    f = build_force_sequence("explicit", 5, entries=[0.0, 1.0])
    assert f.entries == (0.0, 1.0, 0.0, 0.0, 0.0)
    assert f.h1 == 0.0
    assert f.H == 1.0 and f.H_bar == 1.0 and f.H_bar_remainder == 0.0
    assert f.limit_entry(2) == 1.0
    assert f.limit_entry(7) == 0.0
    assert f.tail_sum_H(1) == 1.0
    assert f.tail_sum_H(2) == 0.0


def test_explicit_entries_cannot_exceed_bonds():
    with pytest.raises(ValueError):
        build_force_sequence("explicit", 2, entries=[1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        build_force_sequence("explicit", 4, entries=None)
    with pytest.raises(ValueError):
        build_force_sequence("gaussian", 4, entries=[1.0])


def test_chain_too_short():
    with pytest.raises(ValueError):
        build_force_sequence("explicit", 1, entries=[1.0])
