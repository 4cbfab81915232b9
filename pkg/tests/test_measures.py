import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from levykit.errors import DegenerateTail, OutOfRange
from levykit.measures import (AssumptionParams, check_assumption_A, chi, chi_mode, from_config, stable,
                              stable_confined, subordinated, tail_scaling_constants)
from levykit.scaling import BernsteinDerived, PowerLaw


def stable_symbol_1d(alpha, xi, c=1.0):
    # two-sided c r^{-1-alpha}: -(2 pi |xi|)^alpha pi / (Gamma(1 + alpha) sin(pi alpha / 2))
    return -c * (2 * math.pi * abs(xi)) ** alpha * math.pi / (special.gamma(1 + alpha) * math.sin(math.pi * alpha / 2))


def test_frozen_stable_symbol_value():
    assert stable(1.5).symbol(1.0).real == pytest.approx(-52.63789, abs=5e-5)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 1.0, 1.5, 1.9])
def test_stable_symbol_closed_form(alpha):
    m = stable(alpha)
    xi = np.array([0.25, 1.0, 7.0])
    got = m.symbol(xi)
    np.testing.assert_allclose(got.real, [stable_symbol_1d(alpha, x) for x in xi], rtol=1e-9)
    np.testing.assert_allclose(got.imag, 0.0, atol=1e-9 * np.abs(got.real).max())


def test_skewed_stable_imaginary_part():
    a = 0.7
    m = stable(a, weights=[1.5, 0.5])
    k = 2 * math.pi
    expected_im = (1.5 - 0.5) * special.gamma(1 - a) * math.sin(math.pi * a / 2) / a * k ** a
    expected_re = 2.0 * stable_symbol_1d(a, 1.0) / 2.0 * (1.5 + 0.5) / 2.0
    psi = m.symbol(1.0)
    assert psi.imag == pytest.approx(expected_im, rel=1e-9)
    assert psi.real == pytest.approx(expected_re, rel=1e-9)


def test_subordinated_symbol_is_fractional_laplacian():
    m = subordinated(BernsteinDerived((0.4,)))
    xi = np.array([0.3, 1.0, 5.0])
    np.testing.assert_allclose(m.symbol(xi).real, -(2 * math.pi * xi) ** 0.8, rtol=1e-7)


def test_isotropic_stable_in_two_dimensions():
    a = 1.2
    m = stable(a, d=2)
    sphere = 2 * math.sqrt(math.pi) * special.gamma((a + 1) / 2) / special.gamma(a / 2 + 1)
    one_ray = special.gamma(1 - a) * math.cos(math.pi * a / 2) / a
    expected = sphere * one_ray * (2 * math.pi) ** a
    for xi in ([1.0, 0.0], [0.6, 0.8], [math.sqrt(0.5), math.sqrt(0.5)]):
        assert m.symbol(np.array(xi)).real == pytest.approx(-expected, rel=2e-3)


def test_tails_and_moments():
    m = stable(1.5)
    assert m.tail(1.0) == pytest.approx(2 / 1.5, rel=1e-12)
    assert m.truncated_moment(2.0, "inside") == pytest.approx(4.0, rel=1e-10)
    assert m.tail_ratio_integral(3.0) == pytest.approx(1 / (2 - 1.5), rel=1e-8)
    assert m.levy_integral() == pytest.approx(4.0 + 2 / 1.5, rel=1e-10)
    lo, hi = tail_scaling_constants(stable(0.5), np.logspace(-2, 2, 9))
    assert lo == pytest.approx(0.25, rel=1e-12) and hi == pytest.approx(0.25, rel=1e-12)


def test_chi_regimes():
    assert chi_mode(0.5) == "none" and chi_mode(1.0) == "ball" and chi_mode(1.5) == "full"
    np.testing.assert_array_equal(chi(1.0, np.array([0.5, 2.0])), [1.0, 0.0])


def test_restriction_and_symmetrization():
    m = stable(0.8, weights=[3.0, 1.0])
    assert not m.is_symmetric()
    sym = m.symmetrize()
    assert sym.is_symmetric()
    assert abs(sym.symbol(0.7).imag) < 1e-12
    assert sym.symbol(0.7).real == pytest.approx(m.symbol(0.7).real, rel=1e-12)
    assert m.restrict(2.0).tail(3.0) == 0.0


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_weighted_rescaling_preserves_stable_symbol(alpha):
    m = stable(alpha)
    for R in (0.5, 4.0):
        assert m.rescale(R, weighted=True).symbol(1.3) == pytest.approx(m.symbol(1.3), rel=1e-8)


def test_assumption_checks():
    m = stable(1.5)
    rep = check_assumption_A(m, AssumptionParams(alpha1=1.75, alpha2=1.25))
    assert rep.passed, rep.failures()
    # inner exponent below the order: the small-jump moment diverges
    bad = check_assumption_A(m, AssumptionParams(alpha1=1.25, alpha2=1.1))
    assert not bad.item("(iii) moments")["passed"]
    skew = check_assumption_A(stable(1.0, weights=[2.0, 1.0]), AssumptionParams(alpha1=1.5, alpha2=0.5))
    assert not skew.item("(ii) symmetry")["passed"]
    params = AssumptionParams(alpha1=1.75, alpha2=1.25, minorant=stable(1.5, c=0.5).restrict(1.0))
    assert check_assumption_A(m, params).passed
    # a minorant needs a finite second moment
    params.minorant = stable(1.5, c=0.5)
    assert not check_assumption_A(m, params).item("(i) integrability")["passed"]


def test_confined_bounds_enforced():
    stable_confined(1.5, lambda r, k: 1 + 0.5 / (1 + r * r), (1.0, 1.5))
    with pytest.raises(OutOfRange):
        stable_confined(1.5, lambda r, k: 2 + 0 * r, (1.0, 1.5))


def test_from_config_variants():
    assert from_config({"variant": "stable", "alpha": 1.2}).alpha == 1.2
    conf = from_config({"variant": "stable_confined", "alpha": 0.8, "density": "1 + 0.2*exp(-r)",
                        "bounds": [1.0, 1.2]})
    assert conf.variant == "stable_confined"
    dens = from_config({"variant": "radial_density", "alpha": 1.5, "density": "r^(-2.5)"}, PowerLaw(1.5))
    assert dens.symbol(1.0).real == pytest.approx(stable(1.5).symbol(1.0).real, rel=1e-6)
    with pytest.raises(OutOfRange):
        from_config({"variant": "subordinated"}, PowerLaw(1.0))
    with pytest.raises(OutOfRange):
        stable(2.0)


def test_degenerate_tail():
    with pytest.raises(DegenerateTail):
        stable(1.5).restrict(1.0).tail_ratio_integral(2.0)


@settings(max_examples=40, deadline=None)
@given(alpha=st.sampled_from([0.4, 1.0, 1.6]), xi=st.floats(0.01, 50.0), skew=st.floats(0.0, 2.0))
def test_symbol_hermitian_and_dissipative(alpha, xi, skew):
    weights = [1.0, 1.0] if alpha == 1.0 else [1.0 + skew, 1.0]
    m = stable(alpha, weights=weights)
    psi = m.symbol(xi)
    assert m.symbol(-xi) == pytest.approx(np.conj(psi), rel=1e-10, abs=1e-12)
    assert psi.real <= 0
