import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from levykit.errors import OutOfRange
from levykit.grid import GridFunction, Lattice
from levykit.measures import stable
from levykit.operators import (FrozenKernel, LowerOrderCoefficients, apply_A, apply_fractional_subordination,
                               apply_frozen, apply_G, apply_generator, apply_multiplier, apply_Q, commutator,
                               coefficient_modulus, fractional_resolvent, second_difference)
from levykit.scaling import PowerLaw
from levykit.simulate import CoefficientField


def stable_rate(alpha, xi):
    # -psi(xi) for the two-sided density r^{-1-alpha}
    return (2 * math.pi * abs(xi)) ** alpha * math.pi / (special.gamma(1 + alpha) * math.sin(math.pi * alpha / 2))


def cos_mode(k, n=128, L=1.0):
    lat = Lattice.cube(1, n, L)
    return GridFunction.from_function(lambda x: np.cos(2 * np.pi * k * x / L), lat)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
@pytest.mark.parametrize("k", [1, 5])
def test_quadrature_generator_on_cosine(alpha, k):
    u = cos_mode(k, L=2.0)
    got = apply_generator(u, stable(alpha))
    np.testing.assert_allclose(got.values, -stable_rate(alpha, k / 2.0) * u.values, atol=1e-7 * stable_rate(alpha, k / 2.0))


def test_second_difference_by_hand():
    u = cos_mode(1)
    x, y = 0.2, 0.3
    expected = math.cos(2 * math.pi * 0.5) - math.cos(2 * math.pi * 0.2) + y * 2 * math.pi * math.sin(2 * math.pi * x)
    assert second_difference(u, x, y, 1.5) == pytest.approx(expected, abs=1e-12)
    # beyond the unit ball the order-one cutoff drops the gradient term
    assert second_difference(u, x, 1.3, 1.0) == pytest.approx(math.cos(2 * math.pi * 1.5) - math.cos(2 * math.pi * 0.2))


@pytest.mark.parametrize("kappa", [0.3, 0.5, 0.8])
def test_fractional_power_two_routes(kappa):
    u = cos_mode(3, n=64)
    expected = -stable_rate(1.5, 3) ** kappa * u.values
    np.testing.assert_allclose(apply_multiplier(u, stable(1.5), kappa).values, expected, atol=1e-10 * abs(expected).max())
    np.testing.assert_allclose(apply_fractional_subordination(u, stable(1.5), kappa).values, expected,
                               atol=1e-6 * abs(expected).max())


@pytest.mark.parametrize("kappa", [0.5, 1.0, 1.4])
@pytest.mark.parametrize("inverse", [False, True])
def test_resolvent_closed_form_and_routes(kappa, inverse):
    a = 0.7
    lat = Lattice.cube(1, 64)
    u = GridFunction.from_function(lambda x: 2.0 + np.cos(2 * np.pi * 2 * x), lat)
    power = -kappa if inverse else kappa
    expected = 2.0 * a ** power + (a + stable_rate(1.2, 2)) ** power * np.cos(4 * np.pi * lat.axes()[0])
    spec = fractional_resolvent(u, stable(1.2), a, kappa, inverse)
    np.testing.assert_allclose(spec.values, expected, rtol=1e-10)
    prob = fractional_resolvent(u, stable(1.2), a, kappa, inverse, route="probabilistic")
    np.testing.assert_allclose(prob.values, expected, rtol=1e-6, atol=1e-6 * abs(expected).max())


def test_resolvent_argument_checks():
    u = cos_mode(1, n=16)
    with pytest.raises(OutOfRange):
        fractional_resolvent(u, stable(1.5), 0.0, 0.5)
    with pytest.raises(OutOfRange):
        fractional_resolvent(u, stable(1.5), 1.0, 2.0)
    with pytest.raises(OutOfRange):
        fractional_resolvent(u, stable(1.5), 1.0, 0.5, route="monte-carlo")
    with pytest.raises(OutOfRange):
        apply_fractional_subordination(u, stable(1.5), 1.0)


@pytest.mark.parametrize("alpha", [0.5, 1.5])
def test_constant_matrix_scales_generator(alpha):
    # a jump c*y of a stable law has the law of the original scaled by c^alpha
    u = cos_mode(2, L=2.0)
    got = apply_G(u, CoefficientField.constant_matrix([[1.7]]), stable(alpha))
    np.testing.assert_allclose(got.values, 1.7 ** alpha * apply_multiplier(u, stable(alpha)).values, atol=1e-6)


def test_scalar_field_matches_pointwise_frozen_generator():
    alpha, L = 1.5, 2.0
    u = cos_mode(1, n=128, L=L)
    field = CoefficientField.scalar_field(lambda z: 1 + 0.3 * np.sin(2 * np.pi * z[..., 0] / L), 1)
    got = apply_G(u, field, stable(alpha))
    x = u.lattice.axes()[0]
    g = 1 + 0.3 * np.sin(2 * np.pi * x / L)
    np.testing.assert_allclose(got.values, -g ** alpha * stable_rate(alpha, 1 / L) * u.values, atol=1e-6)


def test_A_with_x_dependent_kernel_is_multiplication():
    u = cos_mode(2, n=128, L=2.0)
    rho = FrozenKernel.from_expression("1 + 0.25*cos(pi*x1)", 1, K=1.25)
    x = u.lattice.axes()[0]
    base = apply_multiplier(u, stable(1.5)).values
    np.testing.assert_allclose(apply_A(u, rho, stable(1.5), 0.0).values, (1 + 0.25 * np.cos(np.pi * x)) * base, atol=1e-6)
    frozen = apply_frozen(u, rho, stable(1.5), 0.0, [0.5])
    np.testing.assert_allclose(frozen.values, base, atol=1e-6)


def test_order_one_kernel_must_be_symmetric():
    rho = FrozenKernel.from_expression("1 + 0.5*tanh(y)", 1, K=1.5)
    with pytest.raises(OutOfRange):
        apply_frozen(cos_mode(1, n=32), rho, stable(1.0), 0.0, [0.0])


def test_commutator_matches_spectral_identity():
    lat = Lattice.cube(1, 128, 2.0)
    u = GridFunction.from_function(lambda x: np.sin(np.pi * x), lat)
    eta = GridFunction.from_function(lambda x: np.exp(np.cos(np.pi * x)), lat)
    m = stable(1.3)
    A = lambda f: apply_multiplier(f, m).values
    expected = A(u * eta) - u.values * A(eta) - eta.values * A(u)
    np.testing.assert_allclose(commutator(u, m, eta).values, expected, atol=1e-5 * abs(expected).max())


def test_lower_order_terms():
    lat = Lattice.cube(1, 64)
    u = GridFunction.from_function(lambda x: np.sin(2 * np.pi * x), lat)
    x = lat.axes()[0]
    c = LowerOrderCoefficients(stable(1.5), b=lambda t, z: 0.5 + 0 * z, p=lambda t, z: 2.0 + 0 * z[..., 0])
    np.testing.assert_allclose(apply_Q(u, c, 0.0).values, 2 * u.values + 0.5 * 2 * np.pi * np.cos(2 * np.pi * x), atol=1e-9)
    # the drift is not part of the lower-order operator below order one
    c0 = LowerOrderCoefficients(stable(0.5), b=lambda t, z: 0.5 + 0 * z)
    np.testing.assert_allclose(apply_Q(u, c0, 0.0).values, 0.0)
    # q(t, z, y) = 2 y: jumps scaled by two
    cq = LowerOrderCoefficients(stable(1.5), q_scale=lambda t, z: 2.0 + 0 * z[..., 0])
    np.testing.assert_allclose(apply_Q(u, cq, 0.0).values, 2 ** 1.5 * apply_multiplier(u, stable(1.5)).values, atol=1e-6)


def test_coefficient_modulus_regimes():
    field = CoefficientField.scalar_field(lambda z: 1 + 0.3 * np.sin(2 * np.pi * z[..., 0]), 1)
    assert coefficient_modulus(field, PowerLaw(1.5), 1.5, 0.25, [0.0], [0.25]) == pytest.approx(0.3)
    assert coefficient_modulus(field, PowerLaw(0.5), 0.5, 0.25, [0.0], [0.25]) == pytest.approx(0.3 ** 0.5)
    # order one: max(gbar^{1 - delta'}, gbar) for w(r) = r
    assert coefficient_modulus(field, PowerLaw(1.0), 1.0, 0.25, [0.0], [0.25]) == pytest.approx(0.3 ** 0.75)
    assert coefficient_modulus(field, PowerLaw(1.5), 1.5, 0.25, [0.1], [0.1]) == 0.0


coeffs = st.lists(st.floats(-1, 1), min_size=4, max_size=4)


@settings(max_examples=25, deadline=None)
@given(a=coeffs, b=coeffs, s=st.floats(-3, 3))
def test_generator_linear_and_dissipative(a, b, s):
    lat = Lattice.cube(1, 32)
    x = lat.axes()[0]
    make = lambda c: GridFunction(sum(ci * np.cos(2 * np.pi * (i + 1) * x + i) for i, ci in enumerate(c)), lat)
    u, v = make(a), make(b)
    m = stable(1.2, weights=[1.4, 0.6])
    lhs = apply_generator(u + s * v, m).values
    rhs = apply_generator(u, m).values + s * apply_generator(v, m).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-9 * (1 + abs(rhs).max()))
    assert float(np.dot(apply_generator(u, m).values, u.values)) <= 1e-9
