import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from levykit.errors import OutOfRange
from levykit.grid import GridFunction, Lattice, band_limited_resample


def sine(lat, k=3):
    return GridFunction.from_function(lambda x: np.sin(2 * np.pi * k * x / lat.L[0]), lat)


def test_spectral_derivative_of_sine():
    lat = Lattice.cube(1, 64, 2.0)
    u = sine(lat)
    x = lat.axes()[0]
    w = 2 * np.pi * 3 / 2.0
    np.testing.assert_allclose(u.derivative([1]).values, w * np.cos(w * x), atol=1e-10)
    np.testing.assert_allclose(u.derivative([2]).values, -w * w * np.sin(w * x), atol=1e-8)


def test_hessian_is_symmetric_in_two_dimensions():
    lat = Lattice.cube(2, 32)
    u = GridFunction.from_function(lambda x, y: np.sin(2 * np.pi * x) * np.cos(4 * np.pi * y), lat)
    H = u.hessian()
    np.testing.assert_allclose(H[0, 1], H[1, 0], atol=1e-9)


def test_evaluate_off_grid_and_shift():
    lat = Lattice.cube(1, 32)
    u = sine(lat)
    pts = np.array([[0.013], [0.77]])
    np.testing.assert_allclose(u.evaluate(pts), np.sin(6 * np.pi * pts[:, 0]), atol=1e-12)
    np.testing.assert_allclose(u.shifted([0.1]).values, np.sin(6 * np.pi * (lat.axes()[0] + 0.1)), atol=1e-12)


def test_resample_preserves_band_limited_function():
    u = sine(Lattice.cube(1, 32))
    fine = band_limited_resample(u, Lattice.cube(1, 128))
    np.testing.assert_allclose(fine.values, np.sin(6 * np.pi * fine.lattice.axes()[0]), atol=1e-12)
    with pytest.raises(OutOfRange):
        band_limited_resample(u, Lattice.cube(1, 128, 2.0))


def test_integral_and_mean():
    lat = Lattice.cube(1, 16, 3.0)
    u = GridFunction.from_function(lambda x: 2.0 + 0 * x, lat)
    assert u.integral() == pytest.approx(6.0) and u.mean() == pytest.approx(2.0)


@settings(max_examples=30, deadline=None)
@given(steps=st.integers(-40, 40))
def test_roll_matches_exact_shift(steps):
    lat = Lattice.cube(1, 16)
    u = sine(lat, 2)
    np.testing.assert_allclose(u.roll([steps]).values, u.shifted([steps / 16]).values, atol=1e-12)
