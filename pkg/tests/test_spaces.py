import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from levykit.errors import BandOverflow, BumpOverflow, OutOfRange
from levykit.grid import GridFunction, Lattice
from levykit.measures import stable
from levykit.scaling import PowerLaw
from levykit.spaces import (DEFAULT_BUMP, besov_norm, build_filter_bank, bump, bump_seminorm_constant,
                            equivalence_report, h_set, holder_norm, holder_seminorm, partition_norm_check,
                            smooth_step)

SF = PowerLaw(1.5)


def sine(lat, k):
    return GridFunction.from_function(lambda x: np.sin(2 * np.pi * k * x), lat)


def brute_holder(values, dx, sf, beta, max_shift):
    # every grid pair (x, x + h) with 0 < |h| <= max_shift, directly
    n = values.size
    best = 0.0
    for k in range(1, max_shift + 1):
        for i in range(n):
            best = max(best, abs(values[(i + k) % n] - values[i]) / float(sf.w(k * dx)) ** beta)
    return best


def test_smooth_step_values():
    np.testing.assert_allclose(smooth_step([-1.0, 0.0, 0.5, 1.0, 3.0]), [0.0, 0.0, 0.5, 1.0, 1.0])


def test_bank_is_partition_of_unity():
    bank = build_filter_bank(SF, Lattice.cube(2, 64))
    np.testing.assert_allclose(bank.bands.sum(axis=0), 1.0, atol=1e-12)
    assert np.all(bank.bands >= -1e-15)
    with pytest.raises(BandOverflow):
        build_filter_bank(SF, Lattice.cube(1, 16), J=10)


@pytest.mark.parametrize("j", [0, 1, 3, 5])
def test_besov_norm_of_pure_band_modes(j):
    # the mode N^j lies where only band j is nonzero, so the norm is w(N^-j)^-beta
    lat = Lattice.cube(1, 256)
    beta = 0.4
    bank = build_filter_bank(SF, lat)
    assert besov_norm(sine(lat, 2 ** j), bank, beta) == pytest.approx(float(SF.w(2.0 ** -j)) ** -beta, rel=1e-12)


def test_holder_seminorm_against_brute_force():
    lat = Lattice.cube(1, 64)
    rng = np.random.default_rng(0)
    u = GridFunction(rng.normal(size=64), lat)
    got, (idx, h) = holder_seminorm(u, SF, 0.5)
    assert got == pytest.approx(brute_holder(u.values, 1 / 64, SF, 0.5, 16), rel=1e-14)
    assert abs(u.values[(idx[0] + round(h[0] * 64)) % 64] - u.values[idx[0]]) / float(SF.w(abs(h[0]))) ** 0.5 == pytest.approx(got)


def test_dyadic_shift_set_is_a_subset_and_close():
    lat = Lattice.cube(1, 256)
    u = sine(lat, 3)
    full = holder_seminorm(u, SF, 0.5, h_set(lat, exhaustive=True))[0]
    dyadic = holder_seminorm(u, SF, 0.5, h_set(lat, exhaustive=False))[0]
    assert dyadic <= full * (1 + 1e-14)
    assert dyadic >= 0.95 * full


def test_holder_norm_variants():
    lat = Lattice.cube(1, 64)
    u = sine(lat, 1)
    assert holder_norm(u, SF, 0.4) == pytest.approx(1.0 + holder_seminorm(u, SF, 0.4)[0])
    assert holder_norm(u, SF, 0.4, "oneplus", stable(1.5)) > holder_norm(u, SF, 0.4)
    with pytest.raises(OutOfRange):
        holder_norm(u, SF, 0.4, "oneplus")


def test_equivalence_report_is_finite():
    lat = Lattice.cube(1, 128)
    fam = [sine(lat, k) for k in (1, 4, 16)] + [GridFunction.zeros(lat)]
    rep = equivalence_report(fam, SF, build_filter_bank(SF, lat), stable(1.5), 0.4, 1.0)
    assert rep.passed
    assert any("excluded" in n for n in rep.notes)


def test_bump_shape_and_overflow():
    lat = Lattice.cube(1, 512, 4.0)
    eta = bump(None, 2, [1.0], lat)
    x = lat.axes()[0]
    assert np.all(eta.values[np.abs(x - 1.0) <= 0.5] == 1.0)
    assert np.all(eta.values[np.abs(x - 1.0) >= 1.0] == 0.0)
    with pytest.raises(BumpOverflow):
        bump(None, 1, [0.0], lat)


def test_bump_modulus_and_constant():
    mod = DEFAULT_BUMP.modulus(np.array([1e-3, 0.1, 0.5, 1.0, 2.0]))
    assert np.all(np.diff(mod) >= 0) and mod[-1] == 1.0 and mod[-2] == 1.0
    assert 1.0 <= bump_seminorm_constant(SF, 0.4) < np.inf


def test_partition_check_passes():
    lat = Lattice.cube(1, 256, 4.0)
    u = GridFunction.from_function(lambda x: np.cos(np.pi * x / 2) + 0.3 * np.sin(3 * np.pi * x), lat)
    rep = partition_norm_check(u, SF, 0.4, 2)
    assert rep.passed, rep.failures()


amps = st.lists(st.floats(-2, 2), min_size=3, max_size=3)


@settings(max_examples=30, deadline=None)
@given(a=amps, b=amps, c=st.floats(-5, 5), shift=st.integers(0, 127))
def test_norm_properties(a, b, c, shift):
    lat = Lattice.cube(1, 128)
    bank = build_filter_bank(SF, lat)
    x = lat.axes()[0]
    make = lambda v: GridFunction(sum(vi * np.cos(2 * np.pi * 3 ** i * x + i) for i, vi in enumerate(v)), lat)
    u, v = make(a), make(b)
    for norm in (lambda f: besov_norm(f, bank, 0.4), lambda f: holder_seminorm(f, SF, 0.4)[0]):
        tol = 1e-10 * (1 + norm(u) + norm(v))
        assert norm(c * u) == pytest.approx(abs(c) * norm(u), rel=1e-10, abs=1e-12)
        assert norm(u + v) <= norm(u) + norm(v) + tol
        assert norm(u.roll([shift])) == pytest.approx(norm(u), rel=1e-10, abs=1e-12)
