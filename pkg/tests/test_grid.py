import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spdchom.grid import (FAR_FREQ, FAR_TIME, NEAR_FREQ, NEAR_TIME, ComplexField3D, ConfigurationError,
                          DomainError, GridSpec, fft_t, fft_xy, ifft_xy, make_grid, to_domain)

TABLE_GRID = GridSpec(128, 128, 128, 7.8e-3, 7.8e-3, 2.3)


def test_table_grid_windows_and_bins():
    assert TABLE_GRID.window_x == pytest.approx(0.9984)
    assert TABLE_GRID.dnu_x == pytest.approx(1.0016, rel=1e-4)
    assert TABLE_GRID.window_t == pytest.approx(294.4)
    assert TABLE_GRID.dnu_t * 1e3 == pytest.approx(3.397, rel=1e-3)


def test_axes_are_centred():
    g = GridSpec(8, 8, 8, 0.1, 0.1, 1.0)
    assert g.x[4] == 0.0 and g.x[0] == pytest.approx(-0.4)
    assert g.nu_t[4] == 0.0


def test_wavelength_axis_centred_on_degenerate_carrier():
    assert TABLE_GRID.wavelength_axis[64] == pytest.approx(709.4)
    assert np.all(np.diff(TABLE_GRID.wavelength_axis) > 0)


@pytest.mark.parametrize("kw", [{"n_x": 100}, {"n_t": 0}, {"dx": 0.0}, {"dt": -1.0}])
def test_invalid_grid_rejected(kw):
    base = dict(n_x=16, n_y=16, n_t=16, dx=0.01, dy=0.01, dt=1.0)
    base.update(kw)
    with pytest.raises(ConfigurationError):
        GridSpec(**base)


def test_make_grid_from_mapping():
    g = make_grid({"n_x": 16, "n_y": 8, "n_t": 32, "dx": 0.01, "dy": 0.02, "dt": 1.5})
    assert g.shape == (16, 8, 32)
    with pytest.raises(ConfigurationError):
        make_grid({"n_x": 16})


def test_check_window_warns():
    g = GridSpec(16, 16, 16, 0.01, 0.01, 1.0)
    with pytest.warns(UserWarning):
        assert not g.check_window(0.1, 0.01, 1.0)


def test_domain_errors(small_grid):
    f = ComplexField3D(np.zeros(small_grid.shape, complex), small_grid, "signal")
    with pytest.raises(DomainError):
        ifft_xy(f)
    g = fft_xy(f)
    with pytest.raises(DomainError):
        f + g
    with pytest.raises(ConfigurationError):
        ComplexField3D(np.zeros((2, 2, 2), complex), small_grid, "signal")
    with pytest.raises(ConfigurationError):
        ComplexField3D(np.zeros(small_grid.shape, complex), small_grid, "nobody")


def test_transform_labels(small_grid):
    f = ComplexField3D(np.ones(small_grid.shape, complex), small_grid, "signal")
    assert fft_xy(f).domain == FAR_TIME
    assert fft_t(f).domain == NEAR_FREQ
    assert to_domain(f, FAR_FREQ).domain == FAR_FREQ


def test_centred_fft_of_constant_is_delta(small_grid):
    f = ComplexField3D(np.ones(small_grid.shape, complex), small_grid, "signal")
    a = to_domain(f, FAR_FREQ).amplitude
    n = a.size
    assert abs(a[8, 8, 8]) == pytest.approx(np.sqrt(n))
    assert np.sum(np.abs(a) ** 2) == pytest.approx(n)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from(DOMAIN_LIST := [NEAR_TIME, FAR_TIME, NEAR_FREQ, FAR_FREQ]))
def test_parseval_and_round_trip(seed, target):
    g = GridSpec(8, 4, 16, 0.01, 0.02, 1.0)
    r = np.random.default_rng(seed)
    f = ComplexField3D(r.standard_normal(g.shape) + 1j * r.standard_normal(g.shape), g, "idler")
    h = to_domain(f, target)
    assert h.power() == pytest.approx(f.power(), rel=1e-12)
    back = to_domain(h, NEAR_TIME)
    np.testing.assert_allclose(back.amplitude, f.amplitude, atol=1e-12)
