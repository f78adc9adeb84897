import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spdchom.grid import ConfigurationError, GridSpec
from spdchom.sources import NoiseParams, PumpParams, gen_pump, gen_vacuum_field, rng_for
from spdchom.validation import vacuum_statistics


def test_vacuum_reproducible_and_streams_differ(small_grid):
    noise = NoiseParams(0.5, 42)
    a = gen_vacuum_field(small_grid, noise, "signal", 3)
    b = gen_vacuum_field(small_grid, noise, "signal", 3)
    c = gen_vacuum_field(small_grid, noise, "idler", 3)
    d = gen_vacuum_field(small_grid, noise, "signal", 4)
    assert np.array_equal(a.amplitude, b.amplitude)
    assert not np.array_equal(a.amplitude, c.amplitude)
    assert not np.array_equal(a.amplitude, d.amplitude)
    assert a.polarization == "H" and c.polarization == "V"


def test_vacuum_rejects_pump(small_grid):
    with pytest.raises(ConfigurationError):
        gen_vacuum_field(small_grid, NoiseParams(), "pump")


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(0, 1000), st.floats(0.1, 4.0))
def test_vacuum_moments_within_standard_error(seed, realization, variance):
    g = GridSpec(16, 16, 16, 0.01, 0.01, 1.0)
    mean_ratio, z = vacuum_statistics(g, seed, realization, variance)
    assert mean_ratio < 1.0
    assert z < 5.0


def test_vacuum_pixels_uncorrelated(small_grid):
    a = gen_vacuum_field(small_grid, NoiseParams(0.5, 9), "signal").amplitude.ravel()
    c = np.mean(a[:-1] * np.conj(a[1:]))
    assert abs(c) < 5 * 0.5 / np.sqrt(a.size)


def test_rng_streams_independent():
    x = rng_for(1, 0, 1).standard_normal(4)
    y = rng_for(1, 0, 2).standard_normal(4)
    assert not np.allclose(x, y)


def test_pump_peak_and_width():
    g = GridSpec(64, 64, 128, 7.8e-3, 7.8e-3, 2.3)
    p = PumpParams(peak_amplitude=3.0)
    f = gen_pump(g, p)
    assert np.max(np.abs(f.amplitude)) == pytest.approx(3.0)
    np.testing.assert_allclose(np.abs(f.amplitude[:, 32, 64]), 3.0 * np.exp(-g.x ** 2 / (2 * 0.1 ** 2)),
                               rtol=1e-12)
    np.testing.assert_allclose(np.abs(f.amplitude[32, 32, :]), 3.0 * np.exp(-g.t ** 2 / (2 * 42.0 ** 2)),
                               rtol=1e-12)
    assert f.polarization == "V" and f.beam == "pump"


def test_pump_clipping_raises():
    g = GridSpec(16, 16, 16, 7.8e-3, 7.8e-3, 2.3)
    with pytest.raises(ConfigurationError):
        gen_pump(g, PumpParams())


def test_pump_wavelength_must_match_grid():
    g = GridSpec(64, 64, 128, 7.8e-3, 7.8e-3, 2.3)
    with pytest.raises(ConfigurationError):
        gen_pump(g, PumpParams(wavelength=400.0))


@pytest.mark.parametrize("kw", [{"sigma_t": 0.0}, {"peak_amplitude": -1.0}])
def test_pump_params_validated(kw):
    with pytest.raises(ConfigurationError):
        PumpParams(**kw)
