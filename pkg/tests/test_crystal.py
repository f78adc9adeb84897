import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spdchom.crystal import (CrystalParams, build_linear_operator, n_e, n_o, nonlinear_step, nonlinear_step_arrays,
                             propagate_crystal, soft_aperture, type2_mismatch, walkoff_angle)
from spdchom.grid import ComplexField3D, ConfigurationError, GridSpec
from spdchom.sources import NoiseParams, gen_vacuum_field, plane_wave
from spdchom.validation import ode_gain, plane_wave_gain

# values computed once from the Sellmeier model and frozen
CUT_ANGLE_DEG = 48.589133739086556
WALKOFF_PUMP = 0.0769315274825988
WALKOFF_IDLER = 0.0713221700003579


def test_cut_angle_phase_matches():
    c = CrystalParams()
    assert np.degrees(c.theta_cut) == pytest.approx(CUT_ANGLE_DEG, rel=1e-9)
    assert abs(type2_mismatch(c.theta_cut, 354.7)) * c.length < 1e-6
    # type-2 e -> o + e: k_p = k_s(o) + k_i(e) at degeneracy
    k = lambda n, lam: 2 * np.pi * n / (lam * 1e-6)
    lhs = k(n_e(354.7, c.theta_cut), 354.7)
    rhs = k(n_o(709.4), 709.4) + k(n_e(709.4, c.theta_cut), 709.4)
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_walkoff_angles_frozen():
    th = CrystalParams().theta_cut
    assert walkoff_angle(354.7, th) == pytest.approx(WALKOFF_PUMP, rel=1e-9)
    assert walkoff_angle(709.4, th) == pytest.approx(WALKOFF_IDLER, rel=1e-9)
    c = CrystalParams()
    assert c.beam("signal").walkoff == 0.0 and not c.beam("signal").extraordinary
    assert c.beam("idler").extraordinary


@pytest.mark.parametrize("kw", [{"g": -1.0}, {"length": 0.0}, {"n_steps": 4}, {"width": -1.0}])
def test_invalid_crystal(kw):
    with pytest.raises(ConfigurationError):
        CrystalParams(**kw)


def test_linear_operator_is_unitary(small_grid):
    op = build_linear_operator(small_grid, CrystalParams(), 0.05, "idler")
    np.testing.assert_allclose(np.abs(op.multiplier), 1.0, atol=1e-14)


def test_linear_only_propagation_conserves_power(small_grid):
    noise = NoiseParams(0.5, 5)
    s = gen_vacuum_field(small_grid, noise, "signal")
    i = gen_vacuum_field(small_grid, noise, "idler")
    p = plane_wave(small_grid, 0.0, "pump", "V")
    _, s2, i2 = propagate_crystal(p, s, i, CrystalParams(g=0.0), peak_amplitude=1.0)
    assert s2.power() == pytest.approx(s.power(), rel=1e-12)
    assert i2.power() == pytest.approx(i.power(), rel=1e-12)


def test_soft_aperture_flat_inside():
    g = GridSpec(64, 64, 4, 0.03, 0.03, 1.0)
    a = soft_aperture(g, 1.0)
    assert a[32, 32] == 1.0
    assert a[0, 32] < 1e-6


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 3.0), st.floats(1e-3, 0.2), st.integers(0, 2 ** 31))
def test_nonlinear_step_manley_rowe_pointwise(pump_amp, dz, seed):
    r = np.random.default_rng(seed)
    shape = (4, 4, 4)
    p = pump_amp * np.exp(1j * r.uniform(0, 2 * np.pi, shape))
    s = r.standard_normal(shape) + 1j * r.standard_normal(shape)
    i = r.standard_normal(shape) + 1j * r.standard_normal(shape)
    p2, s2, i2, used_rk4 = nonlinear_step_arrays(p, s, i, 1.0, dz)
    # the exact two-mode step conserves both to rounding; RK4 to its truncation error
    tol = 1e-5 if used_rk4 else 1e-9
    diff0 = np.abs(s) ** 2 - np.abs(i) ** 2
    diff1 = np.abs(s2) ** 2 - np.abs(i2) ** 2
    np.testing.assert_allclose(diff1, diff0, atol=tol * (1 + np.max(np.abs(s2)) ** 2))
    # energy bookkeeping: pump loses what the signal gains
    tot0 = np.abs(p) ** 2 + np.abs(s) ** 2
    tot1 = np.abs(p2) ** 2 + np.abs(s2) ** 2
    np.testing.assert_allclose(tot1, tot0, rtol=tol, atol=tol)


def test_nonlinear_step_field_api(small_grid):
    p = plane_wave(small_grid, 1.0, "pump", "V")
    s = plane_wave(small_grid, 1e-3, "signal")
    i = plane_wave(small_grid, 0.0, "idler", "V")
    _, s2, i2 = nonlinear_step(p, s, i, 1.0, 0.1)
    assert np.abs(i2.amplitude[0, 0, 0]) == pytest.approx(1e-3 * np.sinh(0.1), rel=1e-10)
    assert np.abs(s2.amplitude[0, 0, 0]) == pytest.approx(1e-3 * np.cosh(0.1), rel=1e-6)


@settings(max_examples=8, deadline=None)
@given(st.floats(0.5, 5.0))
def test_phase_matched_plane_wave_gain(g):
    cr = CrystalParams(g=g)
    gain, _, _ = plane_wave_gain(cr)
    assert gain == pytest.approx(np.sinh(g * cr.length) ** 2, rel=1e-4)


def test_mismatched_gain_below_matched():
    cr = CrystalParams(delta_k=6.0, n_steps=64)
    gain, _, _ = plane_wave_gain(cr)
    assert gain == pytest.approx(ode_gain(cr.g, cr.length, 6.0), rel=1e-3)
    assert gain < np.sinh(cr.g * cr.length) ** 2


def test_convergence_guard_raises_for_coarse_steps():
    from spdchom.crystal import ConvergenceError
    from spdchom.sources import PumpParams, gen_pump
    g = GridSpec(32, 32, 32, 7.8e-3, 7.8e-3, 2.3)
    p = gen_pump(g, PumpParams())
    noise = NoiseParams(0.5, 1)
    s, i = gen_vacuum_field(g, noise, "signal"), gen_vacuum_field(g, noise, "idler")
    with pytest.raises(ConvergenceError):
        propagate_crystal(p, s, i, CrystalParams(g=40.0, n_steps=8), check_convergence=True)


def test_crystal_rejects_mixed_grids(small_grid):
    other = GridSpec(8, 8, 8, 0.01, 0.01, 1.0)
    p = plane_wave(small_grid, 1.0, "pump", "V")
    s = plane_wave(other, 0.0, "signal")
    with pytest.raises(ConfigurationError):
        propagate_crystal(p, s, s.with_amplitude(s.amplitude, beam="idler"), CrystalParams())
