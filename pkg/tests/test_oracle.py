import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spdchom.grid import ConfigurationError
from spdchom.oracle import (GaussianBiphotonParams, biphoton_wavefunction, coincidence_profile,
                            integrated_coincidence, joint_probability, quadrature_coincidence,
                            quadrature_coincidence_tensor, reference_total, reflected_peak_separation,
                            temporal_rate)

P = GaussianBiphotonParams.from_measured_widths(2.4, 39.4)


def test_measured_width_conversion():
    two_pi = 2 * np.pi
    assert P.sigma_q == pytest.approx(np.sqrt(2) * two_pi * 2.4)
    assert P.sigma_spdc == pytest.approx(2 * np.sqrt(2) * two_pi * 39.4)
    # the coincidence peak |Phi|^2 versus the momentum sum has intensity std 2 pi * 2.4
    q = np.linspace(-150, 150, 6001)
    prof = coincidence_profile(np.stack([q, 0 * q], -1), P)
    assert np.sqrt(np.sum(prof * q ** 2) / np.sum(prof)) == pytest.approx(two_pi * 2.4, rel=1e-6)


def test_single_beam_marginal_width():
    """Numerical marginal of |Phi|^2 over the idler gives the stated single-beam std."""
    p = GaussianBiphotonParams(2.0, 50.0)
    qs = np.linspace(-150, 150, 1501)
    qi = np.linspace(-150, 150, 1501)
    S, I = np.meshgrid(qs, qi, indexing="ij")
    phi = p.phi0 * np.exp(-(S + I) ** 2 / (2 * p.sigma_q ** 2)) * np.exp(-(S - I) ** 2 / (2 * p.sigma_spdc ** 2))
    marg = np.sum(phi ** 2, axis=1)
    std = np.sqrt(np.sum(marg * qs ** 2) / np.sum(marg))
    exact = np.sqrt((p.sigma_q ** 2 + p.sigma_spdc ** 2) / 8)
    assert std == pytest.approx(exact, rel=1e-6)
    # and for sigma_q << sigma_spdc that is sigma_spdc / (2 sqrt 2)
    assert exact == pytest.approx(p.sigma_spdc / (2 * np.sqrt(2)), rel=1e-3)


def test_wavefunction_symmetry():
    qs, qi = np.array([1.0, -2.0]), np.array([0.5, 3.0])
    assert biphoton_wavefunction(qs, qi, P) == pytest.approx(biphoton_wavefunction(qi, qs, P))
    assert biphoton_wavefunction(qs, -qs, P) == pytest.approx(np.exp(-4 * np.sum(qs ** 2) / (2 * P.sigma_spdc ** 2)))


def test_params_validated():
    with pytest.raises(ConfigurationError):
        GaussianBiphotonParams(0.0, 1.0)


def test_no_tilt_gives_zero_coincidences():
    assert integrated_coincidence(0.0, 0.0, P) == 0.0
    q = np.array([0.3, -0.7])
    assert joint_probability(q, np.array([0.1, 0.2]), np.zeros(2), np.zeros(2), P) == pytest.approx(0.0)


def test_large_tilt_gives_half():
    c0 = reference_total(P)
    assert integrated_coincidence(10 * P.sigma_q, 0.0, P) / c0 == pytest.approx(0.5)
    assert integrated_coincidence(0.0, 10 * P.sigma_spdc, P) / c0 == pytest.approx(0.5)


def test_temporal_rate_limits():
    assert temporal_rate(np.zeros(2), 0.0, P) == 0.0
    assert temporal_rate(np.zeros(2), 100.0, P) == pytest.approx(0.5 * P.phi0 ** 2)


def test_reference_total_is_twice_phi_squared_integral():
    # analytic: each axis contributes int exp(-d^2/sq^2) exp(-u^2/ss^2) du dd / 2 (u = 2 q_s - d)
    per_axis = np.pi * P.sigma_q * P.sigma_spdc / 2
    assert reference_total(P) == pytest.approx(2 * per_axis ** 2)


@settings(max_examples=15, deadline=None)
@given(st.floats(0, 3), st.floats(0, 3), st.floats(0.5, 10), st.floats(10, 80))
def test_tensor_quadrature_matches_closed_form(fx, fy, nu_q, nu_s):
    p = GaussianBiphotonParams.from_measured_widths(nu_q, nu_s)
    dx, dy = fx * p.sigma_q, fy * p.sigma_spdc
    exact = integrated_coincidence(dx, dy, p)
    value, _ = quadrature_coincidence_tensor(dx, dy, p)
    if exact > 1e-12 * reference_total(p):
        assert value == pytest.approx(exact, rel=1e-6)
    else:
        assert abs(value) < 1e-10 * reference_total(p)


def test_four_dimensional_quadrature_cross_check():
    p = GaussianBiphotonParams(3.0, 6.0)
    for dx, dy in ((2.0, 4.0), (4.0, 0.0)):
        v4, _ = quadrature_coincidence(dx, dy, p)
        assert v4 == pytest.approx(integrated_coincidence(dx, dy, p), rel=1e-6)


def test_reflected_peak_displaced_by_twice_x_tilt():
    p = GaussianBiphotonParams(3.0, 200.0)
    axis = np.linspace(-40, 40, 8001)
    d = 7.0
    t, r = reflected_peak_separation(np.array([0.0, 0.0]), p, np.array([d, 5.0]), np.array([d, -5.0]), axis)
    assert t == pytest.approx(0.0, abs=0.02)
    assert r == pytest.approx(2 * d, abs=0.02)
