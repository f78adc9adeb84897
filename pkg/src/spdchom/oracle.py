"""Closed-form Gaussian biphoton model and its quadrature check.

Momenta are in rad/mm (q = 2 pi nu).  The far-field two-photon amplitude is

    Phi(q_s, q_i) = Phi_0 exp(-|q_s + q_i|^2 / (2 s_q^2)) exp(-|q_s - q_i|^2 / (2 s_pm^2))

where ``s_q`` is the pump angular-spectrum width and ``s_pm`` the phase-matching
width.  A beamsplitter tilt shifts the reflected signal by ``dq_s`` and the
reflected idler by ``dq_i``; a physical tilt has ``dq_s = (d_x, d_y)`` and
``dq_i = (d_x, -d_y)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .grid import ConfigurationError


@dataclass(frozen=True)
class GaussianBiphotonParams:
    sigma_q: float       # rad/mm
    sigma_spdc: float    # rad/mm
    sigma_t: float = 1.0  # ps
    phi0: float = 1.0

    def __post_init__(self):
        for name in ("sigma_q", "sigma_spdc", "sigma_t", "phi0"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")

    @classmethod
    def from_frequency_widths(cls, sigma_nu_q, sigma_nu_spdc, sigma_t=1.0, phi0=1.0):
        """Build from widths in mm^-1 (multiplied by 2 pi)."""
        return cls(2 * np.pi * sigma_nu_q, 2 * np.pi * sigma_nu_spdc, sigma_t, phi0)

    @classmethod
    def from_measured_widths(cls, sigma_nu_twin, sigma_nu_beam, sigma_t=1.0, phi0=1.0):
        """Build from measured far-field intensity widths (mm^-1).

        ``sigma_nu_twin`` is the std of the twin-beam coincidence peak
        |Phi|^2 versus the momentum sum, so sigma_q = sqrt(2) 2 pi sigma_nu_twin.
        ``sigma_nu_beam`` is the std of one beam's mean far-field intensity;
        for sigma_q << sigma_spdc that marginal is exp(-4 q^2 / sigma_spdc^2),
        so sigma_spdc = 2 sqrt(2) 2 pi sigma_nu_beam.
        """
        two_pi = 2 * np.pi
        return cls(np.sqrt(2) * two_pi * sigma_nu_twin, 2 * np.sqrt(2) * two_pi * sigma_nu_beam, sigma_t, phi0)


def _sq(v):
    v = np.asarray(v, dtype=float)
    return np.sum(v * v, axis=-1)


def biphoton_wavefunction(q_s, q_i, p: GaussianBiphotonParams):
    q_s = np.asarray(q_s, dtype=float)
    q_i = np.asarray(q_i, dtype=float)
    return p.phi0 * np.exp(-_sq(q_s + q_i) / (2 * p.sigma_q ** 2)) * np.exp(-_sq(q_s - q_i) / (2 * p.sigma_spdc ** 2))


def coincidence_profile(dq, p: GaussianBiphotonParams):
    """R_0: twin-beam coincidences versus the momentum sum ``dq``."""
    return p.phi0 ** 2 * np.exp(-_sq(dq) / p.sigma_q ** 2)


def temporal_rate(dq, delay, p: GaussianBiphotonParams):
    return 0.5 * coincidence_profile(dq, p) * (1.0 - np.exp(-np.asarray(delay, float) ** 2 / p.sigma_t ** 2))


def _axis_terms(u, d, shift_d, shift_u, p):
    """Transmitted and reflected pair amplitudes along one axis in (u, dq) coordinates.

    u = 2 q_s - dq; ``shift_d = dq_s + dq_i`` and ``shift_u = dq_s - dq_i``
    are that axis' components.
    """
    tt = np.exp(-d ** 2 / (2 * p.sigma_q ** 2)) * np.exp(-u ** 2 / (2 * p.sigma_spdc ** 2))
    rr = np.exp(-(d - shift_d) ** 2 / (2 * p.sigma_q ** 2)) * np.exp(-(u + shift_u) ** 2 / (2 * p.sigma_spdc ** 2))
    return tt, rr


def joint_probability(q_s, dq, dq_s, dq_i, p: GaussianBiphotonParams):
    """Coincidence density at q_1 (port 1) and -q_1 + dq (port 2), q_s being the signal momentum.

    Half the squared difference between the transmitted-pair amplitude and
    the reflected-pair amplitude with its tilt shifts.
    """
    q_s, dq, dq_s, dq_i = (np.asarray(v, dtype=float) for v in (q_s, dq, dq_s, dq_i))
    u = 2 * q_s - dq
    tx, rx = _axis_terms(u[..., 0], dq[..., 0], dq_s[0] + dq_i[0], dq_s[0] - dq_i[0], p)
    ty, ry = _axis_terms(u[..., 1], dq[..., 1], dq_s[1] + dq_i[1], dq_s[1] - dq_i[1], p)
    return 0.5 * p.phi0 ** 2 * (tx * ty - rx * ry) ** 2


def reference_total(p: GaussianBiphotonParams):
    """C_0: integral of the transmitted-pair term |Phi|^2 over (q_s, dq), times two."""
    per_axis = np.pi * p.sigma_q * p.sigma_spdc / 2.0
    return 2.0 * p.phi0 ** 2 * per_axis ** 2


def integrated_coincidence(dq_x, dq_y, p: GaussianBiphotonParams, c0=None):
    """Total coincidences for a tilt shifting the reflected beams by (dq_x, +-dq_y)."""
    c0 = reference_total(p) if c0 is None else c0
    dq_x = np.asarray(dq_x, float)
    dq_y = np.asarray(dq_y, float)
    return 0.5 * c0 * (1.0 - np.exp(-dq_x ** 2 / p.sigma_q ** 2) * np.exp(-dq_y ** 2 / p.sigma_spdc ** 2))


def _gl_rule(n, lo, hi):
    x, w = leggauss(n)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), w * half


def _box(p, dq_s, dq_i, n_sig):
    """Integration limits for (u, dq) per axis, u = 2 q_s - dq, covering both terms."""
    lims = []
    for k in range(2):
        sh_d = dq_s[k] + dq_i[k]
        sh_u = dq_s[k] - dq_i[k]
        d_lim = (min(0.0, sh_d) - n_sig * p.sigma_q, max(0.0, sh_d) + n_sig * p.sigma_q)
        u_lim = (min(0.0, -sh_u) - n_sig * p.sigma_spdc, max(0.0, -sh_u) + n_sig * p.sigma_spdc)
        lims.append((u_lim, d_lim))
    return lims


def quadrature_coincidence(dq_x, dq_y, p: GaussianBiphotonParams, rtol=1e-8, n_start=16,
                           n_max=128, n_sig=6.0):
    """Integrate :func:`joint_probability` over q_s and dq (4D) by tensor Gauss-Legendre.

    The signal momentum is sampled through u = 2 q_s - dq (Jacobian 1/2 per
    axis).  The rule is refined (n -> 1.5 n) until two successive estimates
    differ by less than ``rtol`` relative.  Returns (value, n_used).
    """
    dq_s = np.array([dq_x, dq_y], float)
    dq_i = np.array([dq_x, -dq_y], float)
    (ux_lim, dx_lim), (uy_lim, dy_lim) = _box(p, dq_s, dq_i, n_sig)
    prev = None
    n = n_start
    while n <= n_max:
        ux, wux = _gl_rule(n, *ux_lim)
        dx, wdx = _gl_rule(n, *dx_lim)
        uy, wuy = _gl_rule(n, *uy_lim)
        dy, wdy = _gl_rule(n, *dy_lim)
        DX, UY, DY = np.meshgrid(dx, uy, dy, indexing="ij")
        W = 0.25 * wdx[:, None, None] * wuy[None, :, None] * wdy[None, None, :]
        dq = np.stack([DX, DY], -1)
        total = 0.0
        for a in range(n):                 # one u_x node at a time keeps memory at n^3
            q_s = 0.5 * (np.stack([np.full_like(UY, ux[a]), UY], -1) + dq)
            f = joint_probability(q_s, dq, dq_s, dq_i, p)
            total += wux[a] * float(np.sum(W * f))
        if prev is not None and abs(total - prev) <= rtol * max(abs(total), 1e-300):
            return total, n
        prev = total
        n = int(round(1.5 * n))
    raise RuntimeError(f"quadrature did not reach rtol={rtol} with n <= {n_max}")


def quadrature_coincidence_tensor(dq_x, dq_y, p: GaussianBiphotonParams, rtol=1e-8, n_start=16,
                                  n_max=512, n_sig=6.0):
    """Same tensor Gauss-Legendre rule as :func:`quadrature_coincidence`, summed axis by axis.

    The squared difference of products expands into three products of
    per-axis double sums, so each refinement costs O(n^2) instead of O(n^4).
    """
    dq_s = np.array([dq_x, dq_y], float)
    dq_i = np.array([dq_x, -dq_y], float)
    lims = _box(p, dq_s, dq_i, n_sig)
    prev = None
    n = n_start
    while n <= n_max:
        sums = []
        for k, (u_lim, d_lim) in enumerate(lims):
            u, wu = _gl_rule(n, *u_lim)
            d, wd = _gl_rule(n, *d_lim)
            U, D = np.meshgrid(u, d, indexing="ij")
            W = 0.5 * np.outer(wu, wd)
            tt, rr = _axis_terms(U, D, dq_s[k] + dq_i[k], dq_s[k] - dq_i[k], p)
            sums.append((np.sum(W * tt * tt), np.sum(W * tt * rr), np.sum(W * rr * rr)))
        (a_x, b_x, c_x), (a_y, b_y, c_y) = sums
        total = 0.5 * p.phi0 ** 2 * (a_x * a_y - 2 * b_x * b_y + c_x * c_y)
        if prev is not None and abs(total - prev) <= rtol * max(abs(total), 1e-300):
            return float(total), n
        prev = total
        n = int(round(1.5 * n))
    raise RuntimeError(f"quadrature did not reach rtol={rtol} with n <= {n_max}")


def reflected_peak_separation(q_s, p: GaussianBiphotonParams, dq_s, dq_i, axis_values):
    """Positions along dq_x (dq_y = 0) of the transmitted and reflected coincidence peaks.

    Evaluates the two amplitude terms separately at fixed ``q_s`` and returns
    their argmax on ``axis_values``.
    """
    dq_s = np.asarray(dq_s, float)
    dq_i = np.asarray(dq_i, float)
    u_x = 2 * q_s[0] - axis_values
    u_y = 2 * q_s[1] * np.ones_like(axis_values)
    tx, rx = _axis_terms(u_x, axis_values, dq_s[0] + dq_i[0], dq_s[0] - dq_i[0], p)
    ty, ry = _axis_terms(u_y, 0 * axis_values, dq_s[1] + dq_i[1], dq_s[1] - dq_i[1], p)
    return float(axis_values[np.argmax(tx * ty)]), float(axis_values[np.argmax(rx * ry)])
