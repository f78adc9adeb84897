"""Wigner vacuum inputs for signal and idler, and the Gaussian pump pulse."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import NEAR_TIME, ComplexField3D, ConfigurationError, GridSpec

# stream index per beam inside one realization
_BEAM_STREAM = {"signal": 1, "idler": 2}


@dataclass(frozen=True)
class PumpParams:
    sigma_t: float = 42.0       # ps, amplitude std
    sigma_x: float = 0.1        # mm, amplitude std
    sigma_y: float = 0.1        # mm
    wavelength: float = 354.7   # nm
    peak_amplitude: float = 1.0e4  # sqrt(photons per cell)

    def __post_init__(self):
        for name in ("sigma_t", "sigma_x", "sigma_y", "wavelength", "peak_amplitude"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"pump {name} must be positive")


@dataclass(frozen=True)
class NoiseParams:
    variance_per_mode: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not self.variance_per_mode > 0:
            raise ConfigurationError("variance_per_mode must be positive")


def rng_for(seed, realization, stream):
    """Independent generator for (seed, realization index, stream)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(realization), int(stream)))
    return np.random.Generator(np.random.PCG64(ss))


def gen_vacuum_field(grid: GridSpec, noise: NoiseParams, beam: str, realization: int = 0):
    """Circular complex Gaussian white noise with ``<|a|^2> = variance_per_mode``.

    Signal and idler draw from separate streams of the same seed, so one
    ``(seed, realization)`` pair fixes both fields bit for bit.
    """
    if beam not in _BEAM_STREAM:
        raise ConfigurationError(f"vacuum fields exist for signal and idler only, not {beam!r}")
    rng = rng_for(noise.seed, realization, _BEAM_STREAM[beam])
    scale = np.sqrt(noise.variance_per_mode / 2.0)
    z = rng.standard_normal((2,) + grid.shape)
    amp = scale * (z[0] + 1j * z[1])
    pol = "H" if beam == "signal" else "V"
    return ComplexField3D(amp, grid, beam, pol, NEAR_TIME)


def gen_pump(grid: GridSpec, pump: PumpParams, max_clip=0.5):
    """Separable Gaussian pump envelope with flat phase, centred on the grid.

    Raises when more than ``max_clip`` of the untruncated power falls outside
    the window; warns below 4 sigma coverage.
    """
    if abs(pump.wavelength - grid.wavelength_pump) > 1e-9 * grid.wavelength_pump:
        raise ConfigurationError("pump wavelength differs from the grid centre wavelength")
    grid.check_window(pump.sigma_x, pump.sigma_y, pump.sigma_t)
    gx = np.exp(-grid.x ** 2 / (2 * pump.sigma_x ** 2))
    gy = np.exp(-grid.y ** 2 / (2 * pump.sigma_y ** 2))
    gt = np.exp(-grid.t ** 2 / (2 * pump.sigma_t ** 2))
    kept = 1.0
    for g, s, d in ((gx, pump.sigma_x, grid.dx), (gy, pump.sigma_y, grid.dy), (gt, pump.sigma_t, grid.dt)):
        # |g|^2 is a Gaussian of std s/sqrt(2): its full integral is s*sqrt(pi)
        kept *= np.sum(g ** 2) * d / (s * np.sqrt(np.pi))
    if 1.0 - kept > max_clip:
        raise ConfigurationError(f"pump clipped by the grid window ({100 * (1 - kept):.0f}% power lost)")
    amp = pump.peak_amplitude * gx[:, None, None] * gy[None, :, None] * gt[None, None, :]
    return ComplexField3D(amp.astype(complex), grid, "pump", "V", NEAR_TIME)


def plane_wave(grid, value, beam, polarization="H"):
    """Uniform field, used by the single-mode solver checks."""
    amp = np.full(grid.shape, value, dtype=complex)
    return ComplexField3D(amp, grid, beam, polarization, NEAR_TIME)
