"""Space-time computational grid, field containers and unitary transforms.

Units used throughout the package: transverse positions in mm, transverse
spatial frequencies in mm^-1, time in ps, temporal frequencies in THz and
wavelengths in nm.

Spectral domains are stored zero-frequency centred.  The field envelope
carries the optical carrier ``exp(i(k z - w t))``, so a temporal spectral bin
``nu_t`` (numpy forward-FFT convention) corresponds to the optical frequency
``c / lambda_0 - nu_t``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
import scipy.fft as sfft

C_MM_PER_PS = 0.299792458
C_NM_THZ = 299792.458  # c in nm * THz

NEAR_TIME = "near-field-time"
FAR_TIME = "far-field-time"
NEAR_FREQ = "near-field-frequency"
FAR_FREQ = "far-field-frequency"
DOMAINS = (NEAR_TIME, FAR_TIME, NEAR_FREQ, FAR_FREQ)

BEAMS = ("pump", "signal", "idler", "port1", "port2")
POLARIZATIONS = ("H", "V")

_XY_FLIP = {NEAR_TIME: FAR_TIME, FAR_TIME: NEAR_TIME,
            NEAR_FREQ: FAR_FREQ, FAR_FREQ: NEAR_FREQ}
_T_FLIP = {NEAR_TIME: NEAR_FREQ, NEAR_FREQ: NEAR_TIME,
           FAR_TIME: FAR_FREQ, FAR_FREQ: FAR_TIME}


class ConfigurationError(ValueError):
    """Raised for invalid simulation parameters."""


class DomainError(ValueError):
    """Raised when a field is handed to an operation in the wrong domain."""


def _is_pow2(n):
    return isinstance(n, (int, np.integer)) and n > 0 and (n & (n - 1)) == 0


def centered_axis(n, step):
    return (np.arange(n) - n // 2) * step


@dataclass(frozen=True)
class GridSpec:
    n_x: int
    n_y: int
    n_t: int
    dx: float
    dy: float
    dt: float
    wavelength_pump: float = 354.7

    def __post_init__(self):
        for name in ("n_x", "n_y", "n_t"):
            if not _is_pow2(getattr(self, name)):
                raise ConfigurationError(f"{name}={getattr(self, name)} is not a positive power of two")
        for name in ("dx", "dy", "dt", "wavelength_pump"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        lam = self.wavelength_axis
        if not np.all(np.diff(lam) > 0):
            raise ConfigurationError("temporal window too fine: wavelength axis is not monotonic")

    @property
    def shape(self):
        return (self.n_x, self.n_y, self.n_t)

    @property
    def wavelength_signal(self):
        return 2.0 * self.wavelength_pump

    @property
    def window_x(self):
        return self.n_x * self.dx

    @property
    def window_y(self):
        return self.n_y * self.dy

    @property
    def window_t(self):
        return self.n_t * self.dt

    @property
    def dnu_x(self):
        return 1.0 / (self.n_x * self.dx)

    @property
    def dnu_y(self):
        return 1.0 / (self.n_y * self.dy)

    @property
    def dnu_t(self):
        return 1.0 / (self.n_t * self.dt)

    @cached_property
    def x(self):
        return centered_axis(self.n_x, self.dx)

    @cached_property
    def y(self):
        return centered_axis(self.n_y, self.dy)

    @cached_property
    def t(self):
        return centered_axis(self.n_t, self.dt)

    @cached_property
    def nu_x(self):
        return centered_axis(self.n_x, self.dnu_x)

    @cached_property
    def nu_y(self):
        return centered_axis(self.n_y, self.dnu_y)

    @cached_property
    def nu_t(self):
        return centered_axis(self.n_t, self.dnu_t)

    def optical_frequency(self, wavelength_center):
        """Absolute optical frequency (THz) of each temporal bin for a carrier."""
        return C_NM_THZ / wavelength_center - self.nu_t

    @cached_property
    def wavelength_axis(self):
        """Wavelength (nm) of each temporal bin around the degenerate carrier."""
        return C_NM_THZ / self.optical_frequency(self.wavelength_signal)

    def wavelength_of(self, wavelength_center):
        return C_NM_THZ / self.optical_frequency(wavelength_center)

    def check_window(self, sigma_x, sigma_y, sigma_t, n_sigma=4.0):
        """Warn when a beam of the given amplitude widths is not covered by n_sigma."""
        small = [name for name, w, s in (("x", self.window_x, sigma_x),
                                         ("y", self.window_y, sigma_y),
                                         ("t", self.window_t, sigma_t)) if w < n_sigma * s]
        if small:
            warnings.warn(f"grid window smaller than {n_sigma} sigma along {', '.join(small)}",
                          stacklevel=2)
        return not small


def make_grid(config):
    """Build a :class:`GridSpec` from a mapping or an object with grid attributes."""
    if isinstance(config, GridSpec):
        return config
    get = config.get if isinstance(config, dict) else lambda k, d=None: getattr(config, k, d)
    try:
        return GridSpec(n_x=int(get("n_x")), n_y=int(get("n_y")), n_t=int(get("n_t")),
                        dx=float(get("dx")), dy=float(get("dy")), dt=float(get("dt")),
                        wavelength_pump=float(get("wavelength_pump", 354.7)))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"invalid grid section: {exc}") from exc


@dataclass(frozen=True, eq=False)
class ComplexField3D:
    amplitude: np.ndarray
    grid: GridSpec
    beam: str
    polarization: str = "H"
    domain: str = NEAR_TIME
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.amplitude.shape != self.grid.shape:
            raise ConfigurationError(
                f"amplitude shape {self.amplitude.shape} does not match grid {self.grid.shape}")
        if self.beam not in BEAMS:
            raise ConfigurationError(f"unknown beam label {self.beam!r}")
        if self.polarization not in POLARIZATIONS:
            raise ConfigurationError(f"unknown polarization {self.polarization!r}")
        if self.domain not in DOMAINS:
            raise DomainError(f"unknown domain {self.domain!r}")

    def with_amplitude(self, amplitude, **changes):
        return replace(self, amplitude=amplitude, **changes)

    def power(self):
        return float(np.sum(np.abs(self.amplitude) ** 2))

    @property
    def is_near(self):
        return self.domain in (NEAR_TIME, NEAR_FREQ)

    @property
    def is_time(self):
        return self.domain in (NEAR_TIME, FAR_TIME)

    def require(self, *domains):
        if self.domain not in domains:
            raise DomainError(f"{self.beam} field is in {self.domain}, expected one of {domains}")

    def __add__(self, other):
        self._check_compatible(other)
        return self.with_amplitude(self.amplitude + other.amplitude)

    def __sub__(self, other):
        self._check_compatible(other)
        return self.with_amplitude(self.amplitude - other.amplitude)

    def _check_compatible(self, other):
        if other.grid != self.grid:
            raise ConfigurationError("fields live on different grids")
        if other.domain != self.domain:
            raise DomainError(f"cannot combine {self.domain} with {other.domain}")


@dataclass(frozen=True)
class Image2D:
    values: np.ndarray
    axis_x: np.ndarray
    axis_y: np.ndarray
    units: str = "mm^-1"
    integration: str = "time-integrated"

    def __post_init__(self):
        if self.values.shape != (len(self.axis_x), len(self.axis_y)):
            raise ConfigurationError("image shape does not match its axes")
        if np.any(self.values < 0):
            raise ValueError("image values must be non-negative")


# unitary transforms on centred storage


def _fft(a, axes):
    return sfft.fftshift(sfft.fftn(sfft.ifftshift(a, axes=axes), axes=axes, norm="ortho"), axes=axes)


def _ifft(a, axes):
    return sfft.fftshift(sfft.ifftn(sfft.ifftshift(a, axes=axes), axes=axes, norm="ortho"), axes=axes)


def fft_xy(f):
    f.require(NEAR_TIME, NEAR_FREQ)
    return f.with_amplitude(_fft(f.amplitude, (0, 1)), domain=_XY_FLIP[f.domain])


def ifft_xy(f):
    f.require(FAR_TIME, FAR_FREQ)
    return f.with_amplitude(_ifft(f.amplitude, (0, 1)), domain=_XY_FLIP[f.domain])


def fft_t(f):
    f.require(NEAR_TIME, FAR_TIME)
    return f.with_amplitude(_fft(f.amplitude, (2,)), domain=_T_FLIP[f.domain])


def ifft_t(f):
    f.require(NEAR_FREQ, FAR_FREQ)
    return f.with_amplitude(_ifft(f.amplitude, (2,)), domain=_T_FLIP[f.domain])


def to_domain(f, domain):
    """Route a field to ``domain`` through the transform state machine."""
    if domain not in DOMAINS:
        raise DomainError(f"unknown domain {domain!r}")
    if f.is_near != (domain in (NEAR_TIME, NEAR_FREQ)):
        f = fft_xy(f) if f.is_near else ifft_xy(f)
    if f.is_time != (domain in (NEAR_TIME, FAR_TIME)):
        f = fft_t(f) if f.is_time else ifft_t(f)
    return f


def far_field_image(amplitude_far, grid):
    """Time-integrated intensity of a far-field amplitude array."""
    return Image2D(np.sum(np.abs(amplitude_far) ** 2, axis=2), grid.nu_x, grid.nu_y)
