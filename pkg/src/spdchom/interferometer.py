"""HOM interferometer: delay, defocus, HWP relabel, tilted 50/50 beamsplitter,
interference filters and time-integrated far-field detection.

The crystal exit face is imaged onto the beamsplitter with unit
magnification, so imaging is the identity apart from the optional
defocus and a lateral offset that puts the walk-off-displaced beam axis on
the mirror axis of the beamsplitter.  A reflection mirrors the transverse momentum ``q_x -> -q_x``; a
beamsplitter tilt shifts the reflected signal by ``(dnu_x, dnu_y)`` and the
reflected idler by ``(dnu_x, -dnu_y)``.  With that rule the two reflection
operators are adjoint to each other and the mixing is exactly unitary.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.fft as sfft

from .grid import (FAR_FREQ, FAR_TIME, NEAR_FREQ, NEAR_TIME, ComplexField3D, ConfigurationError,
                   DomainError, Image2D, to_domain)

SQRT_HALF = np.sqrt(0.5)


@dataclass(frozen=True)
class InterferometerConfig:
    delay: float = 0.0          # ps, applied to the signal arm; > 0 means signal arrives later
    tilt_x: float = 0.0         # mm^-1, theta_BS / lambda_p
    tilt_y: float = 0.0         # mm^-1, phi_BS / lambda_p
    defocus_s: float = 0.0      # mm
    defocus_i: float = 0.0      # mm
    filter_center: float | None = 709.4   # nm; None disables the filters
    filter_sigma: float = 0.2   # nm, std of the intensity transmission
    mirror_axis_x: float = 0.0  # mm, crystal-exit position imaged onto the BS mirror axis

    def __post_init__(self):
        if self.defocus_s < 0 or self.defocus_i < 0:
            raise ConfigurationError("defocus distances must be non-negative")
        if self.filter_center is not None and not self.filter_sigma > 0:
            raise ConfigurationError("filter width must be positive")

    @classmethod
    def from_tilt_angles(cls, theta_bs, phi_bs, wavelength_pump=354.7, **kw):
        lam_mm = wavelength_pump * 1e-6
        return cls(tilt_x=theta_bs / lam_mm, tilt_y=phi_bs / lam_mm, **kw)

    def snapshot(self):
        return asdict(self)


@dataclass(frozen=True)
class DetectorOutput:
    image_1: Image2D
    image_2: Image2D
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (np.array_equal(self.image_1.axis_x, self.image_2.axis_x)
                and np.array_equal(self.image_1.axis_y, self.image_2.axis_y)):
            raise ConfigurationError("detector images on different axes")


def _carrier(f):
    g = f.grid
    return g.wavelength_pump if f.beam == "pump" else g.wavelength_signal


def apply_delay(f, delay):
    """Translate the envelope by ``delay`` ps through the spectral phase exp(-2i pi nu_t delay)."""
    if delay == 0:
        return f
    if abs(delay) > f.grid.window_t / 4:
        raise ConfigurationError(f"delay {delay} ps exceeds a quarter of the time window")
    ramp = np.exp(-2j * np.pi * f.grid.nu_t * delay)
    if f.is_time:
        g = to_domain(f, NEAR_FREQ if f.is_near else FAR_FREQ)
        return to_domain(g.with_amplitude(g.amplitude * ramp), f.domain)
    return f.with_amplitude(f.amplitude * ramp)


def recenter(f, x0):
    """Translate the transverse content by ``-x0`` mm along x (exact Fourier shift)."""
    if x0 == 0:
        return f
    nu = sfft.fftfreq(f.grid.n_x, f.grid.dx)
    if f.is_near:
        ramp = np.exp(2j * np.pi * nu * x0)[:, None, None]
        amp = sfft.ifft(sfft.fft(f.amplitude, axis=0) * ramp, axis=0)
    else:
        amp = f.amplitude * np.exp(2j * np.pi * f.grid.nu_x * x0)[:, None, None]
    return f.with_amplitude(amp)


def align_mirror_axis(signal_images, idler_images, axis_x, baseline):
    """Mirror-axis position from ensemble-mean near-field images.

    Returns the midpoint of the signal and idler centroids of the mean excess
    intensity (image minus the vacuum ``baseline`` per pixel), which is where
    the reflected signal image overlaps the transmitted idler image.
    """
    cents = []
    for stack in (signal_images, idler_images):
        prof = np.clip(np.mean(stack, axis=0).sum(axis=1) - baseline * stack[0].shape[1], 0.0, None)
        if prof.sum() <= 0:
            return 0.0
        cents.append(float(np.sum(prof * axis_x) / prof.sum()))
    return 0.5 * (cents[0] + cents[1])


def defocus_multiplier(grid, d, wavelength_center):
    """exp(-i pi lambda d (nu_x^2 + nu_y^2)) with the wavelength of each temporal slice."""
    lam_mm = grid.wavelength_of(wavelength_center) * 1e-6
    nu2 = grid.nu_x[:, None, None] ** 2 + grid.nu_y[None, :, None] ** 2
    return np.exp(-1j * np.pi * d * lam_mm[None, None, :] * nu2)


def apply_defocus(f, d):
    """Paraxial free-space propagation over ``d`` mm; returns the input domain."""
    if d < 0:
        raise ConfigurationError("defocus distance must be non-negative")
    if d == 0:
        return f
    g = to_domain(f, FAR_FREQ)
    g = g.with_amplitude(g.amplitude * defocus_multiplier(f.grid, d, _carrier(f)))
    return to_domain(g, f.domain)


def parity_x(f):
    """Mirror x (and nu_x) about zero; exact permutation on the centred grid."""
    n = f.grid.n_x
    idx = (-np.arange(n) + 2 * (n // 2)) % n
    # centred index k holds coordinate (k - n/2); its mirror sits at n - k (mod n)
    return f.with_amplitude(f.amplitude[idx])


def tilt_ramp(axis, shift):
    """exp(2i pi shift u) on a centred axis, with the wrap-around sample made real.

    The first sample sits at -L/2, which is its own mirror image; giving it a
    real unit value keeps ramp(-shift) equal to the mirror of ramp(shift), so
    reflection with tilt stays unitary for any shift.
    """
    r = np.exp(2j * np.pi * shift * axis)
    c = np.cos(2 * np.pi * shift * axis[0])
    r[0] = 1.0 if c >= 0 else -1.0
    return r


def shift_momentum(f, dnu_x, dnu_y, method="ramp"):
    """Translate the far-field content by (dnu_x, dnu_y) mm^-1.

    ``method="ramp"`` multiplies the near field by a linear phase (any shift);
    ``method="roll"`` rolls the far field and needs whole-bin shifts.
    """
    if dnu_x == 0 and dnu_y == 0:
        return f
    g = f.grid
    if method == "roll":
        mx, my = dnu_x / g.dnu_x, dnu_y / g.dnu_y
        if abs(mx - round(mx)) > 1e-9 or abs(my - round(my)) > 1e-9:
            raise ConfigurationError("roll shifts need whole frequency bins")
        h = to_domain(f, FAR_TIME if f.is_time else FAR_FREQ)
        h = h.with_amplitude(np.roll(h.amplitude, (round(mx), round(my)), axis=(0, 1)))
        return to_domain(h, f.domain)
    if method != "ramp":
        raise ValueError(f"unknown shift method {method!r}")
    near = to_domain(f, NEAR_FREQ if not f.is_time else NEAR_TIME)
    ramp = tilt_ramp(g.x, dnu_x)[:, None, None] * tilt_ramp(g.y, dnu_y)[None, :, None]
    return to_domain(near.with_amplitude(near.amplitude * ramp), f.domain)


def reflect(f, dnu_x, dnu_y, method="ramp"):
    """Reflected copy of ``f`` at a tilted interface: mirror then momentum shift."""
    return shift_momentum(parity_x(f), dnu_x, dnu_y, method)


def half_wave_plate(f):
    """Rotate the polarization label by 90 degrees (V <-> H)."""
    return f.with_amplitude(f.amplitude, polarization="H" if f.polarization == "V" else "V")


def beamsplitter_mix(E_s, E_i, config: InterferometerConfig, method="ramp"):
    """Balanced lossless beamsplitter with reflection parity and tilt.

    E_1 = (E_i,t + i E_s,r) / sqrt(2),  E_2 = (E_s,t + i E_i,r) / sqrt(2)
    """
    if E_s.grid != E_i.grid:
        raise ConfigurationError("beamsplitter inputs on different grids")
    if E_s.domain != E_i.domain:
        raise DomainError("beamsplitter inputs in different domains")
    if E_s.polarization != E_i.polarization:
        raise ConfigurationError("beamsplitter inputs are distinguishable by polarization; apply the HWP")
    s_r = reflect(E_s, config.tilt_x, config.tilt_y, method)
    i_r = reflect(E_i, config.tilt_x, -config.tilt_y, method)
    a1 = SQRT_HALF * (E_i.amplitude + 1j * s_r.amplitude)
    a2 = SQRT_HALF * (E_s.amplitude + 1j * i_r.amplitude)
    return (ComplexField3D(a1, E_s.grid, "port1", E_s.polarization, E_s.domain),
            ComplexField3D(a2, E_s.grid, "port2", E_s.polarization, E_s.domain))


def filter_transmission(grid, center, sigma, wavelength_center=None):
    """Gaussian intensity transmission on the temporal-frequency bins."""
    lam = grid.wavelength_of(wavelength_center or grid.wavelength_signal)
    if not lam[0] <= center <= lam[-1]:
        raise ConfigurationError(f"filter centre {center} nm outside the grid span "
                                 f"[{lam[0]:.3f}, {lam[-1]:.3f}] nm")
    return np.exp(-(lam - center) ** 2 / (2 * sigma ** 2))


def spectral_filter(f, center, sigma):
    f.require(NEAR_FREQ, FAR_FREQ)
    amp_t = np.sqrt(filter_transmission(f.grid, center, sigma, _carrier(f)))
    return f.with_amplitude(f.amplitude * amp_t)


def detect_far_field(f):
    """Camera in the lens focal plane with no time resolution: sum_t |FFT_xy E|^2."""
    f.require(NEAR_TIME, NEAR_FREQ)
    far = sfft.fftshift(sfft.fft2(sfft.ifftshift(f.amplitude, axes=(0, 1)), axes=(0, 1), norm="ortho"),
                        axes=(0, 1))
    return Image2D(np.einsum("ijk,ijk->ij", far.real, far.real) + np.einsum("ijk,ijk->ij", far.imag, far.imag),
                   f.grid.nu_x, f.grid.nu_y)


def near_field_image(f):
    f.require(NEAR_TIME, NEAR_FREQ)
    return Image2D(np.sum(np.abs(f.amplitude) ** 2, axis=2), f.grid.x, f.grid.y, units="mm")


def time_spectrum(f):
    """Space-integrated intensity versus time."""
    f = to_domain(f, NEAR_TIME)
    return np.sum(np.abs(f.amplitude) ** 2, axis=(0, 1))


def frequency_spectrum(f):
    """Space-integrated spectral intensity on the nu_t bins."""
    f = to_domain(f, NEAR_FREQ)
    return np.sum(np.abs(f.amplitude) ** 2, axis=(0, 1))


def _filtered(f, config):
    if config.filter_center is None:
        return f
    return spectral_filter(f, config.filter_center, config.filter_sigma)


def run_interferometer(E_s, E_i, config: InterferometerConfig, realization=0, method="ramp"):
    """Crystal-output fields to the pair of detector images.

    defocus each arm -> delay the signal arm -> HWP on the idler -> mix ->
    filter both outputs -> time-integrated far-field detection.
    """
    s = recenter(to_domain(E_s, NEAR_FREQ), config.mirror_axis_x)
    i = recenter(to_domain(E_i, NEAR_FREQ), config.mirror_axis_x)
    s = apply_defocus(s, config.defocus_s)
    i = apply_defocus(i, config.defocus_i)
    s = apply_delay(s, config.delay)
    if i.polarization != s.polarization:
        i = half_wave_plate(i)
    e1, e2 = beamsplitter_mix(s, i, config, method)
    e1, e2 = _filtered(e1, config), _filtered(e2, config)
    meta = {"realization": int(realization), "config": config.snapshot(), "label": "with-BS"}
    return DetectorOutput(detect_far_field(e1), detect_far_field(e2), meta)


def run_reference(E_s, E_i, config: InterferometerConfig, realization=0):
    """No-beamsplitter reference: filtered signal and idler far fields."""
    s = _filtered(to_domain(E_s, NEAR_FREQ), config)
    i = _filtered(to_domain(E_i, NEAR_FREQ), config)
    meta = {"realization": int(realization), "config": config.snapshot(), "label": "no-BS"}
    return DetectorOutput(detect_far_field(s), detect_far_field(i), meta)


class InterferometerBatch:
    """Runs many interferometer settings on one realization's crystal output.

    Re-centred and defocused arms are computed once per setting and reused.
    """

    def __init__(self, E_s, E_i, realization=0):
        self.s = to_domain(E_s, NEAR_FREQ)
        self.i = to_domain(E_i, NEAR_FREQ)
        if self.i.polarization != self.s.polarization:
            self.i = half_wave_plate(self.i)
        self.realization = realization
        self._defocused = {}

    def _arm(self, which, d, x0):
        key = (which, d, x0)
        if key not in self._defocused:
            base = self.s if which == "s" else self.i
            self._defocused[key] = apply_defocus(recenter(base, x0), d)
        return self._defocused[key]

    def run(self, config: InterferometerConfig):
        s = apply_delay(self._arm("s", config.defocus_s, config.mirror_axis_x), config.delay)
        i = self._arm("i", config.defocus_i, config.mirror_axis_x)
        e1, e2 = beamsplitter_mix(s, i, config)
        e1, e2 = _filtered(e1, config), _filtered(e2, config)
        meta = {"realization": int(self.realization), "config": config.snapshot(), "label": "with-BS"}
        return DetectorOutput(detect_far_field(e1), detect_far_field(e2), meta)

    def reference(self, config: InterferometerConfig):
        s = _filtered(self.s, config)
        i = _filtered(self.i, config)
        meta = {"realization": int(self.realization), "config": config.snapshot(), "label": "no-BS"}
        return DetectorOutput(detect_far_field(s), detect_far_field(i), meta)
