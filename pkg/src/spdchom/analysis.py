"""Intensity-fluctuation correlations, Gaussian fits, Schmidt numbers and HOM dips.

Correlation maps are covariances of mean-subtracted images summed over pixel
pairs.  Far-field twin photons leave with opposite momenta, so far-field maps
pair pixel ``q`` of one detector with ``-q + D`` on the other (``pairing="sum"``);
near-field images and time traces pair ``r`` with ``r + D``
(``pairing="difference"``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft
from scipy.optimize import least_squares

from .grid import C_NM_THZ, ConfigurationError

PAIRINGS = ("sum", "difference")
_PAIRING_FOR_UNITS = {"mm^-1": "sum", "mm": "difference", "ps": "difference", "THz": "sum"}


@dataclass
class ImagePairEnsemble:
    """Stack of N image pairs sharing axes, e.g. both BS output ports."""

    images_1: np.ndarray
    images_2: np.ndarray
    axis_x: np.ndarray
    axis_y: np.ndarray
    units: str = "mm^-1"
    reference_label: str = "with-BS"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.images_1 = np.asarray(self.images_1, dtype=float)
        self.images_2 = np.asarray(self.images_2, dtype=float)
        if self.images_1.shape != self.images_2.shape or self.images_1.ndim != 3:
            raise ConfigurationError("image stacks must both have shape (N, n_x, n_y)")
        if self.images_1.shape[1:] != (len(self.axis_x), len(self.axis_y)):
            raise ConfigurationError("image stack does not match its axes")
        if self.reference_label not in ("with-BS", "no-BS"):
            raise ConfigurationError(f"unknown reference label {self.reference_label!r}")

    @property
    def n(self):
        return self.images_1.shape[0]

    @classmethod
    def from_outputs(cls, outputs, reference_label="with-BS"):
        outputs = list(outputs)
        if not outputs:
            raise ConfigurationError("empty ensemble")
        first = outputs[0].image_1
        return cls(np.stack([o.image_1.values for o in outputs]),
                   np.stack([o.image_2.values for o in outputs]),
                   first.axis_x, first.axis_y, first.units, reference_label,
                   {"realizations": [o.metadata.get("realization") for o in outputs]})


@dataclass
class CorrelationMap:
    """Covariance versus coordinate offset; 1D maps leave ``axis_y`` as None."""

    values: np.ndarray
    axis_x: np.ndarray
    axis_y: np.ndarray | None = None
    pairing: str = "sum"
    units: str = "mm^-1"
    n_samples: int = 0
    normalization: dict = field(default_factory=dict)

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("correlation map has non-finite values")

    @property
    def ndim(self):
        return self.values.ndim

    def peak_normalized(self):
        peak = float(np.max(self.values))
        out = CorrelationMap(self.values / peak, self.axis_x, self.axis_y, self.pairing, self.units,
                             self.n_samples, dict(self.normalization, kind="peak", peak=peak))
        return out


@dataclass
class FitResult:
    success: bool
    amplitude: float = np.nan
    center: tuple = ()
    sigma: tuple = ()
    offset: float = 0.0
    residual_norm: float = np.nan
    message: str = ""

    def as_dict(self, names=("x", "y")):
        out = {"fit_success": self.success, "amplitude": self.amplitude, "offset": self.offset,
               "residual_norm": self.residual_norm}
        for k, (c, s) in enumerate(zip(self.center, self.sigma)):
            out[f"center_{names[k]}"] = c
            out[f"sigma_{names[k]}"] = s
        return out


@dataclass
class DipScanResult:
    parameter: str
    values: np.ndarray          # (P,) or (P, 2)
    totals: np.ndarray          # summed coincidences per scan point
    reference_total: float
    rates: np.ndarray
    fit: FitResult
    metadata: dict = field(default_factory=dict)

    @property
    def residual_norm(self):
        return self.fit.residual_norm


def fluctuation_stack(stack):
    """Subtract the ensemble per-pixel mean (the deterministic part) from each entry."""
    stack = np.asarray(stack, dtype=float)
    if stack.shape[0] < 2:
        raise ConfigurationError("fluctuations need at least two realizations")
    return stack - stack.mean(axis=0)


# correlation maps


def _offset_axis(n, step):
    return (np.arange(2 * n - 1) - (n - 1)) * step


def _spectra(stack, pad, axes):
    return sfft.rfftn(stack, s=pad, axes=axes)


def _pair_spectrum(fa, fb, pairing):
    return fa * fb if pairing == "sum" else np.conj(fa) * fb


def _unwrap(corr, n_axes, shape, pairing):
    """Reorder a circular (padded) correlation into offsets -(n-1)..(n-1) per axis."""
    out = corr
    for ax, n in zip(range(-len(n_axes), 0), shape):
        if pairing == "sum":
            # entry m holds index sum i + j = m, i.e. offset m - 2 (n // 2) on centred
            # axes; for even n offset n - 1 has no support and comes back as rounding noise
            out = np.take(out, np.arange(2 * n - 1) + 2 * (n // 2) - (n - 1), axis=ax)
            if n % 2 == 0:
                last = [slice(None)] * out.ndim
                last[ax] = -1
                out[tuple(last)] = 0.0
        else:
            idx = (np.arange(2 * n - 1) - (n - 1)) % (2 * n)
            out = np.take(out, idx, axis=ax)
    return out


def _check_pairing(units, pairing):
    if pairing not in PAIRINGS:
        raise ConfigurationError(f"pairing must be one of {PAIRINGS}")
    expected = _PAIRING_FOR_UNITS.get(units)
    if expected is not None and expected != pairing:
        raise ConfigurationError(f"{pairing!r} pairing is incompatible with {units} coordinates")


def cross_covariance(stack_1, stack_2, pairing="sum"):
    """Sum over pixel pairs of mean-subtracted products, averaged over realizations.

    Works for stacks of shape (N, n) or (N, n_x, n_y).  Offsets run from
    -(n-1) to n-1 bins along each axis.
    """
    a = fluctuation_stack(stack_1)
    b = fluctuation_stack(stack_2)
    if a.shape != b.shape:
        raise ConfigurationError("stacks differ in shape")
    shape = a.shape[1:]
    axes = tuple(range(1, a.ndim))
    pad = tuple(2 * n for n in shape)
    spec = np.sum(_pair_spectrum(_spectra(a, pad, axes), _spectra(b, pad, axes), pairing), axis=0)
    corr = sfft.irfftn(spec, s=pad, axes=tuple(range(len(shape))))
    return _unwrap(corr, axes, shape, pairing) / a.shape[0]


def per_realization_covariance(stack_1, stack_2, pairing="sum"):
    """Each realization's contribution to :func:`cross_covariance` (their mean is that map)."""
    a = fluctuation_stack(stack_1)
    b = fluctuation_stack(stack_2)
    shape = a.shape[1:]
    axes = tuple(range(1, a.ndim))
    pad = tuple(2 * n for n in shape)
    corr = sfft.irfftn(_pair_spectrum(_spectra(a, pad, axes), _spectra(b, pad, axes), pairing),
                       s=pad, axes=axes)
    return _unwrap(corr, axes, shape, pairing)


@dataclass(frozen=True)
class WhitenessResult:
    max_abs_t: float
    n_se: float
    n_offsets: int

    @property
    def passed(self):
        return self.max_abs_t < self.n_se


def whiteness_test(stack_1, stack_2, pairing="sum", n_se=5.0):
    """Largest |map| / standard error over all offsets of a covariance map.

    The standard error per offset comes from the spread of the
    per-realization contributions.  Statistically independent stacks should
    stay below ``n_se`` everywhere.
    """
    per = per_realization_covariance(stack_1, stack_2, pairing)
    n = per.shape[0]
    mean = per.mean(axis=0)
    se = per.std(axis=0, ddof=1) / np.sqrt(n)
    ok = se > 1e-12 * max(float(np.max(se)), 1e-300)   # offsets without support carry no data
    t = np.abs(mean[ok]) / se[ok]
    return WhitenessResult(float(np.max(t)), float(n_se), int(ok.sum()))


class CorrelationAccumulator:
    """Streaming version of :func:`cross_covariance` for long ensembles.

    Keeps running sums of the images and of the pair spectra; pairs must be
    added in a fixed order for bit-reproducible results.
    """

    def __init__(self, shape, pairing="sum"):
        if pairing not in PAIRINGS:
            raise ConfigurationError(f"pairing must be one of {PAIRINGS}")
        self.shape = tuple(shape)
        self.pairing = pairing
        self.pad = tuple(2 * n for n in self.shape)
        self.axes = tuple(range(len(self.shape)))
        self.n = 0
        self.sum_1 = np.zeros(self.shape)
        self.sum_2 = np.zeros(self.shape)
        self.sum_12 = None

    def add(self, image_1, image_2):
        image_1 = np.asarray(image_1, dtype=float)
        image_2 = np.asarray(image_2, dtype=float)
        spec = _pair_spectrum(_spectra(image_1, self.pad, self.axes),
                              _spectra(image_2, self.pad, self.axes), self.pairing)
        self.sum_12 = spec if self.sum_12 is None else self.sum_12 + spec
        self.sum_1 += image_1
        self.sum_2 += image_2
        self.n += 1

    def mean_images(self):
        return self.sum_1 / self.n, self.sum_2 / self.n

    def covariance(self):
        if self.n < 2:
            raise ConfigurationError("fluctuations need at least two realizations")
        m1, m2 = self.mean_images()
        mean_spec = _pair_spectrum(_spectra(m1, self.pad, self.axes),
                                   _spectra(m2, self.pad, self.axes), self.pairing)
        spec = self.sum_12 - self.n * mean_spec
        corr = sfft.irfftn(spec, s=self.pad, axes=self.axes)
        return _unwrap(corr, self.axes, self.shape, self.pairing) / self.n


def momentum_correlation(ensemble: ImagePairEnsemble, pairing="sum"):
    """2D covariance map between the two image stacks of an ensemble."""
    _check_pairing(ensemble.units, pairing)
    vals = cross_covariance(ensemble.images_1, ensemble.images_2, pairing)
    dx = float(ensemble.axis_x[1] - ensemble.axis_x[0])
    dy = float(ensemble.axis_y[1] - ensemble.axis_y[0])
    nx, ny = ensemble.images_1.shape[1:]
    return CorrelationMap(vals, _offset_axis(nx, dx), _offset_axis(ny, dy), pairing, ensemble.units,
                          ensemble.n, {"kind": "covariance", "reference_label": ensemble.reference_label})


def map_from_accumulator(acc: CorrelationAccumulator, axes, units, label="with-BS"):
    steps = [float(a[1] - a[0]) for a in axes]
    offs = [_offset_axis(n, s) for n, s in zip(acc.shape, steps)]
    return CorrelationMap(acc.covariance(), offs[0], offs[1] if len(offs) > 1 else None, acc.pairing,
                          units, acc.n, {"kind": "covariance", "reference_label": label})


def temporal_spectral_correlation(spectra_1, spectra_2, axis, units, pairing=None):
    """1D covariance of time traces (``units="ps"``) or spectra (``units="THz"``).

    Times pair as ``t_i = t_s + D``; temporal-frequency bins pair as
    ``nu_i = -nu_s + D``, the conjugate-wavelength rule around degeneracy.
    """
    pairing = pairing or _PAIRING_FOR_UNITS.get(units, "difference")
    _check_pairing(units, pairing)
    vals = cross_covariance(spectra_1, spectra_2, pairing)
    step = float(axis[1] - axis[0])
    return CorrelationMap(vals, _offset_axis(len(axis), step), None, pairing, units,
                          np.asarray(spectra_1).shape[0], {"kind": "covariance"})


def frequency_to_wavelength_width(sigma_nu_thz, wavelength_nm):
    """Convert an optical-frequency width (THz) to a wavelength width (nm)."""
    return wavelength_nm ** 2 * sigma_nu_thz / C_NM_THZ


def wavelength_to_frequency_width(sigma_lambda_nm, wavelength_nm):
    return C_NM_THZ * sigma_lambda_nm / wavelength_nm ** 2


# Gaussian fitting


def _gauss(coords, amp, center, sigma):
    expo = 0.0
    for u, c, s in zip(coords, center, sigma):
        expo = expo + (u - c) ** 2 / (2.0 * s ** 2)
    return amp * np.exp(-expo)


def gaussian_fit(values, axes, fit_offset=True, offset=0.0, window=None, require_peak=True,
                 max_nfev=20000, fixed_center=None):
    """Least-squares fit of ``A exp(-sum (u_k - c_k)^2 / (2 s_k^2)) + offset``.

    ``axes`` holds one coordinate array per dimension of ``values``.
    Initial values come from the moments of the positive part.  ``window``
    (in axis units, one half-width per dimension) restricts the fit to a box
    around the maximum.  Without a peak standing 3 noise levels above the
    background, or when the optimiser fails, a result with
    ``success=False`` is returned.
    """
    values = np.asarray(values, dtype=float)
    axes = [np.asarray(a, dtype=float) for a in axes]
    if values.ndim != len(axes) or any(values.shape[k] != len(a) for k, a in enumerate(axes)):
        return FitResult(False, message="values do not match the axes")
    grids = np.meshgrid(*axes, indexing="ij")
    if fixed_center is None:
        i_peak = np.unravel_index(np.argmax(values), values.shape)
        peak_at = [a[i] for a, i in zip(axes, i_peak)]
    else:
        peak_at = list(fixed_center)
    mask = np.ones(values.shape, bool)
    if window is not None:
        for g, c, w in zip(grids, peak_at, window):
            mask &= np.abs(g - c) <= w
    v = values[mask]
    coords = [g[mask] for g in grids]
    if v.size < 2 * len(axes) + 2:
        return FitResult(False, message="too few samples for a Gaussian fit")
    background = float(np.median(v)) if fit_offset else offset
    height = float(np.max(v)) - background
    if require_peak and not height > 0:
        return FitResult(False, message="no peak above the background")

    pos = np.clip(v - background, 0.0, None)
    if pos.sum() <= 0:
        return FitResult(False, message="no positive excess above the background")
    c0 = [float(np.sum(pos * u) / pos.sum()) for u in coords] if fixed_center is None else peak_at
    steps = [abs(a[1] - a[0]) if len(a) > 1 else 1.0 for a in axes]
    s0 = []
    for u, c, st in zip(coords, c0, steps):
        var = float(np.sum(pos * (u - c) ** 2) / pos.sum())
        s0.append(max(np.sqrt(var), 0.5 * st))
    nd = len(axes)
    free_center = fixed_center is None

    def unpack(p):
        amp = p[0]
        k = 1
        if free_center:
            cen = p[k:k + nd]
            k += nd
        else:
            cen = np.asarray(peak_at)
        sig = p[k:k + nd]
        k += nd
        off = p[k] if fit_offset else offset
        return amp, cen, sig, off

    def resid(p):
        amp, cen, sig, off = unpack(p)
        return _gauss(coords, amp, cen, sig) + off - v

    p0 = [height] + (c0 if free_center else []) + s0 + ([background] if fit_offset else [])
    try:
        sol = least_squares(resid, np.asarray(p0, float), method="lm", xtol=1e-12, ftol=1e-12,
                            gtol=1e-12, max_nfev=max_nfev, x_scale="jac")
    except (ValueError, np.linalg.LinAlgError) as exc:
        return FitResult(False, message=f"optimiser error: {exc}")
    amp, cen, sig, off = unpack(sol.x)
    sig = np.abs(sig)
    if sol.status <= 0 or not np.all(np.isfinite(sol.x)):
        return FitResult(False, message=f"fit did not converge: {sol.message}")
    span = [a.max() - a.min() + st for a, st in zip(axes, steps)]
    if amp <= 0 or np.any(sig > 10 * np.asarray(span)) or np.any(sig < 1e-6 * np.asarray(steps)):
        return FitResult(False, float(amp), tuple(map(float, cen)), tuple(map(float, sig)), float(off),
                         float(np.linalg.norm(sol.fun)), "fit parameters out of range")
    rnorm = float(np.linalg.norm(sol.fun))
    # pure noise peaks near sqrt(2 ln n) residual levels; ask for two more
    threshold = np.sqrt(2 * np.log(v.size)) + 2.0
    if require_peak and amp <= threshold * rnorm / np.sqrt(v.size):
        return FitResult(False, float(amp), tuple(map(float, cen)), tuple(map(float, sig)), float(off), rnorm,
                         "peak not significant above the fit residuals")
    return FitResult(True, float(amp), tuple(map(float, cen)), tuple(map(float, sig)), float(off), rnorm, "ok")


def fit_map(cmap: CorrelationMap, window=None, **kw):
    axes = [cmap.axis_x] if cmap.axis_y is None else [cmap.axis_x, cmap.axis_y]
    return gaussian_fit(cmap.values, axes, window=window, **kw)


# dimensionality


@dataclass(frozen=True)
class SchmidtNumbers:
    K_x: float
    K_y: float
    K_t: float

    @property
    def V(self):
        return float(np.sqrt(self.K_x * self.K_y * self.K_t))


def schmidt_numbers(sigma_x, sigma_y, sigma_t, sigma_nu_x, sigma_nu_y, sigma_nu_t):
    """K_u = 1 / (4 s_u^2 s_nu_u^2) for each axis; positions in mm, times in ps,
    frequencies in mm^-1 and THz (no 2 pi factors)."""
    ws = (sigma_x, sigma_y, sigma_t, sigma_nu_x, sigma_nu_y, sigma_nu_t)
    if not all(np.isfinite(w) and w > 0 for w in ws):
        raise ValueError("all widths must be positive")
    k = lambda s, sn: 1.0 / (4.0 * s ** 2 * sn ** 2)
    return SchmidtNumbers(k(sigma_x, sigma_nu_x), k(sigma_y, sigma_nu_y), k(sigma_t, sigma_nu_t))


def law_eberly_K(sigma_pump, sigma_spdc_nu):
    """Gaussian-model Schmidt number 1/4 (b + 1/b)^2 with b = s_p 2 pi s_nu."""
    if not (sigma_pump > 0 and sigma_spdc_nu > 0):
        raise ValueError("widths must be positive")
    b = sigma_pump * 2.0 * np.pi * sigma_spdc_nu
    return 0.25 * (b + 1.0 / b) ** 2


# coincidences and dips


def peak_region(cmap: CorrelationMap, sigma, centers=((0.0, 0.0),), n_sigma=3.0):
    """Boolean mask of offsets within ``n_sigma`` (elliptic) of any listed centre."""
    axes = [cmap.axis_x] if cmap.axis_y is None else [cmap.axis_x, cmap.axis_y]
    grids = np.meshgrid(*axes, indexing="ij")
    mask = np.zeros(cmap.values.shape, bool)
    for c in centers:
        c = np.atleast_1d(c)
        r2 = sum(((g - ck) / sk) ** 2 for g, ck, sk in zip(grids, c, sigma))
        mask |= r2 <= n_sigma ** 2
    return mask


def coincidence_total(cmap: CorrelationMap, mask):
    return float(np.sum(cmap.values[mask]))


def relative_rate(total, reference_total):
    if not reference_total > 0:
        raise ValueError("reference coincidence total must be positive")
    return total / reference_total


def reflected_peak_center(tilt_x):
    """Offset where the reflected-reflected peak lands for a BS tilt."""
    return (2.0 * tilt_x, 0.0)


def locate_reflected_peak(cmap: CorrelationMap, sigma, n_sigma=3.0, window=None):
    """Centre of the strongest correlation peak outside the central one.

    Offsets within ``n_sigma`` of zero are excluded; the remaining maximum is
    refined by a Gaussian fit in a box of half-width ``window`` (default
    ``n_sigma * sigma``).  Returns (center, FitResult).
    """
    central = peak_region(cmap, sigma, n_sigma=n_sigma)
    masked = np.where(central, -np.inf, cmap.values)
    i_peak = np.unravel_index(np.argmax(masked), masked.shape)
    axes = [cmap.axis_x, cmap.axis_y]
    at = [float(a[i]) for a, i in zip(axes, i_peak)]
    window = window or [n_sigma * s for s in sigma]
    sel = [np.abs(a - c) <= w for a, c, w in zip(axes, at, window)]
    fit = gaussian_fit(cmap.values[np.ix_(*sel)], [a[m] for a, m in zip(axes, sel)], fit_offset=True)
    return (fit.center if fit.success else tuple(at)), fit


def dip_profile(rates):
    """1 - 2 * rate: equals one at full interference and zero when distinguishable."""
    return 1.0 - 2.0 * np.asarray(rates, dtype=float)


def fit_dip(values, rates, grid_shape=None, fit_offset=False):
    """Gaussian fit of the dip profile over 1D scan values or a 2D tilt grid."""
    prof = dip_profile(rates)
    if grid_shape is None:
        return gaussian_fit(prof, [np.asarray(values, float)], fit_offset=fit_offset)
    vx = np.unique(np.asarray(values)[:, 0])
    vy = np.unique(np.asarray(values)[:, 1])
    if (len(vx), len(vy)) != tuple(grid_shape):
        raise ConfigurationError("tilt values do not form the stated grid")
    surf = np.full(grid_shape, np.nan)
    for (x, y), p in zip(values, prof):
        surf[np.searchsorted(vx, x), np.searchsorted(vy, y)] = p
    return gaussian_fit(surf, [vx, vy], fit_offset=fit_offset)


def hom_scan(parameter, values, point_map, reference_map, sigma, n_sigma=3.0, grid_shape=None,
             fit_offset=False):
    """Relative coincidence rate for each scan point and a Gaussian fit of the dip.

    ``point_map(value)`` returns the with-BS correlation map of a scan point,
    all points sharing one set of realizations.  ``sigma`` is the fitted
    per-axis width of the no-BS peak that sets the summation region; tilted
    points also include the displaced reflected-reflected peak.
    """
    if reference_map is None:
        raise ConfigurationError("hom_scan needs the no-BS reference map")
    ref_total = coincidence_total(reference_map, peak_region(reference_map, sigma, n_sigma=n_sigma))
    totals = []
    for v in values:
        cmap = point_map(v)
        tx = _tilt_x_of(parameter, v)
        centers = [(0.0, 0.0)] if tx == 0 else [(0.0, 0.0), reflected_peak_center(tx)]
        totals.append(coincidence_total(cmap, peak_region(cmap, sigma, centers, n_sigma)))
    totals = np.asarray(totals)
    rates = totals / ref_total
    values = np.asarray(values, dtype=float)
    fit = fit_dip(values, rates, grid_shape, fit_offset)
    return DipScanResult(parameter, values, totals, ref_total, rates, fit,
                         {"n_sigma": n_sigma, "region_sigma": tuple(sigma)})


def _tilt_x_of(parameter, value):
    if parameter == "tilt_x":
        return float(value)
    if parameter == "tilt_grid":
        return float(value[0])
    return 0.0
