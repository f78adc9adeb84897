"""PNG figures for studies: dip curves and surfaces, correlation maps, SPDC profiles."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io import OutputError  # noqa: E402

_LABELS = {"delay": r"$\delta t$ (ps)", "tilt_x": r"$\delta\nu_x$ (mm$^{-1}$)",
           "tilt_y": r"$\delta\nu_y$ (mm$^{-1}$)", "defocus": "defocus d (mm)"}


def _save(fig, path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, dpi=120, bbox_inches="tight")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    finally:
        plt.close(fig)
    return path


def _zoom(cmap, half_bins):
    """Central part of a 2D map, ``half_bins`` offsets either side of zero."""
    cx, cy = len(cmap.axis_x) // 2, len(cmap.axis_y) // 2
    sx = slice(max(cx - half_bins, 0), cx + half_bins + 1)
    sy = slice(max(cy - half_bins, 0), cy + half_bins + 1)
    return cmap.values[sx, sy], cmap.axis_x[sx], cmap.axis_y[sy]


def _map_panel(ax, cmap, half_bins, title):
    vals, ax_x, ax_y = _zoom(cmap, half_bins)
    peak = np.max(np.abs(vals)) or 1.0
    im = ax.imshow((vals / peak).T, origin="lower", cmap="viridis", aspect="auto",
                   extent=[ax_x[0], ax_x[-1], ax_y[0], ax_y[-1]])
    ax.set_title(title)
    ax.set_xlabel(f"offset x ({cmap.units})")
    ax.set_ylabel(f"offset y ({cmap.units})")
    return im


def dip_curve(res, path):
    """Relative coincidence rate of a 1D scan with the fitted Gaussian dip."""
    fig, ax = plt.subplots(figsize=(5, 3.6))
    order = np.argsort(res.values)
    ax.plot(res.values[order], res.rates[order], "*", ms=9, label="simulation")
    if res.fit.success:
        u = np.linspace(res.values.min(), res.values.max(), 400)
        prof = res.fit.amplitude * np.exp(-(u - res.fit.center[0]) ** 2 / (2 * res.fit.sigma[0] ** 2))
        ax.plot(u, 0.5 * (1 - prof - res.fit.offset), "r-",
                label=rf"fit, $\sigma$ = {res.fit.sigma[0]:.3g}")
    ax.axhline(0.5, color="gray", lw=0.8, ls="--")
    ax.set_xlabel(_LABELS.get(res.parameter, res.parameter))
    ax.set_ylabel("relative coincidence rate")
    ax.legend(frameon=False)
    ax.grid(alpha=0.3)
    return _save(fig, path)


def dip_surface(res, path):
    """Rates over a tilt grid, with the fitted surface as contours."""
    vx = np.unique(res.values[:, 0])
    vy = np.unique(res.values[:, 1])
    surf = np.full((len(vx), len(vy)), np.nan)
    for (x, y), r in zip(res.values, res.rates):
        surf[np.searchsorted(vx, x), np.searchsorted(vy, y)] = r
    fig, ax = plt.subplots(figsize=(5, 4))
    im = ax.pcolormesh(vx, vy, surf.T, shading="nearest", cmap="magma", vmin=0, vmax=0.6)
    fig.colorbar(im, ax=ax, label="relative coincidence rate")
    if res.fit.success:
        X, Y = np.meshgrid(np.linspace(vx[0], vx[-1], 120), np.linspace(vy[0], vy[-1], 120), indexing="ij")
        (cx, cy), (sx, sy) = res.fit.center, res.fit.sigma
        fit = 0.5 * (1 - res.fit.amplitude * np.exp(-(X - cx) ** 2 / (2 * sx ** 2) - (Y - cy) ** 2 / (2 * sy ** 2)))
        ax.contour(X, Y, fit, levels=6, colors="w", linewidths=0.8)
        ax.set_title(rf"$\sigma_x$ = {sx:.3g}, $\sigma_y$ = {sy:.3g} mm$^{{-1}}$")
    ax.set_xlabel(_LABELS["tilt_x"])
    ax.set_ylabel(_LABELS["tilt_y"])
    return _save(fig, path)


def correlation_maps(maps, path, half_bins=12, titles=None):
    """Row of peak-normalized 2D maps."""
    fig, axes = plt.subplots(1, len(maps), figsize=(4 * len(maps), 3.6), squeeze=False)
    for ax, (key, cmap) in zip(axes[0], maps.items()):
        im = _map_panel(ax, cmap, half_bins, (titles or {}).get(key, str(key)))
    fig.colorbar(im, ax=list(axes[0]), shrink=0.8)
    return _save(fig, path)


def twin_correlations(char, path):
    """Near-field, far-field, time and frequency twin-beam correlations."""
    fig, axes = plt.subplots(1, 4, figsize=(16, 3.6))
    _map_panel(axes[0], char.maps["near"], 8, "near field")
    _map_panel(axes[1], char.maps["far"], 8, "far field")
    for ax, key, label in ((axes[2], "time", r"$\Delta t$ (ps)"), (axes[3], "frequency", r"$\Delta\nu_t$ (THz)")):
        m = char.maps[key]
        n = len(m.axis_x) // 2
        sl = slice(max(n - 10, 0), n + 11)
        peak = np.max(m.values) or 1.0
        ax.plot(m.axis_x[sl], m.values[sl] / peak, "s", ms=4)
        fit = char.fits[key]
        if fit.success:
            u = np.linspace(m.axis_x[sl][0], m.axis_x[sl][-1], 300)
            g = fit.amplitude * np.exp(-(u - fit.center[0]) ** 2 / (2 * fit.sigma[0] ** 2)) + fit.offset
            ax.plot(u, g / peak, "r-")
        ax.set_xlabel(label)
        ax.set_title(key)
    return _save(fig, path)


def study_figures(study, directory):
    d = Path(directory)
    paths = []
    for name, res in study.scans.items():
        if res.values.ndim == 1 and len(res.values) > 1:
            paths.append(dip_curve(res, d / f"dip_{name}.png"))
        elif res.values.ndim == 2 and len(res.values) > 1:
            paths.append(dip_surface(res, d / f"dip_{name}.png"))
    if study.reference_map is not None:
        paths.append(correlation_maps({"no-BS": study.reference_map}, d / "reference_map.png"))
    if study.characterization is not None:
        paths.append(twin_correlations(study.characterization, d / "twin_correlations.png"))
    return paths
