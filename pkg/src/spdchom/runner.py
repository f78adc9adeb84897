"""Seeded ensembles and parameter scans: generate, propagate, interfere, detect, persist.

Every realization index ``n`` draws its vacuum fields from
``SeedSequence(base_seed, spawn_key=(n, stream))``, so a realization is
reproducible on its own and the results do not depend on how tasks are
spread over workers.  All measurements of a study are taken on the same
crystal outputs (paired seeds across scan points).  Analysis starts once
every realization has returned and always walks them in index order.
"""

from __future__ import annotations

import logging
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (CorrelationMap, ImagePairEnsemble, fit_map, frequency_to_wavelength_width,
                       hom_scan, law_eberly_K, locate_reflected_peak, momentum_correlation,
                       schmidt_numbers, temporal_spectral_correlation)
from .config import SimulationConfig
from .crystal import ConvergenceError, propagate_crystal
from .grid import ConfigurationError
from .interferometer import (InterferometerBatch, InterferometerConfig, align_mirror_axis,
                             detect_far_field, frequency_spectrum, near_field_image, spectral_filter,
                             time_spectrum)
from .io import OutputError, check_writable, write_array, write_csv, write_json
from .sources import gen_pump, gen_vacuum_field

log = logging.getLogger(__name__)

WORKERS_ENV = "SPDCHOM_WORKERS"
ALIGN_OFFSET = 2 ** 40          # realization indices reserved for mirror-axis alignment
MAX_FAILURE_FRACTION = 0.01
KINDS = ("hom", "reference", "near_field", "characterize")
CHAR_PRODUCTS = ("ff_raw", "nf_raw", "t_raw", "nu_raw", "ff", "nf", "t", "nu")
DIP_CSV_HEADER = ["parameter", "value_x", "value_y", "total", "reference_total", "rate",
                  "fit_amplitude", "fit_center_x", "fit_center_y", "fit_sigma_x", "fit_sigma_y",
                  "fit_residual_norm"]


class NumericalFailure(RuntimeError):
    """More realizations failed than the ensemble tolerates."""


@dataclass(frozen=True)
class Measurement:
    name: str
    kind: str
    config: InterferometerConfig = field(default_factory=InterferometerConfig)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown measurement kind {self.kind!r}")


@dataclass
class RealizationResult:
    index: int
    ok: bool
    outputs: dict = field(default_factory=dict)
    error: str = ""
    timings: dict = field(default_factory=dict)


def default_workers():
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise ConfigurationError(f"{WORKERS_ENV}={env!r} is not an integer") from exc
        if n < 1:
            raise ConfigurationError(f"{WORKERS_ENV} must be positive")
        return n
    return os.cpu_count() or 1


@lru_cache(maxsize=4)
def _pump(grid, pump):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return gen_pump(grid, pump)


def crystal_fields(cfg: SimulationConfig, index):
    """Inputs and crystal outputs ((E_p, E_s, E_i), (E_p', E_s', E_i')) of one realization."""
    E_p = _pump(cfg.grid, cfg.pump)
    E_s = gen_vacuum_field(cfg.grid, cfg.noise, "signal", index)
    E_i = gen_vacuum_field(cfg.grid, cfg.noise, "idler", index)
    return (E_p, E_s, E_i), propagate_crystal(E_p, E_s, E_i, cfg.crystal)


def _pair(a, b):
    return np.stack([a, b])


def _characterize(batch, config):
    s, i = batch.s, batch.i
    out = {"ff_raw": _pair(detect_far_field(s).values, detect_far_field(i).values),
           "nf_raw": _pair(near_field_image(s).values, near_field_image(i).values),
           "t_raw": _pair(time_spectrum(s), time_spectrum(i)),
           "nu_raw": _pair(frequency_spectrum(s), frequency_spectrum(i))}
    if config.filter_center is not None:
        s = spectral_filter(s, config.filter_center, config.filter_sigma)
        i = spectral_filter(i, config.filter_center, config.filter_sigma)
    out.update({"ff": _pair(detect_far_field(s).values, detect_far_field(i).values),
                "nf": _pair(near_field_image(s).values, near_field_image(i).values),
                "t": _pair(time_spectrum(s), time_spectrum(i)),
                "nu": _pair(frequency_spectrum(s), frequency_spectrum(i))})
    return out


def measure(batch, m: Measurement):
    """Outputs of one measurement on one realization, keyed by product name."""
    if m.kind == "hom":
        o = batch.run(m.config)
        return {m.name: _pair(o.image_1.values, o.image_2.values)}
    if m.kind == "reference":
        o = batch.reference(m.config)
        return {m.name: _pair(o.image_1.values, o.image_2.values)}
    if m.kind == "near_field":
        return {m.name: _pair(near_field_image(batch.s).values, near_field_image(batch.i).values)}
    return {f"{m.name}/{k}": v for k, v in _characterize(batch, m.config).items()}


def simulate_realization(task):
    """Worker entry point: ``task = (cfg, index, measurements)``."""
    cfg, index, measurements = task
    t0 = time.perf_counter()
    try:
        _, (_, E_s, E_i) = crystal_fields(cfg, index)
        t1 = time.perf_counter()
        batch = InterferometerBatch(E_s, E_i, index)
        outputs = {}
        for m in measurements:
            outputs.update(measure(batch, m))
        t2 = time.perf_counter()
        bad = [k for k, v in outputs.items() if not np.all(np.isfinite(v))]
        if bad:
            raise FloatingPointError(f"non-finite output in {bad[0]}")
    except (FloatingPointError, ConvergenceError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return RealizationResult(index, False, error=f"{type(exc).__name__}: {exc}",
                                 timings={"total": time.perf_counter() - t0})
    return RealizationResult(index, True, outputs,
                             timings={"crystal": t1 - t0, "interferometer": t2 - t1})


def execute(cfg: SimulationConfig, tasks, workers=None):
    """Run ``[(index, measurements), ...]`` and return results in task order."""
    workers = int(workers or cfg.ensemble.workers or default_workers())
    args = [(cfg, index, tuple(ms)) for index, ms in tasks]
    if workers == 1 or len(args) == 1:
        results = []
        for k, a in enumerate(args):
            results.append(simulate_realization(a))
            log.debug("realization %d done (%d/%d)", a[1], k + 1, len(args))
        return results
    with ProcessPoolExecutor(max_workers=min(workers, len(args))) as pool:
        return list(pool.map(simulate_realization, args, chunksize=1))


@dataclass
class EnsembleData:
    """Per-product stacks in realization order, after the ensemble barrier."""

    indices: dict              # product -> realization indices present in its stack
    stacks: dict               # product -> array (N, 2, ...)
    failed: list               # (index, message)
    timings: dict


def gather(results, n_requested):
    failed = [(r.index, r.error) for r in results if not r.ok]
    if len(failed) > MAX_FAILURE_FRACTION * n_requested:
        raise NumericalFailure(f"{len(failed)} of {n_requested} realizations failed; first: {failed[0][1]}")
    for index, msg in failed:
        warnings.warn(f"realization {index} excluded: {msg}", stacklevel=2)
    indices, parts = {}, {}
    timings = {"crystal": 0.0, "interferometer": 0.0}
    for r in results:
        if not r.ok:
            continue
        for k in timings:
            timings[k] += r.timings.get(k, 0.0)
        for name, arr in r.outputs.items():
            indices.setdefault(name, []).append(r.index)
            parts.setdefault(name, []).append(arr)
    stacks = {name: np.stack(p) for name, p in parts.items()}
    return EnsembleData(indices, stacks, failed, timings)


# mirror axis


def vacuum_image_baseline(cfg: SimulationConfig):
    """Expected time-integrated vacuum intensity per pixel (unitary transforms)."""
    return cfg.noise.variance_per_mode * cfg.grid.n_t


def resolve_mirror_axis(cfg: SimulationConfig, workers=None):
    """Mirror-axis offset in mm, measured on dedicated realizations when set to "auto"."""
    if cfg.mirror_axis != "auto":
        return float(cfg.mirror_axis), {"mode": "fixed"}
    k = int(cfg.ensemble.alignment_realizations)
    idx = [ALIGN_OFFSET + j for j in range(k)]
    res = execute(cfg, [(i, (Measurement("align", "near_field"),)) for i in idx], workers)
    ok = [r for r in res if r.ok]
    if not ok:
        raise NumericalFailure("all alignment realizations failed")
    st = np.stack([r.outputs["align"] for r in ok])
    x0 = align_mirror_axis(st[:, 0], st[:, 1], cfg.grid.x, vacuum_image_baseline(cfg))
    return float(x0), {"mode": "auto", "realizations": [r.index for r in ok]}


# scans


@dataclass(frozen=True)
class ScanSpec:
    name: str
    parameter: str
    values: tuple
    defocus: float = 0.0

    def config_for(self, base: InterferometerConfig, value):
        d = {"defocus_s": self.defocus, "defocus_i": self.defocus}
        if self.parameter == "delay":
            return replace(base, delay=float(value), **d)
        if self.parameter == "tilt_x":
            return replace(base, tilt_x=float(value), **d)
        if self.parameter == "tilt_y":
            return replace(base, tilt_y=float(value), **d)
        if self.parameter == "tilt_grid":
            return replace(base, tilt_x=float(value[0]), tilt_y=float(value[1]), **d)
        if self.parameter == "defocus":
            return replace(base, defocus_s=float(value), defocus_i=float(value))
        raise ConfigurationError(f"unknown scan parameter {self.parameter!r}")

    def measurements(self, base):
        return [Measurement(f"{self.name}/{k}", "hom", self.config_for(base, v))
                for k, v in enumerate(self.values)]

    @property
    def grid_shape(self):
        if self.parameter != "tilt_grid":
            return None
        nx = len({v[0] for v in self.values})
        ny = len({v[1] for v in self.values})
        if nx * ny != len(self.values):
            raise ConfigurationError(f"scan {self.name!r}: tilt values do not form a full grid")
        return (nx, ny)

    @classmethod
    def from_section(cls, section, name="scan"):
        return cls(name, section.parameter, tuple(section.values), section.defocus)


def tilt_grid(xs, ys):
    return tuple((float(x), float(y)) for x in xs for y in ys)


# default scans; delays cluster near zero where the dip (about 1 ps wide at
# these grids) changes fastest, and reach past 15 ps for the plateau
TEMPORAL_DELAYS = (-16.0, -6.0, -3.0, -1.5, -0.75, 0.0, 0.75, 1.5, 3.0, 6.0, 16.0)
TILT_X = (-6.0, -3.0, 0.0, 3.0, 6.0)
TILT_Y = (-48.0, -24.0, 0.0, 24.0, 48.0)
TILT_Y_DEFOCUSED = (-2.0, -1.0, 0.0, 1.0, 2.0)
PEAK_CHECK_TILT = (-8.5, -42.0)
DEFOCUS_MM = 5.0


def temporal_scan():
    return ScanSpec("temporal", "delay", TEMPORAL_DELAYS)


def spatial_scan():
    return ScanSpec("spatial", "tilt_grid", tilt_grid(TILT_X, TILT_Y))


def defocus_scan(d=DEFOCUS_MM):
    return ScanSpec("defocus", "tilt_grid", tilt_grid(TILT_X, TILT_Y_DEFOCUSED), d)


def peak_check_scan():
    return ScanSpec("peak_check", "tilt_grid", (PEAK_CHECK_TILT,))


def _far_ensemble(stack, cfg, label):
    g = cfg.grid
    return ImagePairEnsemble(stack[:, 0], stack[:, 1], g.nu_x, g.nu_y, "mm^-1", label)


def _window(cmap, bins):
    axes = [cmap.axis_x] if cmap.axis_y is None else [cmap.axis_x, cmap.axis_y]
    return [bins * float(a[1] - a[0]) for a in axes]


def reference_analysis(data: EnsembleData, cfg: SimulationConfig, name="reference"):
    cmap = momentum_correlation(_far_ensemble(data.stacks[name], cfg, "no-BS"), "sum")
    fit = fit_map(cmap, window=_window(cmap, cfg.analysis.fit_window_bins))
    if not fit.success:
        raise NumericalFailure(f"no-BS reference peak could not be fitted: {fit.message}")
    return cmap, fit


def analyze_scan(scan: ScanSpec, data: EnsembleData, cfg: SimulationConfig, ref_map, ref_fit):
    maps = {}
    for k, v in enumerate(scan.values):
        maps[v] = momentum_correlation(_far_ensemble(data.stacks[f"{scan.name}/{k}"], cfg, "with-BS"), "sum")
    res = hom_scan(scan.parameter, list(scan.values), maps.__getitem__, ref_map, ref_fit.sigma,
                   cfg.analysis.n_sigma, scan.grid_shape, cfg.analysis.fit_offset)
    res.metadata.update({"scan": scan.name, "defocus": scan.defocus, "n_realizations":
                         len(data.indices[f"{scan.name}/0"])})
    return res, maps


def dip_rows(res):
    fit = res.fit
    cx, cy = (list(fit.center) + [np.nan, np.nan])[:2] if fit.success else (np.nan, np.nan)
    sx, sy = (list(fit.sigma) + [np.nan, np.nan])[:2] if fit.success else (np.nan, np.nan)
    amp = fit.amplitude if fit.success else np.nan
    rows = []
    for v, tot, rate in zip(res.values, res.totals, res.rates):
        v = np.atleast_1d(v)
        vy = float(v[1]) if v.size > 1 else np.nan
        rows.append([res.parameter, float(v[0]), vy, float(tot), float(res.reference_total), float(rate),
                     amp, cx, cy, sx, sy, fit.residual_norm])
    return rows


# characterization


def _profile_std(profile, axis):
    w = np.asarray(profile, float)
    c = np.sum(w * axis) / np.sum(w)
    return float(np.sqrt(np.sum(w * (axis - c) ** 2) / np.sum(w))), float(c)


def spdc_widths(data: EnsembleData, cfg: SimulationConfig, name="char"):
    """Standard deviations of the mean SPDC intensity (vacuum baseline removed)."""
    g = cfg.grid
    v = cfg.noise.variance_per_mode
    base_img = v * g.n_t
    base_spec = v * g.n_x * g.n_y
    out = {}
    for k, beam in enumerate(("signal", "idler")):
        nf = data.stacks[f"{name}/nf_raw"][:, k].mean(0) - base_img
        ff = data.stacks[f"{name}/ff_raw"][:, k].mean(0) - base_img
        tt = data.stacks[f"{name}/t_raw"][:, k].mean(0) - base_spec
        nu = data.stacks[f"{name}/nu_raw"][:, k].mean(0) - base_spec
        out[f"{beam}_sigma_x"], out[f"{beam}_center_x"] = _profile_std(nf.sum(1), g.x)
        out[f"{beam}_sigma_y"], _ = _profile_std(nf.sum(0), g.y)
        out[f"{beam}_sigma_nu_x"], _ = _profile_std(ff.sum(1), g.nu_x)
        out[f"{beam}_sigma_nu_y"], _ = _profile_std(ff.sum(0), g.nu_y)
        out[f"{beam}_sigma_t"], _ = _profile_std(tt, g.t)
        out[f"{beam}_sigma_nu_t"], _ = _profile_std(nu, g.nu_t)
    for q in ("sigma_x", "sigma_y", "sigma_nu_x", "sigma_nu_y", "sigma_t", "sigma_nu_t"):
        out[q] = 0.5 * (out[f"signal_{q}"] + out[f"idler_{q}"])
    out["sigma_lambda"] = frequency_to_wavelength_width(out["sigma_nu_t"], g.wavelength_signal)
    return out


@dataclass
class Characterization:
    spdc: dict
    twin: dict
    fits: dict
    maps: dict
    schmidt: object
    law_eberly: float
    n_realizations: int

    def summary(self):
        d = {"n_realizations": self.n_realizations, "law_eberly_K_x": self.law_eberly}
        d.update({f"spdc_{k}": v for k, v in self.spdc.items()})
        d.update({f"twin_{k}": v for k, v in self.twin.items()})
        if self.schmidt is not None:
            d.update({"K_x": self.schmidt.K_x, "K_y": self.schmidt.K_y, "K_t": self.schmidt.K_t,
                      "V": self.schmidt.V})
        return d


def characterize_data(data: EnsembleData, cfg: SimulationConfig, name="char"):
    g = cfg.grid
    prod = "" if cfg.analysis.filtered_characterization else "_raw"
    bins = cfg.analysis.fit_window_bins
    st = data.stacks
    maps = {
        "near": momentum_correlation(ImagePairEnsemble(st[f"{name}/nf{prod}"][:, 0], st[f"{name}/nf{prod}"][:, 1],
                                                       g.x, g.y, "mm", "no-BS"), "difference"),
        "far": momentum_correlation(ImagePairEnsemble(st[f"{name}/ff{prod}"][:, 0], st[f"{name}/ff{prod}"][:, 1],
                                                      g.nu_x, g.nu_y, "mm^-1", "no-BS"), "sum"),
        "time": temporal_spectral_correlation(st[f"{name}/t{prod}"][:, 0], st[f"{name}/t{prod}"][:, 1], g.t, "ps"),
        "frequency": temporal_spectral_correlation(st[f"{name}/nu{prod}"][:, 0], st[f"{name}/nu{prod}"][:, 1],
                                                   g.nu_t, "THz"),
    }
    fits = {k: fit_map(m, window=_window(m, bins)) for k, m in maps.items()}
    twin = {}
    if fits["near"].success:
        twin["sigma_x"], twin["sigma_y"] = fits["near"].sigma
        twin["center_x"], twin["center_y"] = fits["near"].center
    if fits["far"].success:
        twin["sigma_nu_x"], twin["sigma_nu_y"] = fits["far"].sigma
    if fits["time"].success:
        twin["sigma_t"] = fits["time"].sigma[0]
    if fits["frequency"].success:
        twin["sigma_nu_t"] = fits["frequency"].sigma[0]
        twin["sigma_lambda"] = frequency_to_wavelength_width(twin["sigma_nu_t"], g.wavelength_signal)
    keys = ("sigma_x", "sigma_y", "sigma_t", "sigma_nu_x", "sigma_nu_y", "sigma_nu_t")
    schmidt = schmidt_numbers(*(twin[k] for k in keys)) if all(k in twin for k in keys) else None
    spdc = spdc_widths(data, cfg, name)
    le = law_eberly_K(cfg.pump.sigma_x, spdc["sigma_nu_x"])
    n = len(data.indices[f"{name}/ff_raw"])
    return Characterization(spdc, twin, fits, maps, schmidt, float(le), n)


# studies


@dataclass
class StudyResult:
    config: SimulationConfig
    mirror_axis_x: float
    reference_map: CorrelationMap | None
    reference_fit: object
    scans: dict                 # name -> DipScanResult
    scan_maps: dict             # name -> {value: CorrelationMap}
    characterization: Characterization | None
    data: EnsembleData
    manifest: dict


def _plan(cfg, scans, characterize, base):
    n_scan = int(cfg.ensemble.n_realizations) if scans else 0
    n_char = int(cfg.ensemble.n_characterization) if characterize else 0
    n_total = max(n_scan, n_char)
    scan_ms = [Measurement("reference", "reference", base)]
    for s in scans:
        scan_ms += s.measurements(base)
    char_ms = [Measurement("char", "characterize", base)]
    tasks = []
    for n in range(n_total):
        ms = (scan_ms if n < n_scan else []) + (char_ms if n < n_char else [])
        tasks.append((n, ms))
    return tasks, n_scan, n_char


def run_study(cfg: SimulationConfig, scans=(), characterize=False, workers=None):
    """Alignment, one pass over the realizations, then analysis after the barrier."""
    scans = list(scans)
    names = [s.name for s in scans]
    if len(set(names)) != len(names) or {"reference", "char"} & set(names):
        raise ConfigurationError("scan names must be unique and not 'reference' or 'char'")
    for s in scans:
        s.grid_shape  # validates tilt grids before any compute
    cfg.grid.check_window(cfg.pump.sigma_x, cfg.pump.sigma_y, cfg.pump.sigma_t)
    t0 = time.perf_counter()
    x0, align_info = (resolve_mirror_axis(cfg, workers) if scans else (0.0, {"mode": "unused"}))
    t1 = time.perf_counter()
    base = replace(cfg.interferometer, mirror_axis_x=x0)
    tasks, n_scan, n_char = _plan(cfg, scans, characterize, base)
    results = execute(cfg, tasks, workers)
    data = gather(results, len(tasks))
    t2 = time.perf_counter()
    ref_map = ref_fit = None
    dips, scan_maps = {}, {}
    if scans:
        ref_map, ref_fit = reference_analysis(data, cfg)
        for s in scans:
            dips[s.name], scan_maps[s.name] = analyze_scan(s, data, cfg, ref_map, ref_fit)
    char = characterize_data(data, cfg) if characterize else None
    t3 = time.perf_counter()
    manifest = {
        "software": {"package": "spdchom", "version": __version__},
        "config_hash": cfg.hash,
        "config": cfg.to_dict(),
        "seeds": {"base_seed": int(cfg.ensemble.base_seed),
                  "rng": "numpy PCG64 from SeedSequence(base_seed, spawn_key=(realization, stream)); "
                         "stream 1 signal, 2 idler",
                  "realizations": [t[0] for t in tasks],
                  "alignment": align_info.get("realizations", [])},
        "mirror_axis_x_mm": x0,
        "mirror_axis": align_info["mode"],
        "n_scan_realizations": n_scan,
        "n_characterization_realizations": n_char,
        "failed_realizations": [{"index": i, "error": e} for i, e in data.failed],
        "timings_s": {"alignment": t1 - t0, "ensemble_wall": t2 - t1, "analysis": t3 - t2,
                      "crystal_cpu": data.timings["crystal"],
                      "interferometer_cpu": data.timings["interferometer"],
                      "per_realization": (t2 - t1) / max(len(tasks), 1)},
        "scans": {},
        "files": [],
        "status": "complete",
    }
    if ref_fit is not None:
        manifest["reference_fit"] = ref_fit.as_dict()
    for name, r in dips.items():
        manifest["scans"][name] = {"parameter": r.parameter, "fit": r.fit.as_dict(),
                                   "reference_total": r.reference_total, **r.metadata}
    if char is not None:
        manifest["characterization"] = char.summary()
    return StudyResult(cfg, x0, ref_map, ref_fit, dips, scan_maps, char, data, manifest)


# persistence


def persist_study(study: StudyResult, out_dir, images=None, plots=None):
    """Write maps, CSV tables, optional image stacks and figures; returns the manifest path.

    On an I/O error a partial manifest is attempted before re-raising.
    """
    cfg = study.config
    out = Path(out_dir)
    images = cfg.output.persist_images if images is None else images
    plots = cfg.output.plots if plots is None else plots
    files = study.manifest["files"]
    h = cfg.hash

    def rel(p):
        files.append(str(Path(p).relative_to(out)))

    try:
        check_writable(out)
        g = cfg.grid
        if images:
            for name, st in study.data.stacks.items():
                ax = _product_axes(name, g)
                stem = out / "images" / name.replace("/", "_")
                for p in write_array(stem, st, {"realization": study.data.indices[name], **ax}, None, h,
                                     {"layout": "realization, detector(1|2 or signal|idler), axes..."}):
                    rel(p)
        if study.reference_map is not None:
            _write_map(out / "maps" / "reference", study.reference_map, h, rel)
        for name, res in study.scans.items():
            for k, v in enumerate(res.values):
                _write_map(out / "maps" / f"{name}_{k}", study.scan_maps[name][_key(v)], h, rel)
            rel(write_csv(out / f"dip_{name}.csv", DIP_CSV_HEADER, dip_rows(res)))
        if study.characterization is not None:
            ch = study.characterization
            for k, m in ch.maps.items():
                _write_map(out / "maps" / f"twin_{k}", m, h, rel)
            rows = [[k, v] for k, v in ch.summary().items()]
            rel(write_csv(out / "characterization.csv", ["quantity", "value"], rows))
        if plots:
            from . import plotting
            for p in plotting.study_figures(study, out / "figures"):
                rel(p)
        study.manifest["status"] = "complete"
        path = write_json(out / "manifest.json", study.manifest)
    except OutputError:
        study.manifest["status"] = "partial"
        try:
            write_json(out / "manifest.json", study.manifest)
        except OutputError:
            pass
        raise
    return path


def _product_axes(name, g):
    kind = name.rsplit("/", 1)[-1]
    if kind in ("nf", "nf_raw", "align"):
        return {"x": g.x, "y": g.y}
    if kind in ("t", "t_raw"):
        return {"t": g.t}
    if kind in ("nu", "nu_raw"):
        return {"nu_t": g.nu_t}
    return {"x": g.nu_x, "y": g.nu_y}


def _key(v):
    v = np.atleast_1d(v)
    return float(v[0]) if v.size == 1 else tuple(float(u) for u in v)


def _write_map(stem, cmap, config_hash, rel):
    axes = {"x": cmap.axis_x} if cmap.axis_y is None else {"x": cmap.axis_x, "y": cmap.axis_y}
    norm = {k: v for k, v in cmap.normalization.items() if np.isscalar(v)}
    for p in write_array(stem, cmap.values, axes, {"offset": cmap.units}, config_hash,
                         {"pairing": cmap.pairing, "n_samples": cmap.n_samples, **norm}):
        rel(p)


# single-configuration helpers


def run_ensemble(cfg: SimulationConfig, out_dir=None, workers=None):
    """N realizations through the configured interferometer plus the no-BS reference."""
    ic = cfg.interferometer
    if ic.defocus_s != ic.defocus_i:
        raise ConfigurationError("run_ensemble uses equal defocus in both arms")
    # a one-point tilt "scan" keeps the configured delay, tilt and defocus
    scan = ScanSpec("ensemble", "tilt_grid", ((ic.tilt_x, ic.tilt_y),), ic.defocus_s)
    study = run_study(cfg, [scan], workers=workers)
    if out_dir is not None:
        persist_study(study, out_dir)
    return study


def run_scan(cfg: SimulationConfig, out_dir=None, workers=None, scans=None):
    scans = scans or [ScanSpec.from_section(cfg.scan)]
    study = run_study(cfg, scans, workers=workers)
    if out_dir is not None:
        persist_study(study, out_dir)
    return study


def characterize(cfg: SimulationConfig, out_dir=None, workers=None):
    study = run_study(cfg, (), characterize=True, workers=workers)
    if out_dir is not None:
        persist_study(study, out_dir)
    return study


def single_run(cfg: SimulationConfig, out_dir, index=0):
    """One realization with every intermediate field persisted for inspection."""
    out = check_writable(out_dir)
    (E_p, E_s, E_i), (P, S, I) = crystal_fields(cfg, index)
    x0 = float(cfg.mirror_axis) if cfg.mirror_axis != "auto" else resolve_mirror_axis(cfg, 1)[0]
    icfg = replace(cfg.interferometer, mirror_axis_x=x0)
    batch = InterferometerBatch(S, I, index)
    det = batch.run(icfg)
    ref = batch.reference(icfg)
    g = cfg.grid
    ax3 = {"x": g.x, "y": g.y, "t": g.t}
    files = []
    for name, f in (("pump_in", E_p), ("signal_in", E_s), ("idler_in", E_i),
                    ("pump_out", P), ("signal_out", S), ("idler_out", I)):
        files += write_array(out / "fields" / name, f.amplitude, ax3, None, cfg.hash,
                             {"domain": f.domain, "beam": f.beam, "polarization": f.polarization})
    for name, o in (("bs_port", det), ("no_bs", ref)):
        files += write_array(out / "images" / name, _pair(o.image_1.values, o.image_2.values),
                             {"x": g.nu_x, "y": g.nu_y}, None, cfg.hash)
    manifest = {"software": {"package": "spdchom", "version": __version__}, "config_hash": cfg.hash,
                "config": cfg.to_dict(), "realization": index, "mirror_axis_x_mm": x0,
                "seeds": {"base_seed": int(cfg.ensemble.base_seed), "realizations": [index]},
                "files": [str(Path(p).relative_to(out)) for p in files], "status": "complete"}
    write_json(out / "manifest.json", manifest)
    return manifest
