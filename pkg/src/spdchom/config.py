"""Run configuration: YAML sections validated into frozen dataclasses.

Defaults reproduce the reference parameter set (128^3 grid, 1000
characterization realizations, 100 pairs per scan point).  The desk-scale
preset keeps every physical step and halves each grid dimension.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace

import yaml

from .crystal import CrystalParams
from .grid import ConfigurationError, GridSpec
from .interferometer import InterferometerConfig
from .sources import NoiseParams, PumpParams

SCAN_PARAMETERS = ("delay", "tilt_x", "tilt_y", "tilt_grid", "defocus")


@dataclass(frozen=True)
class ScanSection:
    parameter: str = "delay"
    values: tuple = (0.0,)
    defocus: float = 0.0          # mm, applied to both arms during tilt scans

    def __post_init__(self):
        if self.parameter not in SCAN_PARAMETERS:
            raise ConfigurationError(f"scan parameter must be one of {SCAN_PARAMETERS}, got {self.parameter!r}")
        vals = tuple(tuple(float(u) for u in v) if isinstance(v, (list, tuple)) else float(v)
                     for v in self.values)
        if not vals:
            raise ConfigurationError("scan needs at least one value")
        if self.parameter == "tilt_grid" and not all(isinstance(v, tuple) and len(v) == 2 for v in vals):
            raise ConfigurationError("tilt_grid values must be (tilt_x, tilt_y) pairs")
        if self.parameter != "tilt_grid" and any(isinstance(v, tuple) for v in vals):
            raise ConfigurationError(f"{self.parameter} scan values must be scalars")
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class EnsembleSection:
    n_realizations: int = 100       # image pairs per scan point
    n_characterization: int = 1000  # realizations for twin-beam statistics
    base_seed: int = 20240501
    alignment_realizations: int = 4
    workers: int | None = None

    def __post_init__(self):
        for name in ("n_realizations", "n_characterization"):
            if int(getattr(self, name)) < 2:
                raise ConfigurationError(f"{name} must be at least 2")
        if int(self.alignment_realizations) < 1:
            raise ConfigurationError("alignment_realizations must be at least 1")
        if self.workers is not None and int(self.workers) < 1:
            raise ConfigurationError("workers must be positive")


@dataclass(frozen=True)
class AnalysisSection:
    n_sigma: float = 3.0            # half-size of the coincidence region in fitted widths
    fit_offset: bool = False        # dip fits keep the plateau at zero
    filtered_characterization: bool = True
    fit_window_bins: int = 6        # half-width of the Gaussian-fit box around a correlation peak

    def __post_init__(self):
        if not self.n_sigma > 0:
            raise ConfigurationError("n_sigma must be positive")
        if int(self.fit_window_bins) < 2:
            raise ConfigurationError("fit_window_bins must be at least 2")


@dataclass(frozen=True)
class OutputSection:
    directory: str = "runs/out"
    persist_images: bool = True
    plots: bool = True


@dataclass(frozen=True)
class SimulationConfig:
    grid: GridSpec = field(default_factory=lambda: GridSpec(128, 128, 128, 7.8e-3, 7.8e-3, 2.3))
    pump: PumpParams = field(default_factory=PumpParams)
    crystal: CrystalParams = field(default_factory=CrystalParams)
    noise: NoiseParams = field(default_factory=NoiseParams)
    interferometer: InterferometerConfig = field(default_factory=InterferometerConfig)
    mirror_axis: str | float = "auto"   # "auto" measures it from alignment realizations
    scan: ScanSection = field(default_factory=ScanSection)
    ensemble: EnsembleSection = field(default_factory=EnsembleSection)
    analysis: AnalysisSection = field(default_factory=AnalysisSection)
    output: OutputSection = field(default_factory=OutputSection)

    def __post_init__(self):
        if abs(self.pump.wavelength - self.grid.wavelength_pump) > 1e-9:
            raise ConfigurationError("pump wavelength differs from the grid centre wavelength")
        if abs(self.crystal.wavelength_pump - self.grid.wavelength_pump) > 1e-9:
            raise ConfigurationError("crystal pump wavelength differs from the grid centre wavelength")
        if self.mirror_axis != "auto" and not isinstance(self.mirror_axis, (int, float)):
            raise ConfigurationError("mirror_axis must be 'auto' or a number in mm")
        # the ensemble base seed is the single source of randomness
        if self.noise.seed != self.ensemble.base_seed:
            object.__setattr__(self, "noise", replace(self.noise, seed=int(self.ensemble.base_seed)))

    def to_dict(self):
        d = asdict(self)
        del d["noise"]["seed"]
        d["scan"]["values"] = [list(v) if isinstance(v, tuple) else v for v in self.scan.values]
        return d

    def to_yaml(self):
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @property
    def hash(self):
        """sha256 of the canonical JSON form; recorded in every output."""
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def with_section(self, name, **changes):
        return replace(self, **{name: replace(getattr(self, name), **changes)})


_SECTIONS = {"grid": GridSpec, "pump": PumpParams, "crystal": CrystalParams, "noise": NoiseParams,
             "interferometer": InterferometerConfig, "scan": ScanSection, "ensemble": EnsembleSection,
             "analysis": AnalysisSection, "output": OutputSection}


def _build(cls, data, name):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigurationError(f"section {name!r} must be a mapping")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigurationError(f"unknown keys in {name!r}: {sorted(unknown)}")
    defaults = asdict(cls()) if name not in ("grid", "noise") else {}
    try:
        return cls(**{**defaults, **data})
    except TypeError as exc:
        raise ConfigurationError(f"section {name!r}: {exc}") from exc


def config_from_dict(data):
    data = copy.deepcopy(data or {})
    if not isinstance(data, dict):
        raise ConfigurationError("configuration must be a mapping")
    unknown = set(data) - set(_SECTIONS) - {"mirror_axis"}
    if unknown:
        raise ConfigurationError(f"unknown sections: {sorted(unknown)}")
    if isinstance(data.get("noise"), dict) and "seed" in data["noise"]:
        raise ConfigurationError("set the seed with ensemble.base_seed, not noise.seed")
    kw = {}
    for name, cls in _SECTIONS.items():
        if name in data:
            if name == "grid":
                grid_defaults = asdict(SimulationConfig().grid)
                kw[name] = _build(cls, {**grid_defaults, **(data[name] or {})}, name)
            else:
                kw[name] = _build(cls, data[name], name)
    if "mirror_axis" in data:
        kw["mirror_axis"] = data["mirror_axis"]
    return SimulationConfig(**kw)


def load_config(path):
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"config {path} is not valid YAML: {exc}") from exc
    return config_from_dict(data)


def desk_scale(config: SimulationConfig | None = None):
    """64^3 grid with the same physical steps, N = 100 everywhere."""
    config = config or SimulationConfig()
    g = config.grid
    grid = replace(g, n_x=max(g.n_x // 2, 2), n_y=max(g.n_y // 2, 2), n_t=max(g.n_t // 2, 2))
    return replace(config, grid=grid,
                   ensemble=replace(config.ensemble, n_realizations=100, n_characterization=100))
