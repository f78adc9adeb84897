"""Persistence: flat little-endian float64 arrays with text headers, CSV tables, JSON manifests."""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path

import numpy as np

HEADER_VERSION = 1


class OutputError(OSError):
    """Raised when an output file cannot be written."""


def _axis_text(values):
    return " ".join(repr(float(v)) for v in np.asarray(values, float).ravel())


def write_array(path, array, axes=None, units=None, config_hash="", extra=None):
    """Write ``path.bin`` (raw <f8, C order) and ``path.hdr`` (key: value lines).

    Complex arrays are stored as a trailing axis of length 2 (real, imag).
    Returns the two paths.
    """
    path = Path(path)
    a = np.asarray(array)
    is_complex = np.iscomplexobj(a)
    if is_complex:
        a = np.stack([a.real, a.imag], axis=-1)
    a = np.ascontiguousarray(a, dtype="<f8")
    bin_path, hdr_path = path.with_suffix(".bin"), path.with_suffix(".hdr")
    lines = [f"version: {HEADER_VERSION}", "dtype: float64-le", "order: C",
             f"shape: {' '.join(str(s) for s in a.shape)}",
             f"complex: {'yes' if is_complex else 'no'}",
             f"config_hash: {config_hash}"]
    for name, values in (axes or {}).items():
        lines.append(f"axis_{name}: {_axis_text(values)}")
    for name, u in (units or {}).items():
        lines.append(f"units_{name}: {u}")
    for k, v in (extra or {}).items():
        lines.append(f"{k}: {v}")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        a.tofile(bin_path)
        hdr_path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OutputError(f"cannot write {bin_path}: {exc}") from exc
    return bin_path, hdr_path


def read_header(path):
    hdr = {}
    for line in Path(path).with_suffix(".hdr").read_text().splitlines():
        if line.strip():
            k, _, v = line.partition(":")
            hdr[k.strip()] = v.strip()
    return hdr


def read_array(path):
    """Inverse of :func:`write_array`; returns (array, header dict with parsed axes)."""
    hdr = read_header(path)
    shape = tuple(int(s) for s in hdr["shape"].split())
    a = np.fromfile(Path(path).with_suffix(".bin"), dtype="<f8").reshape(shape)
    if hdr.get("complex") == "yes":
        a = a[..., 0] + 1j * a[..., 1]
    axes = {k[5:]: np.array([float(v) for v in val.split()]) for k, val in hdr.items()
            if k.startswith("axis_")}
    hdr["axes"] = axes
    return a, hdr


def write_csv(path, header, rows):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_json(path, data):
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp.write_text(json.dumps(data, indent=2, sort_keys=True, default=_jsonable))
        os.replace(tmp, path)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return path


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def check_writable(directory):
    """Create ``directory`` and verify a file can be written there."""
    d = Path(directory)
    try:
        d.mkdir(parents=True, exist_ok=True)
        probe = d / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OutputError(f"output directory {d} is not writable: {exc}") from exc
    return d
