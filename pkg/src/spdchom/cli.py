"""Command-line entry points.

Exit codes: 0 success, 1 configuration error, 2 numerical failure (including
failed validation checks), 3 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .config import SimulationConfig, desk_scale, load_config
from .grid import ConfigurationError
from .io import OutputError, write_csv, write_json
from .runner import (DIP_CSV_HEADER, NumericalFailure, ScanSpec, characterize, defocus_scan, run_scan,
                     single_run, spatial_scan, temporal_scan)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3

_SCAN_FAMILY = {"hom-temporal": ("delay",), "hom-spatial": ("tilt_x", "tilt_y", "tilt_grid"),
                "hom-defocus": ("tilt_x", "tilt_y", "tilt_grid", "defocus")}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML run configuration")
    common.add_argument("--seed", type=int, help="ensemble base seed")
    common.add_argument("--workers", type=int, help="worker processes (default: $SPDCHOM_WORKERS or CPU count)")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--desk-scale", action="store_true", help="64x64x64 grid, N = 100")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="spdchom", description="Stochastic SPDC and spatio-temporal HOM simulator")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("single-run", parents=[common], help="one realization with all fields persisted")
    s.add_argument("--realization", type=int, default=0)
    sub.add_parser("characterize", parents=[common], help="SPDC and twin-beam widths, Schmidt numbers")
    sub.add_parser("hom-temporal", parents=[common], help="delay scan of the HOM dip")
    sub.add_parser("hom-spatial", parents=[common], help="beamsplitter tilt grid scan")
    s = sub.add_parser("hom-defocus", parents=[common], help="tilt grid scan with defocused image planes")
    s.add_argument("--defocus", type=float, default=5.0, help="defocus of both arms (mm)")
    s = sub.add_parser("oracle", parents=[common], help="analytic dip surface and its quadrature check")
    s.add_argument("--sigma-nu-q", type=float, default=2.4,
                   help="twin-beam far-field correlation width (mm^-1)")
    s.add_argument("--sigma-nu-spdc", type=float, default=39.4,
                   help="single-beam far-field SPDC width (mm^-1)")
    s.add_argument("--characterization", type=Path,
                   help="characterization.csv to take both widths from")
    s.add_argument("--points", type=int, default=5, help="grid points per axis over [0, 3 sigma]")
    sub.add_parser("validate", parents=[common], help="run the invariant and oracle checks")
    return p


def resolve_config(args):
    cfg = load_config(args.config) if args.config else SimulationConfig()
    if args.desk_scale:
        cfg = desk_scale(cfg)
    if args.seed is not None:
        cfg = cfg.with_section("ensemble", base_seed=args.seed)
    if args.workers is not None:
        cfg = cfg.with_section("ensemble", workers=args.workers)
    if args.out is not None:
        cfg = cfg.with_section("output", directory=str(args.out))
    return cfg


def _scan_for(command, cfg, args):
    if args.config is not None and cfg.scan.parameter in _SCAN_FAMILY[command]:
        return ScanSpec.from_section(cfg.scan, command.replace("hom-", ""))
    if command == "hom-temporal":
        return temporal_scan()
    if command == "hom-spatial":
        return spatial_scan()
    return defocus_scan(args.defocus)


def _print_scan(study):
    for name, res in study.scans.items():
        for v, r in zip(res.values, res.rates):
            print(f"{name} {np.atleast_1d(v).tolist()} rate {r:.4f}")
        f = res.fit
        print(f"{name} fit: " + (f"sigma {tuple(round(s, 4) for s in f.sigma)}" if f.success else f.message))


def cmd_oracle(cfg, args):
    from .oracle import GaussianBiphotonParams, integrated_coincidence, quadrature_coincidence_tensor, \
        reference_total
    from .io import read_csv

    sq, ss = args.sigma_nu_q, args.sigma_nu_spdc
    if args.characterization:
        rows = {r["quantity"]: float(r["value"]) for r in read_csv(args.characterization)}
        sq, ss = rows["twin_sigma_nu_x"], rows["spdc_sigma_nu_y"]
    p = GaussianBiphotonParams.from_measured_widths(sq, ss)
    c0 = reference_total(p)
    dip_sx = p.sigma_q / np.sqrt(2) / (2 * np.pi)
    dip_sy = p.sigma_spdc / np.sqrt(2) / (2 * np.pi)
    rows, worst = [], 0.0
    for vx in np.linspace(0, 3 * dip_sx, args.points):
        for vy in np.linspace(0, 3 * dip_sy, args.points):
            dq = (2 * np.pi * vx, 2 * np.pi * vy)
            exact = float(integrated_coincidence(*dq, p))
            quad, _ = quadrature_coincidence_tensor(*dq, p)
            err = abs(quad - exact) / exact if exact > 0 else abs(quad) / c0
            worst = max(worst, err)
            rows.append(["tilt_grid", vx, vy, quad, c0, quad / c0, 1.0, 0.0, 0.0, dip_sx, dip_sy, err])
    out = Path(cfg.output.directory)
    path = write_csv(out / "oracle_dip.csv", DIP_CSV_HEADER, rows)
    write_json(out / "oracle_manifest.json", {"config_hash": cfg.hash, "sigma_nu_q": sq, "sigma_nu_spdc": ss,
                                              "max_relative_error": worst, "files": [path.name]})
    print(f"oracle dip widths: sigma_x {dip_sx:.4g} mm^-1, sigma_y {dip_sy:.4g} mm^-1")
    print(f"quadrature vs closed form: max relative error {worst:.3g} over {len(rows)} points -> {path}")
    return EXIT_OK if worst < 1e-6 else EXIT_NUMERICAL


def cmd_validate():
    from .validation import run_all

    checks = run_all()
    for c in checks:
        print(c.line())
    return EXIT_OK if all(c.passed for c in checks) else EXIT_NUMERICAL


def dispatch(args):
    cfg = resolve_config(args)
    out = Path(cfg.output.directory)
    workers = cfg.ensemble.workers
    if args.command == "validate":
        return cmd_validate()
    if args.command == "oracle":
        return cmd_oracle(cfg, args)
    if args.command == "single-run":
        manifest = single_run(cfg, out, args.realization)
        print(f"wrote {len(manifest['files'])} files to {out}")
        return EXIT_OK
    if args.command == "characterize":
        study = characterize(cfg, out, workers)
        for k, v in study.characterization.summary().items():
            print(f"{k}: {v:.6g}")
        return EXIT_OK
    study = run_scan(cfg, out, workers, [_scan_for(args.command, cfg, args)])
    _print_scan(study)
    print(f"mirror axis offset {study.mirror_axis_x * 1e3:.1f} um; outputs in {out}")
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return dispatch(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OutputError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
