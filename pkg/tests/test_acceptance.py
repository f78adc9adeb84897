"""Desk-scale acceptance suite (64^3 grid, N = 100 paired realizations).

One study is run per session and shared by the criteria; each check records
its measured value and tolerance, and a summary line per criterion is
printed at the end of the run.
"""

import time
import warnings

import numpy as np
import pytest

from conftest import record
from spdchom.analysis import law_eberly_K, locate_reflected_peak, schmidt_numbers, whiteness_test
from spdchom.config import SimulationConfig, desk_scale
from spdchom.crystal import CrystalParams
from spdchom.runner import (PEAK_CHECK_TILT, defocus_scan, peak_check_scan, run_study, spatial_scan,
                            temporal_scan)
from spdchom import validation as v

# reference characterization at the default parameters
REF_WIDTHS = {"twin_sigma_x": 8.9e-3, "twin_sigma_y": 7.6e-3, "twin_sigma_nu_x": 5.1, "twin_sigma_nu_y": 4.5,
              "twin_sigma_t": 2.7, "twin_sigma_lambda": 9.4e-3}
REF_SCHMIDT = {"K_x": 121.0, "K_y": 213.0, "K_t": 1094.0}


def rel_err(a, b):
    return abs(a - b) / abs(b)


def check(criterion, label, ok, detail):
    record(criterion, label, ok, detail)
    return ok


@pytest.fixture(scope="session")
def study():
    cfg = desk_scale(SimulationConfig())
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return run_study(cfg, [temporal_scan(), spatial_scan(), defocus_scan(), peak_check_scan()],
                         characterize=True)


@pytest.fixture(scope="session")
def summary(study):
    return study.characterization.summary()


# 1. temporal dip


def test_criterion_1_temporal_dip(study, summary):
    res = study.scans["temporal"]
    delays = res.values
    assert len(delays) == 11
    r0 = float(res.rates[delays == 0.0][0])
    plateau = res.rates[np.abs(delays) >= 15]
    s_hom = res.fit.sigma[0] if res.fit.success else np.nan
    s_twin = summary["twin_sigma_t"]
    oks = [
        check(1, "rate(0) <= 0.05", r0 <= 0.05, f"{r0:.3f}"),
        check(1, "plateau 0.5 +- 0.1", plateau.size > 0 and np.all(np.abs(plateau - 0.5) <= 0.1),
              f"{np.round(plateau, 3).tolist()}"),
        check(1, "sigma_t HOM within 30% of twin", rel_err(s_hom, s_twin) <= 0.3,
              f"{s_hom:.3f} vs {s_twin:.3f} ps"),
    ]
    assert all(oks)


# 2. spatial anisotropy and reflected peak


def test_criterion_2_spatial_anisotropy(study, summary):
    fit = study.scans["spatial"].fit
    assert fit.success, fit.message
    sx, sy = fit.sigma
    tx, sy_beam = summary["twin_sigma_nu_x"], summary["spdc_sigma_nu_y"]
    oks = [
        check(2, "sigma_nu_x HOM within 30% of twin", rel_err(sx, tx) <= 0.3, f"{sx:.2f} vs {tx:.2f} mm^-1"),
        check(2, "sigma_nu_y HOM within 30% of SPDC", rel_err(sy, sy_beam) <= 0.3,
              f"{sy:.1f} vs {sy_beam:.1f} mm^-1"),
    ]
    assert all(oks)


def test_criterion_2_reflected_peak(study):
    cmap = study.scan_maps["peak_check"][PEAK_CHECK_TILT]
    center, fit = locate_reflected_peak(cmap, study.reference_fit.sigma)
    bin_x = float(cmap.axis_x[1] - cmap.axis_x[0])
    bin_y = float(cmap.axis_y[1] - cmap.axis_y[0])
    want = (2 * PEAK_CHECK_TILT[0], 0.0)
    ok = abs(center[0] - want[0]) <= bin_x and abs(center[1] - want[1]) <= bin_y
    assert check(2, "reflected peak at (2 dnu_x, 0) within a bin", ok,
                 f"({center[0]:.2f}, {center[1]:.2f}) vs ({want[0]:.1f}, 0), bin {bin_x:.2f}")


# 3. defocus


def test_criterion_3_defocus(study, summary):
    f0, fd = study.scans["spatial"].fit, study.scans["defocus"].fit
    assert f0.success and fd.success
    ty = summary["twin_sigma_nu_y"]
    change = rel_err(fd.sigma[0], f0.sigma[0])
    oks = [
        check(3, "sigma_nu_y HOM(5 mm) < twin sigma_nu_y", fd.sigma[1] < ty, f"{fd.sigma[1]:.2f} < {ty:.2f}"),
        check(3, "sigma_nu_x HOM change < 20%", change < 0.2,
              f"{fd.sigma[0]:.2f} vs {f0.sigma[0]:.2f} ({100 * change:.1f}%)"),
    ]
    assert all(oks)


# 4. characterization


def test_criterion_4_correlation_widths(summary):
    oks = []
    for key, ref in REF_WIDTHS.items():
        got = summary[key]
        oks.append(check(4, f"{key} within 20%", rel_err(got, ref) <= 0.2, f"{got:.4g} vs {ref:.4g}"))
    assert all(oks)


def test_criterion_4_schmidt_numbers(summary):
    oks = []
    for key, ref in REF_SCHMIDT.items():
        got = summary[key]
        oks.append(check(4, f"{key} within 35%", rel_err(got, ref) <= 0.35, f"{got:.0f} vs {ref:.0f}"))
    assert all(oks)


def test_criterion_4_schmidt_formula_on_reference_widths():
    k = schmidt_numbers(8.9e-3, 7.6e-3, 2.7, 5.1, 4.5, 5.6e-3)
    got = (k.K_x, k.K_y, k.K_t)
    ok = all(rel_err(g, r) <= 0.35 for g, r in zip(got, REF_SCHMIDT.values()))
    assert check(4, "K from reference widths", ok, f"{got[0]:.0f}, {got[1]:.0f}, {got[2]:.0f}")


def test_criterion_4_law_eberly():
    k = law_eberly_K(0.1, 38.2)
    assert check(4, "law_eberly_K(0.1, 38.2) = 71 +- 1", abs(k - 71) <= 1, f"{k:.2f}")


# 5. oracle equivalence


def test_criterion_5_oracle(summary):
    t0 = time.perf_counter()
    c = v.check_quadrature_oracle(summary["twin_sigma_nu_x"], summary["spdc_sigma_nu_y"], n=5)
    dt = time.perf_counter() - t0
    oks = [check(5, "quadrature vs closed form 5x5 <= 1e-6", c.passed, f"{c.value:.2e}"),
           check(5, "runtime seconds", dt < 10.0, f"{dt:.2f} s")]
    assert all(oks)


# 6. solver oracles


def test_criterion_6_gain():
    c = v.check_gain_oracle()
    assert check(6, "matched gain vs sinh^2 <= 1e-4", c.passed, f"{c.value:.2e}")


def test_criterion_6_mismatch():
    c = v.check_mismatch_oracle()
    assert check(6, "mismatched gain vs ODE <= 1e-3", c.passed, f"{c.value:.2e}")


def test_criterion_6_manley_rowe():
    c = v.check_manley_rowe(desk_scale().grid)
    assert check(6, "Manley-Rowe <= 1e-3", c.passed, f"{c.value:.2e}")


def test_criterion_6_step_doubling():
    c = v.check_step_doubling(desk_scale().grid)
    assert check(6, "step doubling < 1%", c.passed, f"{100 * c.value:.3f}%")


# 7. structural invariants


def test_criterion_7_parseval():
    c = v.check_parseval()
    assert check(7, "Parseval <= 1e-12", c.passed, f"{c.value:.1e}")


def test_criterion_7_bs_unitarity():
    c = v.check_bs_unitarity()
    assert check(7, "BS unitarity <= 1e-10", c.passed, f"{c.value:.1e}")


def test_criterion_7_vacuum():
    c = v.check_vacuum_statistics()
    assert check(7, "vacuum moments within SE", c.passed, c.detail)


def test_criterion_7_determinism():
    c = v.check_determinism()
    assert check(7, "byte-identical for workers 1 and 2", c.passed, c.detail)


def test_criterion_7_whiteness_vacuum():
    c = v.check_whiteness()
    assert check(7, "vacuum whiteness < 5 SE", c.passed, f"max t {c.value:.2f}")


def test_criterion_7_whiteness_simulated(study):
    ff = study.data.stacks["char/ff"]
    half = ff.shape[0] // 2
    indep = whiteness_test(ff[:half, 0], ff[half:2 * half, 1], "sum")
    paired = whiteness_test(ff[:half, 0], ff[:half, 1], "sum")
    ok = indep.passed and not paired.passed
    assert check(7, "independent SPDC stacks white, twin stacks not", ok,
                 f"max t {indep.max_abs_t:.2f} vs paired {paired.max_abs_t:.1f}")
