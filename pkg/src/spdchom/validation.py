"""Invariant and oracle checks shared by the ``validate`` command and the test suite.

Each check returns a :class:`Check` holding the measured quantity, its
tolerance and the verdict, so callers can print or assert on the same data.
"""

from __future__ import annotations

import filecmp
import tempfile
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp

from .analysis import whiteness_test
from .crystal import CrystalParams, propagate_crystal, step_doubling_change
from .grid import NEAR_FREQ, NEAR_TIME, ComplexField3D, GridSpec, fft_t, fft_xy, ifft_t, ifft_xy, to_domain
from .interferometer import InterferometerConfig, beamsplitter_mix, detect_far_field
from .oracle import GaussianBiphotonParams, integrated_coincidence, quadrature_coincidence_tensor
from .sources import NoiseParams, PumpParams, gen_pump, gen_vacuum_field, plane_wave


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tolerance: float
    passed: bool
    detail: str = ""

    def line(self):
        verdict = "PASS" if self.passed else "FAIL"
        return f"[{verdict}] {self.name}: {self.value:.3g} (tolerance {self.tolerance:.3g}) {self.detail}".rstrip()


def _below(name, value, tol, detail=""):
    return Check(name, float(value), float(tol), bool(value < tol), detail)


def small_grid(n=16, dt=2.3):
    return GridSpec(n, n, n, 7.8e-3, 7.8e-3, dt)


def _random_field(grid, rng, beam="signal", pol="H", domain=NEAR_TIME):
    amp = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    return ComplexField3D(amp, grid, beam, pol, domain)


# transforms and beamsplitter


def check_parseval(seed=0, n=16):
    """Power and round trips of the unitary transforms."""
    rng = np.random.default_rng(seed)
    f = _random_field(small_grid(n), rng)
    p0 = f.power()
    errs = []
    for fwd, inv in ((fft_xy, ifft_xy), (fft_t, ifft_t)):
        g = fwd(f)
        errs.append(abs(g.power() - p0) / p0)
        errs.append(np.max(np.abs(inv(g).amplitude - f.amplitude)) / np.max(np.abs(f.amplitude)))
    return _below("FFT Parseval and round trip", max(errs), 1e-12)


def check_bs_unitarity(seed=1, n=16):
    """Power and inner products through a tilted beamsplitter with fractional-bin shifts."""
    rng = np.random.default_rng(seed)
    g = small_grid(n)
    cfg = InterferometerConfig(tilt_x=1.3 * g.dnu_x, tilt_y=-0.7 * g.dnu_y)
    a_s, a_i = (_random_field(g, rng, "signal", "H", NEAR_FREQ) for _ in range(2))
    b_s, b_i = (_random_field(g, rng, "signal", "H", NEAR_FREQ) for _ in range(2))
    a_i = a_i.with_amplitude(a_i.amplitude, beam="idler")
    b_i = b_i.with_amplitude(b_i.amplitude, beam="idler")
    a1, a2 = beamsplitter_mix(a_s, a_i, cfg)
    b1, b2 = beamsplitter_mix(b_s, b_i, cfg)

    def inner(u, v):
        return np.vdot(u[0].amplitude, v[0].amplitude) + np.vdot(u[1].amplitude, v[1].amplitude)

    before = inner((a_s, a_i), (b_s, b_i))
    after = inner((a1, a2), (b1, b2))
    norm_a = np.sqrt(inner((a_s, a_i), (a_s, a_i)).real)
    norm_b = np.sqrt(inner((b_s, b_i), (b_s, b_i)).real)
    p_err = abs(inner((a1, a2), (a1, a2)).real - norm_a ** 2) / norm_a ** 2
    ip_err = abs(after - before) / (norm_a * norm_b)
    return _below("beamsplitter unitarity", max(p_err, ip_err), 1e-10)


# vacuum


def vacuum_statistics(grid=None, seed=7, realization=0, variance=0.5):
    """(|mean| / bound, |<|a|^2> - variance| / standard error) for one vacuum field."""
    grid = grid or small_grid(32)
    f = gen_vacuum_field(grid, NoiseParams(variance, seed), "signal", realization)
    a = f.amplitude.ravel()
    n = a.size
    mean_ratio = abs(a.mean()) / (5 * np.sqrt(variance / n))
    inten = np.abs(a) ** 2
    se = inten.std(ddof=1) / np.sqrt(n)
    return mean_ratio, abs(inten.mean() - variance) / se


def check_vacuum_statistics(seed=7):
    mean_ratio, z = vacuum_statistics(seed=seed)
    return Check("vacuum statistics", max(mean_ratio, z / 3), 1.0, bool(mean_ratio < 1 and z < 3),
                 f"|mean| at {mean_ratio:.2f} of the 5-sigma bound, <|a|^2> off by {z:.2f} SE")


# single-mode solver oracles


def plane_wave_gain(crystal: CrystalParams, pump=1.0, seed_amp=1e-6, grid=None):
    """Idler photons per seed photon after the full solver, for plane waves."""
    grid = grid or GridSpec(8, 8, 8, 0.1, 0.1, 1.0)
    E_p = plane_wave(grid, pump, "pump", "V")
    E_s = plane_wave(grid, seed_amp, "signal", "H")
    E_i = plane_wave(grid, 0.0, "idler", "V")
    _, s, i = propagate_crystal(E_p, E_s, E_i, crystal, peak_amplitude=abs(pump))
    return float(np.mean(np.abs(i.amplitude) ** 2)) / seed_amp ** 2, s, i


def check_gain_oracle():
    cr = CrystalParams()
    gain, _, _ = plane_wave_gain(cr)
    expected = np.sinh(cr.g * cr.length) ** 2
    return _below("phase-matched gain vs sinh^2(g L)", abs(gain - expected) / expected, 1e-4,
                  f"gain {gain:.6g}, expected {expected:.6g}")


def ode_gain(g, length, delta_k, seed_amp=1e-6):
    """Idler gain from direct integration of the undepleted two-mode equations with mismatch.

    The pump carries the mismatch phase exp(-i dk z) of the solver's frame.
    """
    def rhs(z, y):
        s = y[0] + 1j * y[1]
        i = y[2] + 1j * y[3]
        p = np.exp(-1j * delta_k * z)
        ds = g * p * np.conj(i)
        di = g * p * np.conj(s)
        return [ds.real, ds.imag, di.real, di.imag]

    sol = solve_ivp(rhs, (0.0, length), [seed_amp, 0.0, 0.0, 0.0], method="DOP853", rtol=1e-12,
                    atol=1e-12 * seed_amp)
    i = sol.y[2, -1] + 1j * sol.y[3, -1]
    return abs(i) ** 2 / seed_amp ** 2


def check_mismatch_oracle(delta_k=4.0, n_steps=64):
    cr = CrystalParams(delta_k=delta_k, n_steps=n_steps)
    gain, _, _ = plane_wave_gain(cr)
    expected = ode_gain(cr.g, cr.length, delta_k)
    return _below(f"mismatched gain (dk = {delta_k} /mm) vs ODE", abs(gain - expected) / expected, 1e-3,
                  f"gain {gain:.6g}, ODE {expected:.6g}")


# full-crystal checks


def _stochastic_inputs(grid, seed=3, realization=0):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        E_p = gen_pump(grid, PumpParams())
    noise = NoiseParams(0.5, seed)
    return E_p, gen_vacuum_field(grid, noise, "signal", realization), gen_vacuum_field(grid, noise, "idler",
                                                                                       realization)


def check_manley_rowe(grid=None):
    """Change of sum(|E_s|^2 - |E_i|^2) relative to the generated signal photons."""
    grid = grid or small_grid(32)
    E_p, E_s, E_i = _stochastic_inputs(grid)
    _, s, i = propagate_crystal(E_p, E_s, E_i, CrystalParams())
    d_in = E_s.power() - E_i.power()
    d_out = s.power() - i.power()
    generated = s.power() - E_s.power()
    return _below("Manley-Rowe photon difference", abs(d_out - d_in) / generated, 1e-3)


def check_step_doubling(grid=None):
    grid = grid or small_grid(32)
    change = step_doubling_change(*_stochastic_inputs(grid), CrystalParams())
    return _below("split-step doubling change of SPDC power", change, 0.01)


# ensemble-level checks


def check_whiteness(n=64, grid=None, seed=11):
    """Far-field images of independent vacuum realizations through the detector."""
    grid = grid or small_grid(32)
    noise = NoiseParams(0.5, seed)
    im = [detect_far_field(to_domain(gen_vacuum_field(grid, noise, "signal", k), NEAR_TIME)).values
          for k in range(2 * n)]
    res = whiteness_test(np.stack(im[:n]), np.stack(im[n:]), "sum")
    return Check("independent-stack whiteness", res.max_abs_t, res.n_se, res.passed,
                 f"max |map|/SE over {res.n_offsets} offsets")


def check_determinism(workers=(1, 2), n=3):
    """Byte-identical persisted outputs for different worker counts."""
    from .config import SimulationConfig
    from .runner import ScanSpec, persist_study, run_study

    cfg = SimulationConfig()
    cfg = replace(cfg, grid=replace(cfg.grid, n_x=32, n_y=32, n_t=32), mirror_axis=0.0,
                  ensemble=replace(cfg.ensemble, n_realizations=n, n_characterization=n))
    scan = ScanSpec("d", "delay", (0.0, 8.0))
    dirs = []
    with tempfile.TemporaryDirectory() as tmp:
        for w in workers:
            out = Path(tmp) / f"w{w}"
            study = run_study(cfg, [scan], workers=w)
            persist_study(study, out, images=True, plots=False)
            dirs.append(out)
        files = sorted(p.relative_to(dirs[0]) for p in dirs[0].rglob("*.bin"))
        files += sorted(p.relative_to(dirs[0]) for p in dirs[0].rglob("*.csv"))
        same = [filecmp.cmp(dirs[0] / f, d / f, shallow=False) for d in dirs[1:] for f in files]
    n_diff = len(same) - sum(same)
    return Check(f"determinism across workers {workers}", n_diff, 1, n_diff == 0 and bool(files),
                 f"{len(files)} files compared")


def check_quadrature_oracle(sigma_nu_twin=2.4, sigma_nu_beam=39.4, n=5):
    """Tensor Gauss-Legendre integral of the joint probability vs the closed form on an n x n grid.

    Widths are the measured twin-beam and single-beam far-field stds (mm^-1).
    """
    p = GaussianBiphotonParams.from_measured_widths(sigma_nu_twin, sigma_nu_beam)
    worst = 0.0
    for dx in np.linspace(0, 3 * p.sigma_q, n):
        for dy in np.linspace(0, 3 * p.sigma_spdc, n):
            exact = integrated_coincidence(dx, dy, p)
            value, _ = quadrature_coincidence_tensor(dx, dy, p)
            worst = max(worst, abs(value - exact) / exact if exact > 0 else abs(value) / p.phi0 ** 2)
    return _below(f"quadrature vs closed form ({n}x{n} tilts)", worst, 1e-6)


QUICK_CHECKS = (check_parseval, check_bs_unitarity, check_vacuum_statistics, check_gain_oracle,
                check_mismatch_oracle, check_manley_rowe, check_step_doubling, check_whiteness,
                check_quadrature_oracle)


def run_all(include_determinism=True):
    checks = [c() for c in QUICK_CHECKS]
    if include_determinism:
        checks.append(check_determinism())
    return checks
