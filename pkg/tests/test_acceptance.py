"""End-to-end acceptance criteria, one test per criterion.

Each test prints a ``criterion N: PASS/FAIL`` line (collected again in the
terminal summary) before asserting.
"""

import time

import numpy as np
import pytest

import oracles
from conftest import SESSION
from fluxq.circuit import FluxBias, build_hamiltonian, load_preset
from fluxq.decoherence import NoiseEnvironment, analytic_charge_matrix_element, total_t1
from fluxq.eigensolver import SolveOptions, eigensolve, solve_spectrum
from fluxq.landscape import Axis, CrosstalkMatrix, ReadoutModel, current_window, fixed_probe_map
from fluxq.landscape import find_extremal_points, sweep_frequency
from fluxq.landscape.calibration import infer_crosstalk
from fluxq.landscape.readout import calibration_probe
from fluxq.tls import SwapSpectrumConfig, is_detectable, sample_ensemble, simulate_strain_spectrum, tls_frequency

PRESETS = ("sample_A", "sample_B")
F01_HALF_ALPHA = 12.74343946971743
CHARGE_T1_3P32 = 5.376783043589401e-05


def test_criterion_1_tunability_landscape(sample_a, record_criterion):
    t0 = time.perf_counter()
    fmap = sweep_frequency(sample_a, Axis("phi_t", -0.5, 0.5, 101), Axis("phi_b", 0.0, 2.0, 101))
    elapsed = time.perf_counter() - t0
    star, triangle = find_extremal_points(fmap)
    cell = fmap.rows.step
    lo, hi = float(np.nanmin(fmap.values)), float(np.nanmax(fmap.values))
    checks = [
        fmap.n_sentinel == 0,
        lo <= 0.010,
        abs(hi - 21.0) <= 0.15 * 21.0,
        abs(star.phi_b - 1.0) <= cell,
        abs(triangle.phi_b - 2.0) <= cell,
        elapsed < 120.0,
    ]
    record_criterion(1, all(checks),
                     f"min {lo * 1e3:.4g} MHz, max {hi:.4f} GHz, star phi_b={star.phi_b:.2f}, "
                     f"triangle phi_b={triangle.phi_b:.2f}, {elapsed:.1f} s")
    assert all(checks)


def test_criterion_2_harmonic_limit(sample_a, record_criterion):
    res = solve_spectrum(sample_a, FluxBias(0.0, 0.5))
    harmonic = np.sqrt(2 * 164.0 * 0.5)
    ref = np.linalg.eigvalsh(oracles.quadrature_hamiltonian(164.0, 0.5, 0.85, 0.0, 0.5, 100))
    checks = [
        abs(res.f01 - harmonic) / harmonic < 0.02,
        abs(res.f01 - (ref[1] - ref[0])) / res.f01 < 1e-9,
        abs(res.f01 - F01_HALF_ALPHA) / F01_HALF_ALPHA < 1e-9,
    ]
    record_criterion(2, all(checks),
                     f"f01 {res.f01:.6f} GHz vs harmonic {harmonic:.4f} ({(res.f01 / harmonic - 1) * 100:+.2f}%)")
    assert all(checks)


def test_criterion_3_eigensolver_oracle(record_criterion):
    rng = np.random.default_rng(2024)
    worst_oracle, worst_residual, limited = 0.0, 0.0, 0
    for name in PRESETS:
        p = load_preset(name)
        for cutoff in range(1, 9):
            for phi_t, phi_b in rng.uniform([-1, -1], [1, 3], size=(3, 2)):
                h = build_hamiltonian(p, FluxBias(phi_t, phi_b), cutoff)
                ref = oracles.jacobi_eigvalsh(h.entries)
                got = eigensolve(h, h.dimension).levels
                worst_oracle = max(worst_oracle, float(np.max(np.abs(got - ref) / np.abs(ref))))
        for phi_t, phi_b in rng.uniform([-0.5, 0.0], [0.5, 2.0], size=(20, 2)):
            res = solve_spectrum(p, FluxBias(phi_t, phi_b))
            limited += res.resolution_limited
            worst_residual = max(worst_residual, res.residual)
    ok = worst_oracle < 1e-9 and worst_residual < 1e-8 and limited == 0
    record_criterion(3, ok, f"max oracle rel diff {worst_oracle:.2e}, max f01 residual {worst_residual:.2e}")
    assert ok


def test_criterion_4_relaxation_budget(sample_a, record_criterion):
    readout = ReadoutModel.from_device(sample_a, kappa_mhz=1.0)
    env = NoiseEnvironment(0.025, 50.0, 0.22)
    b = total_t1(3.32, sample_a, readout, env)
    purcell_ref = float(oracles.purcell_t1(3.32, 7.662, 75.0, 1.0))
    charge_ref = float(oracles.charge_t1(0.5, 3.32, analytic_charge_matrix_element(sample_a), 0.025, 50.0, 0.22))
    checks = [
        abs(b.t1_purcell_s - purcell_ref) / purcell_ref <= 1e-6,
        abs(b.t1_purcell_s - 0.132) < 5e-4,
        10e-6 <= b.t1_charge_s < 100e-6,
        abs(b.t1_charge_s - charge_ref) / charge_ref < 1e-12,
        abs(b.t1_charge_s - CHARGE_T1_3P32) / CHARGE_T1_3P32 < 1e-12,
        0.1 < b.t1_total_s / 25e-6 < 10,
        0.1 < b.q_total / 530e3 < 10,
    ]
    record_criterion(4, all(checks),
                     f"Purcell {b.t1_purcell_s:.6f} s, charge {b.t1_charge_s * 1e6:.2f} us, "
                     f"total {b.t1_total_s * 1e6:.2f} us, Q {b.q_total:.3g}")
    assert all(checks)


def crosstalk_cases(n=50, seed=1):
    """Random invertible crosstalk with condition number below 10 and offsets in +-0.2."""
    rng = np.random.default_rng(seed)
    cases = []
    for _ in range(n):
        while True:
            d = np.diag(rng.uniform(0.5, 2.0, 2))
            e = np.array([[0.0, rng.uniform(-0.3, 0.3)], [rng.uniform(-0.3, 0.3), 0.0]])
            m = d @ (np.eye(2) + e) if rng.random() < 0.5 else (np.eye(2) + e) @ d
            if np.linalg.cond(m) < 10:
                break
        cases.append(CrosstalkMatrix(m, rng.uniform(-0.2, 0.2, 2)))
    return cases


def test_criterion_5_crosstalk_round_trip(sample_a, record_criterion):
    readout = calibration_probe(sample_a, ReadoutModel.from_device(sample_a))
    opts = SolveOptions(f01_rel_tol=1e-6)
    worst_rel, worst_off, worst_ratio, failures = 0.0, 0.0, np.inf, []
    for k, truth in enumerate(crosstalk_cases()):
        i_t, i_b = current_window(truth, (-0.75, 0.75), (0.2, 1.8), (39, 39))
        fmap = fixed_probe_map(sample_a, readout, truth, i_t, i_b, opts)
        guess = CrosstalkMatrix(np.diag(np.diag(truth.m)), np.zeros(2))
        r = infer_crosstalk(fmap, guess)
        rel = float(np.max(np.abs(r.xtalk.m - truth.m) / np.abs(truth.m)))
        off = float(np.max(np.abs(r.xtalk.offset - truth.offset)))
        worst_rel, worst_off = max(worst_rel, rel), max(worst_off, off)
        worst_ratio = min(worst_ratio, r.improvement)
        if not (rel < 0.01 and off < 0.005 and r.improvement >= 100):
            failures.append(k)
    record_criterion(5, not failures,
                     f"50 cases, max entry rel err {worst_rel:.2e}, max offset err {worst_off:.2e}, "
                     f"min improvement {worst_ratio:.0f}x, failed {failures}")
    assert not failures


def minima_vs_traces(ensemble, cfg):
    """Distances (in cells) from each per-column local survival minimum to the nearest hyperbola.

    Also returns the fraction of in-window trace points that have a local
    minimum within one cell.
    """
    fmap = simulate_strain_spectrum(None, ensemble, cfg)
    f = cfg.freq_axis
    p = fmap.values
    traces = np.array([tls_frequency(d, cfg.strain_axis.values) for d in ensemble])
    is_min = np.zeros_like(p, dtype=bool)
    is_min[1:-1] = (p[1:-1] < p[:-2]) & (p[1:-1] <= p[2:])
    dist, hit, total = [], 0, 0
    for j in range(cfg.strain_axis.count):
        rows = f.values[is_min[:, j]]
        for r in rows:
            dist.append(np.min(np.abs(traces[:, j] - r)) / f.step)
        inside = traces[:, j][(traces[:, j] > f.start + f.step) & (traces[:, j] < f.stop - f.step)]
        total += inside.size
        hit += sum(bool(rows.size) and np.min(np.abs(rows - e)) <= f.step for e in inside)
    return np.array(dist), hit / max(total, 1)


def test_criterion_6_tls_traces(record_criterion):
    cfg = SwapSpectrumConfig(Axis("strain", -1.0, 1.0, 41), Axis("f01", 3.0, 7.0, 401))
    worst, checked, coverage = 0.0, 0, []
    for seed in range(10):
        ens = sample_ensemble(5.0, (3.0, 7.0), 0.2, 1.0, seed=seed)
        assert len(ens) >= 10
        dist, cov = minima_vs_traces(list(ens)[:10], cfg)
        worst, checked = max(worst, float(dist.max())), checked + dist.size
        coverage.append(cov)
    # equal-width windows an octave apart, same defect density in each
    strain = Axis("strain", -1.0, 1.0, 41)
    low = SwapSpectrumConfig(strain, Axis("f01", 3.0, 3.6, 61))
    high = SwapSpectrumConfig(strain, Axis("f01", 6.0, 6.6, 61))
    n_low = n_high = seen_low = seen_high = 0
    for seed in range(200):
        ens_low = sample_ensemble(10.0, (3.0, 3.6), 0.1, 1.0, seed=seed)
        ens_high = sample_ensemble(10.0, (6.0, 6.6), 0.1, 1.0, seed=10_000 + seed)
        n_low, n_high = n_low + len(ens_low), n_high + len(ens_high)
        seen_low += sum(is_detectable(d, low, 0.1) for d in ens_low)
        seen_high += sum(is_detectable(d, high, 0.1) for d in ens_high)
    ok = worst <= 1.0 and checked > 1000 and seen_high > seen_low
    record_criterion(6, ok,
                     f"{checked} column minima, max distance to a hyperbola {worst:.2f} cells, "
                     f"traces resolved {min(coverage):.0%}..{max(coverage):.0%}; detectable "
                     f"{seen_low}/{n_low} (3.0-3.6 GHz) vs {seen_high}/{n_high} (6.0-6.6 GHz)")
    assert ok


# one representative test per invariant family named in the criterion
PROPERTY_TESTS = {
    "Hermiticity": ["test_circuit.py::TestHamiltonian::test_hermitian"],
    "periodicity": ["test_circuit.py::TestPotential::test_periodic",
                    "test_circuit.py::TestHamiltonian::test_spectrum_periodic"],
    "tilt parity": ["test_circuit.py::TestHamiltonian::test_tilt_parity",
                    "test_landscape.py::TestSweep::test_tilt_parity"],
    "rate additivity": ["test_decoherence.py::TestBudget::test_total_dominated_by_charge",
                        "test_tls.py::TestRates::test_superposition"],
    "PSD scaling laws": ["test_decoherence.py::TestChargeNoise::test_increasing_in_temperature",
                         "test_decoherence.py::TestChargeNoise::test_linear_in_impedance_and_quadratic_in_gate_capacitance"],
    "survival bounds": ["test_tls.py::TestSurvival::test_bounds",
                        "test_tls.py::TestSurvival::test_decreases_with_coupling"],
    "seeded determinism": ["test_tls.py::TestEnsemble::test_seeded",
                           "test_cli.py::TestOtherCommands::test_tls_determinism"],
}


def test_criterion_7_property_suites(record_criterion):
    outcomes = SESSION["outcomes"]
    others = {k: v for k, v in outcomes.items() if "test_acceptance.py" not in k}
    if not others:
        pytest.skip("property suites were not part of this run")
    bad = sorted(k for k, v in others.items() if v not in ("passed", "xfailed"))
    missing = [name for names in PROPERTY_TESTS.values() for name in names
               if not any(k.endswith(name) and v == "passed" for k, v in others.items())]
    elapsed = time.perf_counter() - SESSION["start"]
    ok = not bad and not missing and elapsed < 300.0
    record_criterion(7, ok, f"{len(others)} property/unit tests, failing {bad}, missing {missing}, "
                            f"suite time so far {elapsed:.0f} s")
    assert ok
