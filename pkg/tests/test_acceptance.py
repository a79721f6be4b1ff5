"""Acceptance criteria, each run at its stated scale and tolerance.

Every test records one line in ``conftest.ACCEPTANCE``; the terminal summary
prints them as PASS/FAIL.
"""
from dataclasses import replace
import itertools
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import ks_2samp

from conftest import ACCEPTANCE
from fwdboot import dgp
from fwdboot.bench import ExperimentConfig, preset_config, run_experiment
from fwdboot.dgp import DGPSpec, substream
from fwdboot.engine import fit_forecaster, oracle_paths, oracle_predict, simulate_paths
from fwdboot.kernel_regress import EstimatedModel, TruncationBounds
from fwdboot.residuals import ResidualDist

TESTS = Path(__file__).parent


def record(key, ok, detail):
    ACCEPTANCE[key] = (bool(ok), detail)
    print(f"{'PASS' if ok else 'FAIL'}  criterion {key}: {detail}")
    assert ok, detail


def fmt(a, d=3):
    return "/".join(f"{v:.{d}f}" for v in a)


def test_1_point_prediction_fidelity():
    t = run_experiment(preset_config("table1-T100", N=500, M=1000, seed=1))
    boot, orac = t.column("L2-Bootstrap", "mspe"), t.column("L2-Oracle", "mspe")
    ok = (abs(boot[0] - 1.1088) <= 0.15 and abs(orac[0] - 1.0181) <= 0.15
          and np.all(boot >= orac))
    record("1", ok, f"bootstrap MSPE {fmt(boot, 4)}; oracle MSPE {fmt(orac, 4)}")


def test_2_loss_ordering_skewed_innovations():
    cfg = ExperimentConfig("model1-chisq", T=200, methods=("L2-Bootstrap", "L1-Bootstrap"),
                           N=500, M=1000, seed=2)
    t = run_experiment(cfg)
    l2, l1 = t.column("L2-Bootstrap", "mspe"), t.column("L1-Bootstrap", "mspe")
    record("2", np.all(l2 < l1), f"L2 MSPE {fmt(l2, 4)}; L1 MSPE {fmt(l1, 4)}")


@pytest.mark.slow
def test_3_interval_ordering():
    cfg = preset_config("table4-T50", N=300, B=300, M_ppi=100, seed=3)
    cfg = replace(cfg, methods=("QPI-f", "QPI-p", "QPI-p-u", "L2-PPI-p-u"))
    t = run_experiment(cfg)
    qf, qp = t.column("QPI-f", "cvr"), t.column("QPI-p", "cvr")
    qpu, ppu = t.column("QPI-p-u", "cvr"), t.column("L2-PPI-p-u", "cvr")
    ok = (np.all(qp > qf) and np.all(ppu[1:] >= qpu[1:] - 0.01)
          and np.all((0.91 <= ppu) & (ppu <= 0.97)))
    record("3", ok, f"QPI-f {fmt(qf)}; QPI-p {fmt(qp)}; QPI-p-u {fmt(qpu)}; "
                    f"L2-PPI-p-u {fmt(ppu)}")


@pytest.mark.slow
def test_4_under_vs_over_smoothed_generation():
    cfg = ExperimentConfig("model1-normal", T=50, methods=("L2-PPI-f-u", "L2-PPI-f-o"),
                           N=300, B=300, M_ppi=100, M=500, seed=4)
    t = run_experiment(cfg)
    u, o = t.column("L2-PPI-f-u", "cvr"), t.column("L2-PPI-f-o", "cvr")
    gap = u[2:] - o[2:]
    record("4", np.all(gap >= 0.02), f"f-u {fmt(u)}; f-o {fmt(o)}; gap k>=3 {fmt(gap)}")


@pytest.mark.slow
def test_5_bootstrap_law_converges_to_oracle():
    spec = dgp.preset("model1-normal")
    M = 10**4
    stats = []
    for trial in range(50):
        x = dgp.generate_series(spec, 1000, substream(5, trial, "series"))
        fit = fit_forecaster(x, "B2", "fitted", homoscedastic=True)
        boot = simulate_paths(fit.model, fit.dist, x[-1], 2, M, substream(5, trial, "boot"))
        orac = oracle_paths(spec, x[-1], 2, M, substream(5, trial, "oracle"))
        stats.append(ks_2samp(boot.paths[:, 1], orac[:, 1]).statistic)
    stats = np.array(stats)
    passed = int(np.sum(stats < 0.05))
    record("5", passed >= 45, f"{passed}/50 trials with KS < 0.05 "
                              f"(median {np.median(stats):.4f}, max {stats.max():.4f})")


def _enumerate(mean, sd, x0):
    out = []
    for e1, e2 in itertools.product((-1.0, 1.0), repeat=2):
        x1 = mean(x0) + sd(x0) * e1
        out.append(mean(x1) + sd(x1) * e2)
    return np.array(out)


def _identity(x):
    return np.asarray(x, dtype=np.float64)


def _ones(x):
    return np.ones_like(np.asarray(x, dtype=np.float64))


def test_6_two_point_enumeration():
    M = 10**5
    tol = 3 / math.sqrt(M)
    pm = ResidualDist(np.array([-1.0, 1.0]))
    notes, ok = [], True

    # fitted model on a two-point series
    spec = DGPSpec("log_sq", "two_point")
    x = dgp.generate_series(spec, 200, substream(6, "series"))
    fit = fit_forecaster(x, "B2", "fitted", homoscedastic=True)
    m = fit.model
    vals = _enumerate(lambda v: m.mean(v)[0], lambda v: m.sd(v)[0], x[-1])
    paths = simulate_paths(m, pm, x[-1], 2, M, substream(6, "paths"))
    end = paths.paths[:, 1]
    idx = np.argmin(np.abs(end[:, None] - vals[None, :]), axis=1)
    snapped = np.max(np.abs(end - vals[idx]))
    freq = np.bincount(idx, minlength=4) / M
    lo, hi = np.sort(vals)[1:3]
    med = np.median(end)
    ok &= paths.n_guard == 0 and snapped < 1e-9 and np.all(np.abs(freq - 0.25) <= 0.01)
    ok &= abs(end.mean() - vals.mean()) <= tol and lo - 1e-12 <= med <= hi + 1e-12
    notes.append(f"fitted: freq {fmt(freq)}, mean err {abs(end.mean() - vals.mean()):.4f}")

    # true recursion m(x) = x, sigma = 1: endpoints -2, 0, 0, 2 with a unique median
    ident = DGPSpec("custom", "two_point", mean_fn=_identity, sd_fn=_ones)
    vals = _enumerate(_identity, _ones, 0.0)
    orac = oracle_paths(ident, 0.0, 2, M, substream(6, "oracle"))[:, 1]
    res = oracle_predict(ident, 0.0, 2, M, 0.05, substream(6, "oracle"))
    freq = np.array([np.mean(orac == v) for v in (-2.0, 0.0, 2.0)])
    ok &= np.all(np.abs(freq - [0.25, 0.5, 0.25]) <= 0.01)
    ok &= abs(res.l2_point[1] - vals.mean()) <= tol and res.l1_point[1] == np.median(vals)
    notes.append(f"oracle: freq {fmt(freq)}, L2 {res.l2_point[1]:+.4f}, L1 {res.l1_point[1]:+.1f}")

    # estimated model reproducing the same recursion exactly
    grid = np.arange(-3.0, 4.0)
    em = EstimatedModel.from_pairs(grid, grid, 0.5, homoscedastic=True,
                                   bounds=TruncationBounds(100.0, 1.0, 1.0))
    end = simulate_paths(em, pm, 0.0, 2, M, substream(6, "grid")).paths[:, 1]
    freq = np.array([np.mean(end == v) for v in (-2.0, 0.0, 2.0)])
    ok &= np.all(np.abs(freq - [0.25, 0.5, 0.25]) <= 0.01)
    ok &= abs(end.mean()) <= tol and np.median(end) == 0.0
    notes.append(f"grid model: freq {fmt(freq)}")
    record("6", ok, "; ".join(notes))


PROPERTY_TESTS = [
    "test_kernel_regress.py::test_kernel_mass_is_one",
    "test_kernel_regress.py::test_nw_mean_convexity",
    "test_kernel_regress.py::test_nw_mean_shift_equivariance",
    "test_kernel_regress.py::test_truncated_estimates_within_bounds",
    "test_kernel_regress.py::test_truncate_sd_range",
    "test_kernel_regress.py::test_excluded_index_matches_reduced_pairs",
    "test_residuals.py::test_center_mean_zero_and_sorted",
    "test_residuals.py::test_predictive_equals_manual_deletion",
    "test_backends.py::test_loo_parts_bit_exact",
    "test_backends.py::test_predictive_residuals_bit_exact_per_backend",
    "test_engine.py::test_qpi_nesting",
    "test_engine.py::test_guard_value_totals",
    "test_engine.py::test_paths_bounded",
    "test_bench.py::test_workers_do_not_change_results",
]


def test_7_property_suite():
    proc = subprocess.run(
        [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
         *[str(TESTS / t) for t in PROPERTY_TESTS]],
        capture_output=True, text=True, cwd=TESTS.parent)
    tail = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    record("7", proc.returncode == 0, f"{len(PROPERTY_TESTS)} property groups: {tail}")
