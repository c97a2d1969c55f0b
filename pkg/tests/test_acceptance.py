"""Acceptance criteria, one test each.

Every test prints a single ``[acceptance NN] PASS|FAIL ...`` line straight to
the terminal (bypassing capture) and then asserts the same verdict, so
``pytest -v`` shows both the per-criterion summary and the usual result.
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from heatwave import checks, cli
from heatwave import experiments as E
from heatwave import solver as S


@pytest.fixture
def report(capsys):
    def emit(n, name, ok, detail):
        with capsys.disabled():
            print(f"\n[acceptance {n:02d}] {'PASS' if ok else 'FAIL'} {name}: {detail}")
        assert ok, f"criterion {n} ({name}) failed: {detail}"
    return emit


def _all_pass(results):
    return all(r.passed or r.informational for r in results)


def _summary(results):
    return "; ".join(r.line() for r in results)


# --------------------------------------------------------------------------
# kernels

def test_01_dual_representation(report):
    t0 = time.perf_counter()
    res = checks.check_dual_representation(series_tol=1e-12, n=500)
    elapsed = time.perf_counter() - t0
    worst = max(r.max_error for r in res)
    ok = _all_pass(res) and worst <= 1e-10 and elapsed < 10.0 and all(r.samples == 500 for r in res)
    report(1, "image and eigen series agree", ok,
           f"max|diff|={worst:.2e} (tol 1e-10) over 3x500 points in {elapsed:.2f}s (limit 10s)")


def test_02_semigroup(report):
    res = checks.check_semigroup(n=100, tol=1e-8)
    ok = _all_pass(res) and all(r.samples == 100 for r in res)
    report(2, "Chapman-Kolmogorov", ok,
           f"max residual={max(r.max_error for r in res):.2e} (tol 1e-8)")


def test_03_mass(report):
    res = checks.check_mass(n=100, tol=1e-10)
    ok = _all_pass(res)
    report(3, "kernel mass", ok, _summary(res))


def test_04_neumann_l1_identity(report):
    res = checks.check_neumann_identity(n=100, tol=1e-8)
    report(4, "Neumann discrepancy L1 equals outside mass", _all_pass(res),
           f"max|diff|={res[0].max_error:.2e} (tol 1e-8)")


def test_05_bound_suites(report):
    res = []
    res += checks.check_tail_lemma(10_000)
    res += checks.check_outside_mass(10_000)
    res += checks.check_l1_bounds(10_000)
    res += checks.check_l2_bounds(10_000)
    res += checks.check_pointwise(10_000)
    graded = [r for r in res if not r.informational and r.samples == 10_000]
    viol = sum(r.violations for r in graded)
    ok = _all_pass(graded) and viol == 0 and len(graded) >= 20
    report(5, "inequality suites", ok,
           f"{len(graded)} inequalities x 1e4 samples, violations={viol}, "
           f"min slack={min(r.slack for r in graded if not math.isnan(r.slack)):.2e}")


# --------------------------------------------------------------------------
# Gronwall resolvents

def test_06_gronwall_resolvents(report):
    res, degraded = checks.run_gronwall_suite()
    resolvent = [r for r in res if r.name.startswith("resolvent") and not r.informational]
    ok = _all_pass(res) and not degraded and len(resolvent) == 9
    worst = ", ".join(f"{r.name}={r.max_error:.3f}" for r in resolvent)
    report(6, "series vs closed resolvents", ok, f"degraded={degraded}; {worst}")


# --------------------------------------------------------------------------
# solver

def _mode_error(dx, t=0.25, L=1.0):
    lat = S.LatticeSpec.make(L, dx, t)
    sol = S.solve("dirichlet", lat, S.coefficients("zero"), S.initial_condition("dirichlet_mode"),
                  snapshot_times=[t])
    exact = math.exp(-math.pi ** 2 * t / (4 * L * L)) * np.sin(np.pi * (lat.x + L) / (2 * L))
    return float(np.max(np.abs(sol.values[-1] - exact)))


def test_07_eigenmode_convergence(report):
    errs = [_mode_error(dx) for dx in (1 / 16, 1 / 32, 1 / 64)]
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    ok = min(ratios) >= 3.5 and errs[2] <= 1e-3
    report(7, "second-order eigenmode decay", ok,
           f"errors={[f'{e:.2e}' for e in errs]} ratios={[f'{r:.2f}' for r in ratios]}")


def test_08_linear_monte_carlo(report):
    t0 = time.perf_counter()
    cfg = E.SweepConfig("dirichlet", [1.0, 2.0, 3.0], [0.5], [0.0], n_reps=2000, dx=1 / 32,
                        coeffs="linear", u0="zero", base_seed=8, method="mc")
    recs = E.sweep(cfg)
    elapsed = time.perf_counter() - t0
    gaps = []
    for r in recs:
        # SE of the squared estimate by the delta method
        gaps.append(abs(r.error ** 2 - r.exact_variance) / (2 * r.error * r.std_error))
    ok = max(gaps) <= 3.0 and elapsed < 300.0
    report(8, "linear MC matches exact variance", ok,
           f"|est^2-exact|/SE = {[f'{g:.2f}' for g in gaps]} (limit 3) in {elapsed:.0f}s (limit 300s)")


# --------------------------------------------------------------------------
# experiments

def test_09_quadrature_rate(report):
    L_values = [round(2.1 + 0.3 * k, 10) for k in range(8)]
    cfg = E.SweepConfig("dirichlet", L_values, [0.5], [0.0], coeffs="linear", u0="zero")
    fit = E.fit_rate(E.sweep(cfg), E.regime_for(cfg.coefficient_spec), window=False)
    ok = cfg.resolved_method == "quadrature" and abs(fit.relative_deviation) <= 0.15
    report(9, "linear decay rate", ok,
           f"slope={fit.slope:.4f} vs {fit.theoretical_slope:.4f} "
           f"({100 * fit.relative_deviation:+.1f}%, limit 15%), n={fit.n_points}")


def test_10_nonlinear_envelope(report):
    cfg = E.SweepConfig("dirichlet", [1.5, 2.0, 2.5, 3.0], [0.25, 0.5], [0.0], p=2, n_reps=1000,
                        coeffs="sine_tanh", u0="gaussian", base_seed=10, method="mc")
    recs = E.sweep(cfg)
    u0_sup = cfg.initial.sup_norm
    env = E.fit_envelope_constant(recs, u0_sup)
    over = [r for r in recs if r.error > env.fitted_c * (1 + u0_sup) * r.bound_aL * (1 + 1e-12)]
    bad = E.monotonicity_violations(recs)
    ok = not over and not env.upward_trend and not bad
    report(10, "nonlinear envelope", ok,
           f"fitted_c={env.fitted_c:.3e} upward_trend={env.upward_trend} "
           f"monotonicity_violations={len(bad)} errors={[f'{r.error:.2e}' for r in recs]}")


def test_11_small_L(report):
    reps = [E.neumann_smallL_check(0.5, L) for L in (0.2, 0.1, 0.05)]
    floors = (1.25, 2.5, 5.0)
    ok = all(r.passed and r.value >= f for r, f in zip(reps, floors))
    report(11, "Neumann small-L blow-up", ok,
           ", ".join(f"L={r.L:g}: {r.value:.6f} >= {f}" for r, f in zip(reps, floors)))


SWEEP_INI = """\
[sweep]
bc = mixed
L_values = 1, 1.5, 2
t_values = 0.25
x_values = 0, 0.25
n_reps = 200
dx = 1/16
coeffs = sine_tanh
u0 = gaussian
base_seed = 12
method = mc

[output]
csv = {out}.csv
json = {out}.json
"""


def test_12_thread_reproducibility(report, tmp_path):
    digests = {}
    for n in (1, 8):
        cfgp = tmp_path / f"t{n}.ini"
        cfgp.write_text(SWEEP_INI.format(out=tmp_path / f"t{n}"))
        code = cli.main(["sweep", str(cfgp), "--threads", str(n)])
        assert code in (cli.EXIT_OK, cli.EXIT_CHECK)
        digests[n] = Path(f"{tmp_path / f't{n}'}.csv").read_bytes()
    ok = digests[1] == digests[8] and len(digests[1]) > 0
    report(12, "thread-count independence", ok,
           f"csv bytes identical={digests[1] == digests[8]} ({len(digests[1])} bytes)")
