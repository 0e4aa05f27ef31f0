"""Acceptance criteria, one test each, run at the stated tolerances.

Each test prints a single ``criterion N [PASS|FAIL]`` line with the observed
numbers, bypassing pytest's capture so the lines appear in ``pytest -v``.
"""

import math
import time

import numpy as np
import pytest

from sdd_sim import diagnostics as D
from sdd_sim.cli import main
from sdd_sim.config import ScenarioConfig
from sdd_sim.delays import constant_delay
from sdd_sim.history import InitialFunction
from sdd_sim.integrator import ProblemSpec, SolverOptions, recheck_schedule, solve
from sdd_sim.nonlinearity import BirthFunction, Kernel
from sdd_sim.spectral import build_dirichlet_laplacian_1d


@pytest.fixture
def report(capsys):
    def emit(n, title, passed, detail, elapsed=None):
        timing = "" if elapsed is None else f" [{elapsed:.2f}s]"
        with capsys.disabled():
            print(f"\ncriterion {n} [{'PASS' if passed else 'FAIL'}] {title}: {detail}{timing}")
    return emit


def nicholson():
    return ScenarioConfig.load("nicholson").build()


def test_criterion_1_exact_decay(report):
    t0 = time.perf_counter()
    op = build_dirichlet_laplacian_1d(math.pi, 32, 128)
    e1 = np.zeros(32)
    e1[0] = 1.0
    spec = ProblemSpec(op, 0.0, 1.0, constant_delay(0.5, 1.0), BirthFunction("zero"), Kernel("dirac"),
                       InitialFunction.constant(e1, 1.0))
    traj = solve(spec, SolverOptions(h=0.01), 1.0)
    rel = abs(traj.norms()[traj.index_of(1.0)] - math.exp(-1.0)) / math.exp(-1.0)
    elapsed = time.perf_counter() - t0
    ok = rel < 1e-10 and elapsed < 1.0
    report(1, "exact decay", ok, f"relative error at t=1 {rel:.2e} (< 1e-10)", elapsed)
    assert ok


def oracle_problem():
    op = build_dirichlet_laplacian_1d(math.pi, 8, 32)
    k = np.arange(1, 9)
    shape = (-1.0) ** (k + 1) / k ** 2
    phi = InitialFunction.constant(shape / np.linalg.norm(shape), 0.5)
    return ProblemSpec(op, 0.0, 0.5, constant_delay(0.5, 0.5), BirthFunction("linear", c=0.5),
                       Kernel("dirac"), phi)


def oracle_errors(spec, mode, T=3.0, h=1e-3):
    errs = []
    for step in (h, h / 2):
        traj = solve(spec, SolverOptions(h=step, mode=mode), T)
        errs.append(D.oracle_discrepancy(traj, D.constant_delay_oracle(spec, T, step)))
    return errs


def test_criterion_2_constant_delay_oracle(report):
    # Run with the default first-order scheme.  Its error at h = 1e-3 is
    # ~7e-5, so the 1e-6 clause cannot hold together with a ratio near 2;
    # the second-order numbers are printed for comparison.
    spec = oracle_problem()
    t0 = time.perf_counter()
    e_h, e_h2 = oracle_errors(spec, "etd1")
    elapsed = time.perf_counter() - t0
    ratio = e_h / e_h2
    small, order = e_h < 1e-6, 1.7 <= ratio <= 2.3
    ok = small and order and elapsed < 10.0
    f_h, f_h2 = oracle_errors(spec, "etd2")
    report(2, "constant-delay oracle (etd1)", ok,
           f"error at h=1e-3 {e_h:.3e} (< 1e-6: {'yes' if small else 'NO'}); "
           f"ratio h/(h/2) {ratio:.3f} (in [1.7, 2.3]: {'yes' if order else 'NO'}); "
           f"for reference etd2 gives {f_h:.3e} with ratio {f_h / f_h2:.3f}", elapsed)
    assert small, f"first-order error {e_h:.3e} at h=1e-3 exceeds 1e-6"
    assert order and elapsed < 10.0


def test_criterion_3_H_invariance(report):
    t0 = time.perf_counter()
    res = D.H_suite(trials=1000, seed=0)
    elapsed = time.perf_counter() - t0
    worst = max(r["max_discrepancy"] for r in res["constructors"])
    ok = res["passed"] and worst == 0.0 and elapsed < 5.0
    report(3, "(H)-invariance", ok,
           f"{len(res['constructors'])} constructors, max discrepancy {worst:g} over 1000 pairs; "
           f"violator discrepancy {res['violator']['max_discrepancy']:.3g} (rejected: "
           f"{not res['violator']['passed']})", elapsed)
    assert ok


def test_criterion_4_H_consistency(report):
    t0 = time.perf_counter()
    spec, opts, T = nicholson()
    traj = solve(spec, opts, T)
    dev = recheck_schedule(traj)
    elapsed = time.perf_counter() - t0
    ok = float(dev.max()) == 0.0 and elapsed < 10.0
    report(4, "(H)-consistency", ok,
           f"max |post-hoc delay - schedule| {dev.max():g} at {dev.size} nodes, "
           f"delays in [{traj.delays.min():.4f}, {traj.delays.max():.4f}]", elapsed)
    assert ok


def test_criterion_5_continuous_dependence(report):
    t0 = time.perf_counter()
    spec, opts, T = nicholson()
    rep = D.continuous_dependence(spec, T, opts, final_tol=1e-4)
    restart = D.restart_discrepancy(spec, opts, 1.3, T - 1.3)
    elapsed = time.perf_counter() - t0
    ok = rep.passed and len(rep.deviations) == 3 and restart < 1e-9 and elapsed < 60.0
    rows = "; ".join(f"{k}: {v[0]:.2e} -> {v[-1]:.2e} decreasing={rep.strictly_decreasing[k]}"
                     for k, v in rep.deviations.items())
    report(5, "continuous dependence", ok, f"{rows}; restart discrepancy {restart:.2e} (< 1e-9)", elapsed)
    assert ok


def test_criterion_6_apriori_bound(report):
    t0 = time.perf_counter()
    spec, opts, _ = nicholson()
    rep = D.apriori_bound(spec, 5.0, opts)
    elapsed = time.perf_counter() - t0
    ok = rep.observed <= rep.analytic * (1 + 1e-6) and elapsed < 10.0
    report(6, "a-priori bound", ok, f"observed max ||u|| {rep.observed:.6g} <= C_T {rep.analytic:.6g}", elapsed)
    assert ok


def test_criterion_7_dissipativity(report):
    t0 = time.perf_counter()
    spec, opts, _ = nicholson()
    reps = D.absorbing_set_check(spec, (0.0, 0.25), 10.0, opts, factors=(0.1, 1.0, 10.0, 100.0))
    elapsed = time.perf_counter() - t0
    ok = all(r.passed for r in reps) and elapsed < 60.0
    worst = max(reps, key=lambda r: r.initial_norm)
    detail = (f"{len(reps)} runs, |phi|_C up to {worst.initial_norm / worst.radius:.0f} R; "
              f"R(0)={reps[0].radius:.5f}; latest entry t={max(r.entry_time for r in reps if r.entry_time is not None):.2f}; "
              f"max envelope ratio {max(r.max_envelope_ratio for r in reps):.4f}")
    report(7, "dissipativity", ok, detail, elapsed)
    assert ok


def test_criterion_8_holder(report):
    t0 = time.perf_counter()
    spec, opts, _ = nicholson()
    rep = D.holder_check(spec, 0.25, (1.0, 3.0), 500, opts)
    elapsed = time.perf_counter() - t0
    ok = rep.passed and elapsed < 30.0
    report(8, "Hölder equicontinuity", ok,
           f"max ratio {rep.max_ratio:.5g} vs L {rep.L_at_max_ratio:.5g}; min margin {rep.min_margin:.4g}", elapsed)
    assert ok


def test_criterion_9_determinism(report, tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["run", "--config", "nicholson", "--out", str(a)]) == 0
    assert main(["run", "--config", "nicholson", "--out", str(b)]) == 0
    capsys.readouterr()
    ok = a.read_bytes() == b.read_bytes()
    report(9, "determinism", ok, f"two nicholson.cfg runs bit-identical ({a.stat().st_size} bytes)")
    assert ok
