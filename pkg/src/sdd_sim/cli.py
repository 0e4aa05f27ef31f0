"""Command-line front end: run, verify, sweep, presets."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import diagnostics as diag
from .config import ConfigError, ScenarioConfig, preset_names, preset_text, resolve_key
from .errors import DivergenceError, InvalidArgument, Unsupported
from .integrator import recheck_schedule, solve, write_trajectory_csv

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_DIVERGED = 0, 1, 2, 3
SUITES = ("H", "oracle", "dissipation", "holder", "dependence", "apriori")

ORACLE_TOL = 1e-6
RESTART_TOL = 1e-9
FINAL_DEVIATION_TOL = 1e-4
DEPENDENCE_T = 3.0


@dataclass
class Check:
    name: str
    passed: bool
    detail: str
    report: dict = field(default_factory=dict)
    trajectory: object = field(default=None, repr=False)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def _threads(arg: int | None) -> int:
    if arg is not None:
        return max(1, arg)
    env = os.environ.get("SDD_SIM_THREADS", "").strip()
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        raise ConfigError("SDD_SIM_THREADS", f"not an integer: {env!r}") from None


# -- suites ------------------------------------------------------------------

def suite_H() -> list[Check]:
    res = diag.H_suite(trials=1000, seed=0)
    out = [Check(f"H/{r['label']}", r["passed"],
                 f"max discrepancy {r['max_discrepancy']:.3g} over {r['trials']} pairs (required 0)", r)
           for r in res["constructors"]]
    v = res["violator"]
    out.append(Check(f"H/{v['label']}", not v["passed"],
                     f"max discrepancy {v['max_discrepancy']:.3g} (expected > 0, deliberate violator)", v))
    spec, opts, T = ScenarioConfig.load("nicholson").build()
    traj = solve(spec, opts, T)
    dev = float(np.max(recheck_schedule(traj)))
    out.append(Check("H/consistency[nicholson]", dev == 0.0,
                     f"max |post-hoc delay - schedule| {dev:.3g} over {traj.times.size} nodes (required 0)",
                     {"max_deviation": dev}, traj))
    return out


def suite_oracle() -> list[Check]:
    spec, opts, T = ScenarioConfig.load("oracle").build()
    traj = solve(spec, opts, T)
    ref = diag.constant_delay_oracle(spec, T, opts.h)
    err = diag.oracle_discrepancy(traj, ref)
    return [Check(f"oracle[{opts.mode}, h={opts.h:g}]", err < ORACLE_TOL,
                  f"max L2 discrepancy {err:.3e} (required < {ORACLE_TOL:g})", {"discrepancy": err}, traj)]


def suite_apriori() -> list[Check]:
    spec, opts, _ = ScenarioConfig.load("nicholson").build()
    traj = solve(spec, opts, 5.0)
    rep = diag.apriori_bound(spec, 5.0, opts, traj=traj)
    return [Check("apriori[nicholson, T=5]", rep.passed,
                  f"observed max ||u|| {rep.observed:.6g} <= analytic C_T {rep.analytic:.6g}; "
                  f"max ||F|| {rep.max_F_norm:.6g} <= {rep.F_bound:.6g}", rep.to_dict(), traj)]


def suite_dissipation() -> list[Check]:
    spec, opts, _ = ScenarioConfig.load("nicholson").build()
    out = []
    for rep in diag.absorbing_set_check(spec, (0.0, 0.25), 10.0, opts):
        fac = rep.initial_norm / rep.radius if rep.radius else 0.0
        entry = "never" if rep.entry_time is None else f"t={rep.entry_time:.3g}"
        out.append(Check(f"dissipation[delta={rep.delta:g}, |phi|={fac:.3g}R]", rep.passed,
                         f"entry {entry}, max after entry {rep.max_after_entry or 0:.6g} <= ball {rep.ball:.6g}; "
                         f"envelope ratio {rep.max_envelope_ratio:.4f}", rep.to_dict()))
    return out


def suite_holder() -> list[Check]:
    spec, opts, _ = ScenarioConfig.load("nicholson").build()
    rep = diag.holder_check(spec, 0.25, (1.0, 3.0), 500, opts)
    return [Check("holder[delta=0.25, [1,3], 500 pairs]", rep.passed,
                  f"max ratio {rep.max_ratio:.6g} vs analytic L {rep.L_at_max_ratio:.6g} "
                  f"(uniform L {rep.L_uniform:.6g})", rep.to_dict())]


def suite_dependence() -> list[Check]:
    spec, opts, _ = ScenarioConfig.load("nicholson").build()
    rep = diag.continuous_dependence(spec, DEPENDENCE_T, opts, final_tol=FINAL_DEVIATION_TOL)
    out = []
    for name, devs in rep.deviations.items():
        ok = rep.strictly_decreasing[name] and rep.final[name] < FINAL_DEVIATION_TOL
        if name in rep.schedule_unchanged:
            ok = ok and rep.schedule_unchanged[name]
        out.append(Check(f"dependence[{name}]", ok,
                         "sup deviations " + ", ".join(f"{x:.2e}" for x in devs)
                         + f"; final < {FINAL_DEVIATION_TOL:g}", {"deviations": devs}))
    disc = diag.restart_discrepancy(spec, opts, 1.3, DEPENDENCE_T)
    out.append(Check("dependence[restart]", disc < RESTART_TOL,
                     f"restart discrepancy {disc:.3e} (required < {RESTART_TOL:g})", {"discrepancy": disc}))
    return out


SUITE_FUNCS = {"H": suite_H, "oracle": suite_oracle, "dissipation": suite_dissipation,
               "holder": suite_holder, "dependence": suite_dependence, "apriori": suite_apriori}


# -- commands ----------------------------------------------------------------

def _summary_line(traj, wall: float) -> str:
    c = traj.counters()
    return (f"final ||u|| = {np.linalg.norm(traj.states[-1]):.10g}  T = {traj.T:g}  steps = {traj.times.size - 1}  "
            f"wall = {wall:.3f}s  clamps = {c['clamp_events']}  corrector events = {c['corrector_events']}  "
            f"corrector failures = {c['corrector_failures']}")


def _run_one(cfg: ScenarioConfig, out_path: Path):
    spec, opts, T = cfg.build()
    t0 = time.perf_counter()
    traj = solve(spec, opts, T)
    wall = time.perf_counter() - t0
    write_trajectory_csv(out_path, traj, deltas=cfg.get("output.delta_list"), probes=cfg.get("output.probes"))
    return traj, wall


def cmd_run(config, out=None, print_config=False) -> int:
    cfg = ScenarioConfig.load(config)
    if print_config:
        sys.stdout.write(cfg.to_text())
        return EXIT_OK
    cfg.build()  # fail on bad values before touching the output path
    out_path = Path(out or cfg.get("output.path"))
    out_path.parent.mkdir(parents=True, exist_ok=True)
    traj, wall = _run_one(cfg, out_path)
    print(f"wrote {out_path}")
    print(_summary_line(traj, wall))
    return EXIT_OK


def cmd_verify(suite: str = "all", out=None, threads: int = 1) -> int:
    if suite != "all" and suite not in SUITES:
        raise ConfigError("suite", f"unknown suite {suite!r}; choose from all, {', '.join(SUITES)}")
    names = list(SUITES) if suite == "all" else [suite]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(lambda n: SUITE_FUNCS[n](), names))
    all_ok = True
    for name, checks in zip(names, results):
        for c in checks:
            print(c.line())
            all_ok &= c.passed
        if out:
            d = Path(out)
            d.mkdir(parents=True, exist_ok=True)
            (d / f"verify_{name}.json").write_text(json.dumps(
                [{"name": c.name, "passed": c.passed, "report": c.report} for c in checks],
                indent=2, sort_keys=True, default=diag._jsonable) + "\n")
            for c in checks:
                if c.trajectory is not None:
                    stem = "".join(ch if ch.isalnum() or ch in "._-" else "_" for ch in c.name)
                    write_trajectory_csv(d / f"verify_{stem}.csv", c.trajectory, deltas=(0.0, 0.25))
    print(f"{'all checks passed' if all_ok else 'some checks FAILED'} ({sum(len(r) for r in results)} checks)")
    return EXIT_OK if all_ok else EXIT_FAIL


def _entry_times(traj) -> dict:
    try:
        reps = diag.dissipativity_check(traj.spec, (0.0, 0.25), traj.T, traj=traj)
    except Unsupported:
        return {}
    return {r.delta: r.entry_time for r in reps}


def _sweep_name(key: str, raw: str) -> str:
    safe = "".join(ch if ch.isalnum() or ch in "._-" else "_" for ch in raw)
    return f"{key}={safe}.csv"


def cmd_sweep(config, param: str, values: list[str], out=None, threads: int = 1) -> int:
    base = ScenarioConfig.load(config)
    key = resolve_key(param)
    cfgs = [base.with_value(key, v) for v in values]
    for c in cfgs:
        c.build()  # validate every value before any solve starts
    out_dir = Path(out or "sweep")
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [out_dir / _sweep_name(key, v) for v in values]

    def work(i):
        traj, wall = _run_one(cfgs[i], paths[i])
        return traj, wall, _entry_times(traj)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(work, range(len(cfgs))))

    summary = out_dir / "summary.csv"
    with open(summary, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["key", "value", "csv", "final_norm", "max_norm", "entry_time_delta0",
                    "entry_time_delta0.25", "clamp_events", "corrector_events"])
        for v, p, (traj, _, entry) in zip(values, paths, results):
            c = traj.counters()
            fmt = lambda x: "" if x is None else f"{x:.17g}"
            w.writerow([key, v, p.name, f"{np.linalg.norm(traj.states[-1]):.17g}",
                        f"{np.max(traj.norms()):.17g}", fmt(entry.get(0.0)), fmt(entry.get(0.25)),
                        c["clamp_events"], c["corrector_events"]])
    for v, p, (traj, wall, _) in zip(values, paths, results):
        print(f"{key}={v}: wrote {p}; " + _summary_line(traj, wall))
    print(f"wrote {summary}")
    return EXIT_OK


def cmd_presets(name: str | None = None) -> int:
    if name:
        sys.stdout.write(preset_text(name))
    else:
        for n in preset_names():
            print(n)
    return EXIT_OK


# -- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sdd-sim", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="solve one scenario and write its trajectory CSV")
    p.add_argument("--config", required=True, help="config file, or the name of a bundled preset")
    p.add_argument("--out", help="CSV path (default: output.path from the config)")
    p.add_argument("--print-config", action="store_true", help="echo the effective config and exit")

    p = sub.add_parser("verify", help="run verification suites on the bundled presets")
    p.add_argument("suite", nargs="?", default="all", help="all | " + " | ".join(SUITES))
    p.add_argument("--out", help="directory for JSON reports")
    p.add_argument("--threads", type=int, help="worker threads (fallback: SDD_SIM_THREADS)")

    p = sub.add_parser("sweep", help="one run per value of a config key")
    p.add_argument("--config", required=True)
    p.add_argument("--param", required=True, help="config key, e.g. b.p (short forms: p, eta_ign, alpha, ...)")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--out", help="output directory (default: ./sweep)")
    p.add_argument("--threads", type=int, help="worker threads (fallback: SDD_SIM_THREADS)")

    p = sub.add_parser("presets", help="list bundled presets or print one")
    p.add_argument("name", nargs="?")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args.config, args.out, args.print_config)
        if args.command == "verify":
            return cmd_verify(args.suite, args.out, _threads(args.threads))
        if args.command == "sweep":
            values = [v.strip() for v in args.values.split(",") if v.strip()]
            if not values:
                raise ConfigError("--values", "no values given")
            return cmd_sweep(args.config, args.param, values, args.out, _threads(args.threads))
        return cmd_presets(args.name)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (InvalidArgument, Unsupported) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
