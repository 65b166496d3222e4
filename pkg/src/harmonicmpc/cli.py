"""Command line experiment runner.

Runs declarative scenario files (JSON) through the closed-loop simulator
and writes trace CSVs plus a machine-readable summary.  Also bundles the
standard benchmark comparison table and a base-frequency sweep.  All
output is CSV/JSON; plotting is left to external tools.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .benchmark import (BASE_FREQUENCY, N_ITER, benchmark_model,
                        benchmark_params, benchmark_reference)
from .errors import HarmonicMpcError, StepInfeasible
from .formulations import ControllerParams
from .harmonic import Reference
from .model import model_from_json
from .sim import (lyapunov_check, performance_index, run_closed_loop,
                  snapshot_to_csv, trace_to_csv)
from .solver import SolverSettings

_SCENARIO_DIR = Path(__file__).parent / "scenarios"

# Scenario JSON schema (all matrices row-major):
#   name: str
#   model: "ball_plate" | {"path": <model JSON>}
#   controller: "mpct" | "hmpc"
#   params: {"N": int, "w": float, optional weight overrides Q,R,T_e,S_e,
#            T_h,S_h,T_a,S_a as row-major matrices}
#   x0: list[float]
#   n_iter: int
#   schedule: [[step, x_r, u_r], ...]  steps strictly increasing from 0
#   output_dir: str (optional, overridable on the command line)


def _load_scenario(path: Path) -> dict:
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(
            f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ScenarioError(f"{path}: scenario must be a JSON object")
    return raw


class ScenarioError(Exception):
    """Malformed scenario file (bad JSON or bad fields)."""


def _scenario_params(raw: dict) -> ControllerParams:
    p = dict(raw.get("params", {}))
    if "N" not in p:
        raise ScenarioError("params.N is required")
    N = int(p.pop("N"))
    w = float(p.pop("w", BASE_FREQUENCY))
    base = benchmark_params(N, w)
    overrides = {}
    for key in ("Q", "R", "T_e", "S_e", "T_h", "S_h", "T_a", "S_a"):
        if key in p:
            overrides[key] = np.array(p.pop(key), dtype=float)
    if p:
        raise ScenarioError(f"unknown params fields: {sorted(p)}")
    if overrides:
        import dataclasses
        base = dataclasses.replace(base, **overrides)
    return base


def _scenario_schedule(raw: dict, n: int, m: int):
    entries = raw.get("schedule")
    if not entries:
        raise ScenarioError("schedule must contain at least one entry")
    steps = [int(e[0]) for e in entries]
    if steps[0] != 0 or any(b <= a for a, b in zip(steps, steps[1:])):
        raise ScenarioError("schedule steps must be strictly increasing from 0")
    sched = []
    for step, x_r, u_r in entries:
        sched.append((int(step), Reference(x_r=np.array(x_r, dtype=float),
                                           u_r=np.array(u_r, dtype=float))))
    return sched


def run_scenario(path, out_dir=None, emit_snapshots=(), solver_log=False) -> dict:
    """Run one scenario file and write its artifacts.

    Writes <name>_trace.csv and <name>_summary.json into the output
    directory (scenario's own, unless overridden), plus optional snapshot
    CSVs and a solver iteration log.  Returns the summary dict.
    """
    path = Path(path)
    raw = _load_scenario(path)
    name = raw.get("name", path.stem)
    source = raw.get("model", "ball_plate")
    if source == "ball_plate":
        model, constraints = benchmark_model()
    elif isinstance(source, dict) and "path" in source:
        model, constraints = model_from_json(Path(source["path"]).read_text())
    else:
        raise ScenarioError(f"unknown model source {source!r}")
    kind = raw.get("controller")
    if kind not in ("mpct", "hmpc"):
        raise ScenarioError(f"controller must be 'mpct' or 'hmpc', got {kind!r}")
    params = _scenario_params(raw)
    x0 = np.array(raw.get("x0", np.zeros(model.n)), dtype=float)
    n_iter = int(raw.get("n_iter", N_ITER))
    schedule = _scenario_schedule(raw, model.n, model.m)
    first_ref = schedule[0][1]
    rest = schedule[1:]

    out = Path(out_dir or raw.get("output_dir", "."))
    out.mkdir(parents=True, exist_ok=True)

    if "sweep_w" in raw:
        # One trace per frequency; the summary aggregates all of them.
        import dataclasses
        runs = []
        for w in raw["sweep_w"]:
            pw = dataclasses.replace(params, w=float(w))
            trace = run_closed_loop(model, constraints, pw, kind, first_ref,
                                    x0, n_iter, ref_schedule=rest)
            phi = performance_index(trace, pw.Q, pw.R, schedule[-1][1])
            trace_to_csv(trace, out / f"{name}_w{w:g}_trace.csv")
            runs.append({"w": float(w), "phi": phi})
        summary = {"name": name, "controller": kind, "N": params.N,
                   "runs": runs}
        (out / f"{name}_summary.json").write_text(
            json.dumps(summary, indent=2) + "\n")
        return summary

    logs = [] if solver_log else None
    trace = run_closed_loop(model, constraints, params, kind, first_ref, x0,
                            n_iter, ref_schedule=rest,
                            record_plans=bool(emit_snapshots),
                            solver_logs=logs)
    phi = performance_index(trace, params.Q, params.R, schedule[-1][1])
    final_err = float(np.linalg.norm(trace.steps[-1].state - schedule[-1][1].x_r))
    times = [s.report.solve_time for s in trace.steps]
    iters = [s.report.iterations for s in trace.steps]

    W = None
    if kind == "hmpc" and not rest:
        W, _ = lyapunov_check(trace, model, constraints, params, first_ref)
    trace_to_csv(trace, out / f"{name}_trace.csv", W=W)
    summary = {
        "name": name,
        "controller": kind,
        "N": params.N,
        "w": params.w,
        "n_iter": n_iter,
        "phi": phi,
        "final_error": final_err,
        "mean_solve_ms": float(np.mean(times) * 1e3),
        "max_solve_ms": float(np.max(times) * 1e3),
        "mean_iterations": float(np.mean(iters)),
        "max_iterations": int(np.max(iters)),
    }
    (out / f"{name}_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    for k in emit_snapshots:
        snapshot_to_csv(trace, k, out / f"{name}_snapshot_{k}.csv")
    if solver_log:
        with open(out / f"{name}_solver_log.csv", "w", newline="") as f:
            wr = csv.writer(f)
            wr.writerow(["step", "iter", "r_prim", "r_dual", "objective"])
            for k, log in logs:
                for it, rp, rd, obj in log:
                    wr.writerow([k, it, f"{rp:.6e}", f"{rd:.6e}", f"{obj:.9g}"])
    return summary


_TABLE2_CASES = (("mpct", 5), ("mpct", 8), ("mpct", 15), ("hmpc", 5))


def _table2_case(case):
    kind, N = case
    model, constraints = benchmark_model()
    ref = benchmark_reference()
    params = benchmark_params(N)
    trace = run_closed_loop(model, constraints, params, kind, ref,
                            np.zeros(model.n), N_ITER)
    phi = performance_index(trace, params.Q, params.R, ref)
    times = [s.report.solve_time * 1e3 for s in trace.steps]
    return kind, N, phi, float(np.mean(times)), float(np.max(times))


def run_table2(jobs: int = 1, out=sys.stdout) -> list:
    """Run the standard four-controller benchmark comparison."""
    if jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_table2_case, _TABLE2_CASES))
    else:
        rows = [_table2_case(c) for c in _TABLE2_CASES]
    params = benchmark_params(5)
    print("Controller parameters:", file=out)
    for label, M in (("Q", params.Q), ("R", params.R), ("T_e", params.T_e),
                     ("S_e", params.S_e), ("T_h", params.T_h),
                     ("S_h", params.S_h), ("T_a", params.T_a),
                     ("S_a", params.S_a)):
        print(f"  {label} = diag({', '.join(f'{v:g}' for v in np.diag(M))})",
              file=out)
    print(f"  w = {params.w:g}", file=out)
    print(file=out)
    print(f"{'controller':>10} {'N':>3} {'Phi':>10} {'mean ms':>9} {'max ms':>9}",
          file=out)
    for kind, N, phi, mean_ms, max_ms in rows:
        print(f"{kind:>10} {N:>3} {phi:>10.1f} {mean_ms:>9.2f} {max_ms:>9.2f}",
              file=out)
    return rows


def run_sweep(w_values, jobs: int = 1, out=sys.stdout) -> list:
    """Closed-loop performance of the harmonic controller across w values."""
    def case(w):
        model, constraints = benchmark_model()
        ref = benchmark_reference()
        params = benchmark_params(5, w=w)
        trace = run_closed_loop(model, constraints, params, "hmpc", ref,
                                np.zeros(model.n), N_ITER)
        return w, performance_index(trace, params.Q, params.R, ref)

    if jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(case, w_values))
    else:
        rows = [case(w) for w in w_values]
    print(f"{'w':>10} {'Phi':>10}", file=out)
    for w, phi in rows:
        print(f"{w:>10.4f} {phi:>10.1f}", file=out)
    return rows


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="hmpc",
        description="Closed-loop MPC experiments with harmonic references.")
    ap.add_argument("--scenario", action="append", default=[],
                    help="scenario JSON file (repeatable)")
    ap.add_argument("--table2", action="store_true",
                    help="run the four-controller benchmark comparison")
    ap.add_argument("--sweep-w", metavar="LIST",
                    help="comma-separated base frequencies for a sweep")
    ap.add_argument("--jobs", type=int, default=1,
                    help="max concurrent scenario runs")
    ap.add_argument("--out-dir", help="output directory override")
    ap.add_argument("--emit-snapshots", metavar="STEPS",
                    help="comma-separated sample indices to dump as snapshots")
    ap.add_argument("--solver-log", action="store_true",
                    help="write per-step solver iteration logs")
    args = ap.parse_args(argv)

    if not (args.scenario or args.table2 or args.sweep_w):
        ap.print_usage(sys.stderr)
        print("nothing to do: pass --scenario, --table2 or --sweep-w",
              file=sys.stderr)
        return 2

    snapshots = tuple(int(s) for s in args.emit_snapshots.split(",")) \
        if args.emit_snapshots else ()
    try:
        if args.table2:
            run_table2(jobs=args.jobs)
        if args.sweep_w:
            run_sweep([float(w) for w in args.sweep_w.split(",")],
                      jobs=args.jobs)
        if args.scenario:
            def one(p):
                return run_scenario(p, out_dir=args.out_dir,
                                    emit_snapshots=snapshots,
                                    solver_log=args.solver_log)
            if args.jobs > 1 and len(args.scenario) > 1:
                with concurrent.futures.ThreadPoolExecutor(
                        max_workers=args.jobs) as ex:
                    summaries = list(ex.map(one, args.scenario))
            else:
                summaries = [one(p) for p in args.scenario]
            for s in summaries:
                if "runs" in s:
                    for r in s["runs"]:
                        print(f"{s['name']} w={r['w']:g}: Phi={r['phi']:.1f}")
                else:
                    print(f"{s['name']}: Phi={s['phi']:.1f} "
                          f"final_error={s['final_error']:.3g} "
                          f"mean_ms={s['mean_solve_ms']:.2f}")
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except StepInfeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 1
    except HarmonicMpcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
