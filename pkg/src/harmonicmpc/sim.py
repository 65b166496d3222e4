"""Closed-loop simulation, trace recording and stability diagnostics."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .controllers import HarmonicMpc, TrackingMpc, _MpcBase
from .errors import DimensionError
from .formulations import ControllerParams, FeasibleSolution
from .harmonic import Reference, eval_harmonic, optimal_artificial_reference
from .model import ConstraintSet, LtiModel, evaluate_output
from .solver import SolveReport, SolverSettings
from .validation import as_vector


@dataclass
class SimulationStep:
    """Record of one closed-loop step."""

    k: int
    state: np.ndarray          # state after applying the input of this step
    inputs: np.ndarray         # input applied during this step
    optimal_cost: float
    offset_cost: float
    report: SolveReport
    reference: Reference
    plan: FeasibleSolution | None = None
    plan_state: np.ndarray | None = None  # state the plan was computed at


@dataclass
class SimulationTrace:
    """Complete closed-loop run.  Immutable after the run finishes.

    The plant update is exact: state[k] = A state[k-1] + B inputs[k].
    Every recorded step solved to optimality; feasibility loss aborts the
    run with an error.
    """

    model: LtiModel
    x0: np.ndarray
    steps: list[SimulationStep] = field(default_factory=list)

    @property
    def n_steps(self) -> int:
        return len(self.steps)

    def states(self, include_initial: bool = False) -> np.ndarray:
        xs = [s.state for s in self.steps]
        if include_initial:
            xs = [self.x0] + xs
        return np.stack(xs)

    def inputs(self) -> np.ndarray:
        return np.stack([s.inputs for s in self.steps])

    def outputs(self) -> np.ndarray:
        return np.stack([
            evaluate_output(self.model, s.state, s.inputs) for s in self.steps])

    def optimal_costs(self) -> np.ndarray:
        return np.array([s.optimal_cost for s in self.steps])


def _make_controller(kind, model, constraints, params, ref, settings):
    if isinstance(kind, _MpcBase):
        return kind.fit(model, constraints, ref)
    ctor = {"hmpc": HarmonicMpc, "mpct": TrackingMpc}.get(kind)
    if ctor is None:
        raise ValueError(f"unknown controller kind {kind!r}")
    return ctor(params=params, settings=settings).fit(model, constraints, ref)


def run_closed_loop(model: LtiModel, constraints: ConstraintSet,
                    params: ControllerParams, controller_kind, ref: Reference,
                    x0, n_steps: int, settings: SolverSettings | None = None,
                    ref_schedule: list[tuple[int, Reference]] | None = None,
                    record_plans: bool = False,
                    solver_logs: list | None = None) -> SimulationTrace:
    """Simulate the plant under the MPC law for `n_steps` samples.

    `controller_kind` is "hmpc", "mpct", or a pre-built controller.  An
    optional `ref_schedule` of (step, Reference) pairs switches the target
    mid-run; feasibility does not depend on the reference, so switches
    never lose feasibility.  Warm starts use the shifted previous plan.
    """
    from .formulations import offset_cost

    ctrl = _make_controller(controller_kind, model, constraints, params,
                            ref, settings)
    x = as_vector(x0, "x0", size=model.n)
    schedule = dict(ref_schedule or [])
    trace = SimulationTrace(model=model, x0=x.copy())
    for k in range(1, n_steps + 1):
        if (k - 1) in schedule:
            new_ref = schedule[k - 1]
            ctrl.set_reference(new_ref.x_r, new_ref.u_r)
        log = [] if solver_logs is not None else None
        u, sol, report = ctrl.step(x, first=(k == 1), iter_log=log)
        if solver_logs is not None:
            solver_logs.append((k, log))
        x_next = model.A @ x + model.B @ u
        trace.steps.append(SimulationStep(
            k=k, state=x_next, inputs=u,
            optimal_cost=sol.objective,
            offset_cost=offset_cost(ctrl.params, sol, ctrl.ref_),
            report=report, reference=ctrl.ref_,
            plan=sol if record_plans else None,
            plan_state=x.copy() if record_plans else None,
        ))
        x = x_next
    return trace


def performance_index(trace: SimulationTrace, Q, R, ref: Reference) -> float:
    """Sum of weighted squared deviations from the reference over the run.

    Convention: the state after step k is paired with the input applied
    during step k; the sum runs over steps 1..n_steps.
    """
    if trace.n_steps == 0:
        raise ValueError("trace is empty")
    Q = np.asarray(Q, dtype=float)
    R = np.asarray(R, dtype=float)
    total = 0.0
    for s in trace.steps:
        dx = s.state - ref.x_r
        du = s.inputs - ref.u_r
        total += float(dx @ Q @ dx + du @ R @ du)
    return total


def lyapunov_check(trace: SimulationTrace, model: LtiModel,
                   constraints: ConstraintSet, params: ControllerParams,
                   ref: Reference, tol: float = 0.0):
    """Per-step values of the cost-above-baseline function and decrease flags.

    The baseline is the offset cost of the best admissible harmonic
    reference for the target; W is the optimal closed-loop cost minus that
    baseline.  W should be nonnegative and decrease along the trajectory.
    """
    _, v_base = optimal_artificial_reference(model, constraints, params, ref)
    W = trace.optimal_costs() - v_base
    decreasing = np.array([W[i + 1] < W[i] + tol for i in range(len(W) - 1)])
    return W, decreasing


def snapshot(trace: SimulationTrace, k: int):
    """Past states, predicted plan and reference sequence at sample k.

    `k` indexes the state the plan was computed at: the plan of sample k
    starts from x_k, so past states are x_0..x_k.  Requires the run to
    have been recorded with `record_plans=True`.  Returns (past_states,
    predicted_states, predicted_inputs, reference_states) where the
    reference sequence is evaluated over the prediction window.
    """
    if not 0 <= k < trace.n_steps:
        raise IndexError(f"sample {k} outside 0..{trace.n_steps - 1}")
    step = trace.steps[k]
    if step.plan is None:
        raise ValueError("trace was recorded without predicted trajectories")
    past = np.vstack([trace.x0[None, :], trace.states()[:k]])
    plan = step.plan
    N = plan.inputs.shape[0]
    if plan.harmonic is not None:
        ref_states = np.stack([eval_harmonic(plan.harmonic, j)[0]
                               for j in range(N + 1)])
    else:
        ref_states = np.tile(plan.artificial[0], (N + 1, 1))
    return past, plan.states, plan.inputs, ref_states


def trace_to_csv(trace: SimulationTrace, path, W: np.ndarray | None = None) -> None:
    """Write the run as CSV: k, state, input, output, costs, iterations.

    Wall-clock timing is deliberately excluded so identical runs produce
    byte-identical files; timing lives in the summary instead.
    """
    n, m, n_z = trace.model.n, trace.model.m, trace.model.n_z
    header = (["k"]
              + [f"x{i + 1}" for i in range(n)]
              + [f"u{i + 1}" for i in range(m)]
              + [f"z{i + 1}" for i in range(n_z)]
              + ["V_star", "W", "solve_iters"])
    with open(path, "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(header)
        for i, s in enumerate(trace.steps):
            z = evaluate_output(trace.model, s.state, s.inputs)
            w_val = W[i] if W is not None else ""
            wr.writerow([s.k]
                        + [f"{v:.12g}" for v in s.state]
                        + [f"{v:.12g}" for v in s.inputs]
                        + [f"{v:.12g}" for v in z]
                        + [f"{s.optimal_cost:.12g}",
                           f"{w_val:.12g}" if w_val != "" else "",
                           s.report.iterations])


def snapshot_to_csv(trace: SimulationTrace, k: int, path) -> None:
    """Write one snapshot (past, predicted, reference) as CSV."""
    past, pred, inputs, ref_states = snapshot(trace, k)
    n = trace.model.n
    with open(path, "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(["section", "index"] + [f"x{i + 1}" for i in range(n)])
        for i, row in enumerate(past):
            wr.writerow(["past", i] + [f"{v:.12g}" for v in row])
        for j, row in enumerate(pred):
            wr.writerow(["predicted", j] + [f"{v:.12g}" for v in row])
        for j, row in enumerate(ref_states):
            wr.writerow(["reference", j] + [f"{v:.12g}" for v in row])
