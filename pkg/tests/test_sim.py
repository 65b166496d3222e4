import numpy as np
import pytest

from harmonicmpc import (Reference, lyapunov_check, performance_index,
                         run_closed_loop, snapshot, trace_to_csv)
from harmonicmpc.sim import snapshot_to_csv

from conftest import small_params

REF = Reference(x_r=[0.8, 0.0], u_r=[0.0])


@pytest.fixture
def di_trace(double_integrator, di_params):
    model, constraints = double_integrator
    return model, run_closed_loop(model, constraints, di_params, "hmpc", REF,
                                  [0.0, 0.0], 30, record_plans=True)


class TestClosedLoop:
    def test_dynamics_exact(self, di_trace):
        model, trace = di_trace
        xs = trace.states(include_initial=True)
        us = trace.inputs()
        for k in range(trace.n_steps):
            np.testing.assert_allclose(
                xs[k + 1], model.A @ xs[k] + model.B @ us[k], atol=1e-12)

    def test_trace_shapes(self, di_trace):
        model, trace = di_trace
        assert trace.n_steps == 30
        assert trace.states().shape == (30, model.n)
        assert trace.inputs().shape == (30, model.m)
        assert trace.outputs().shape == (30, model.n_z)
        assert trace.optimal_costs().shape == (30,)

    def test_converges_to_reference(self, di_trace):
        _, trace = di_trace
        assert np.linalg.norm(trace.steps[-1].state - REF.x_r) < 1e-2

    def test_outputs_within_bounds(self, double_integrator, di_trace):
        _, constraints = double_integrator
        _, trace = di_trace
        z = trace.outputs()
        assert np.all(z >= constraints.z_min - 1e-6)
        assert np.all(z <= constraints.z_max + 1e-6)

    def test_unknown_controller_kind(self, double_integrator, di_params):
        model, constraints = double_integrator
        with pytest.raises(ValueError, match="unknown controller"):
            run_closed_loop(model, constraints, di_params, "pid", REF,
                            [0.0, 0.0], 3)

    def test_mpct_kind(self, double_integrator, di_params):
        model, constraints = double_integrator
        trace = run_closed_loop(model, constraints, di_params, "mpct", REF,
                                [0.0, 0.0], 20)
        assert trace.n_steps == 20
        assert np.linalg.norm(trace.steps[-1].state - REF.x_r) < 0.05


class TestReferenceSchedule:
    def test_switch_mid_run(self, double_integrator, di_params):
        model, constraints = double_integrator
        ref2 = Reference(x_r=[-0.5, 0.0], u_r=[0.0])
        trace = run_closed_loop(model, constraints, di_params, "hmpc", REF,
                                [0.0, 0.0], 40,
                                ref_schedule=[(15, ref2)])
        # every solve succeeded (the run did not abort) and the state
        # heads to the new target after the switch
        assert trace.n_steps == 40
        assert np.linalg.norm(trace.steps[-1].state - ref2.x_r) < 5e-2
        assert trace.steps[-1].reference.x_r[0] == -0.5


class TestPerformanceIndex:
    def test_hand_computed(self, double_integrator, di_params):
        model, constraints = double_integrator
        trace = run_closed_loop(model, constraints, di_params, "hmpc", REF,
                                [0.0, 0.0], 3)
        expect = 0.0
        for s in trace.steps:
            dx = s.state - REF.x_r
            du = s.inputs - REF.u_r
            expect += dx @ di_params.Q @ dx + du @ di_params.R @ du
        assert performance_index(trace, di_params.Q, di_params.R,
                                 REF) == pytest.approx(expect)

    def test_empty_trace_rejected(self, double_integrator, di_params):
        from harmonicmpc.sim import SimulationTrace
        model, _ = double_integrator
        empty = SimulationTrace(model=model, x0=np.zeros(2))
        with pytest.raises(ValueError):
            performance_index(empty, di_params.Q, di_params.R, REF)


class TestLyapunov:
    def test_decreasing_above_baseline(self, double_integrator, di_params,
                                       di_trace):
        model, constraints = double_integrator
        _, trace = di_trace
        W, decreasing = lyapunov_check(trace, model, constraints, di_params,
                                       REF)
        assert W.shape == (trace.n_steps,)
        assert np.all(W >= -1e-6)
        # strictly decreasing until the loop has essentially converged
        far = np.linalg.norm(trace.states() - REF.x_r, axis=1) > 1e-3
        assert np.all(decreasing[far[1:]])


class TestSnapshots:
    def test_snapshot_contents(self, di_trace):
        model, trace = di_trace
        past, pred, inputs, ref_states = snapshot(trace, 3)
        assert past.shape == (4, model.n)          # x_0 .. x_3
        N = inputs.shape[0]
        assert pred.shape == (N + 1, model.n)
        assert ref_states.shape == (N + 1, model.n)
        np.testing.assert_allclose(past[0], trace.x0)
        # the plan at sample 3 starts at the state it was computed from
        np.testing.assert_allclose(pred[0], trace.steps[3].plan_state,
                                   atol=1e-7)

    def test_out_of_range(self, di_trace):
        _, trace = di_trace
        with pytest.raises(IndexError):
            snapshot(trace, trace.n_steps)

    def test_requires_recorded_plans(self, double_integrator, di_params):
        model, constraints = double_integrator
        trace = run_closed_loop(model, constraints, di_params, "hmpc", REF,
                                [0.0, 0.0], 3)
        with pytest.raises(ValueError, match="recorded"):
            snapshot(trace, 0)


class TestCsv:
    def test_trace_csv_deterministic(self, di_trace, tmp_path):
        _, trace = di_trace
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        trace_to_csv(trace, p1)
        trace_to_csv(trace, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_trace_csv_header(self, di_trace, tmp_path):
        model, trace = di_trace
        path = tmp_path / "t.csv"
        trace_to_csv(trace, path)
        header = path.read_text().splitlines()[0].split(",")
        assert header[0] == "k"
        assert len(header) == 1 + model.n + model.m + model.n_z + 3

    def test_snapshot_csv(self, di_trace, tmp_path):
        _, trace = di_trace
        path = tmp_path / "s.csv"
        snapshot_to_csv(trace, 2, path)
        sections = {line.split(",")[0] for line in
                    path.read_text().splitlines()[1:]}
        assert sections == {"past", "predicted", "reference"}
