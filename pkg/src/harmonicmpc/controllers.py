"""Receding-horizon controllers with a scikit-learn style surface.

Both controllers follow the estimator idiom: construct with parameters,
`fit` against a plant model, then `predict` the control input for a
state.  `get_params`/`set_params` come from BaseEstimator so controllers
compose with parameter sweeps and pipelines from the wider ecosystem.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .errors import InitialInfeasible, StepInfeasible
from .formulations import (ControllerParams, FeasibleSolution, build_hmpc,
                           build_mpct, extract_solution, shift_solution,
                           solution_to_primal)
from .harmonic import Reference
from .model import ConstraintSet, LtiModel
from .solver import AdmmSolver, SolverSettings
from .validation import as_vector


class _MpcBase(BaseEstimator):
    """Shared machinery: program caching, warm starts, reference updates."""

    _kind = ""

    def __init__(self, params: ControllerParams = None,
                 settings: SolverSettings = None):
        self.params = params
        self.settings = settings

    # -- estimator surface -------------------------------------------------

    def fit(self, model: LtiModel, constraints: ConstraintSet,
            ref: Reference = None):
        """Bind the controller to a plant and build its optimization problem."""
        if self.params is None:
            raise ValueError("params must be set before fit")
        self.model_ = model
        self.constraints_ = constraints
        self.params.warn_if_horizon_short(model)
        self.ref_ = ref or Reference(x_r=np.zeros(model.n), u_r=np.zeros(model.m))
        self.program_ = self._build(np.zeros(model.n))
        self.solver_ = AdmmSolver(self.program_, self.settings or SolverSettings())
        self._base_b = self.program_.b.copy()
        self._warm = None
        return self

    def predict(self, x) -> np.ndarray:
        """Control input for a state (first input of the optimal plan)."""
        return self.step(x)[0]

    # -- control surface ---------------------------------------------------

    def set_reference(self, x_r, u_r=None) -> None:
        """Retarget the controller; feasibility does not depend on the reference."""
        x_r = as_vector(x_r, "x_r", size=self.model_.n)
        u_r = (np.zeros(self.model_.m) if u_r is None
               else as_vector(u_r, "u_r", size=self.model_.m))
        self.ref_ = Reference(x_r=x_r, u_r=u_r)
        # Only the linear cost term depends on the reference.
        refreshed = self._build(np.zeros(self.model_.n))
        self.solver_.const = refreshed.const
        self.program_ = refreshed
        self._base_b = refreshed.b.copy()

    def reset(self) -> None:
        """Drop the warm start (e.g. after a state jump)."""
        self._warm = None

    def step(self, x, first: bool = False, iter_log: list = None):
        """Solve at state x and return (input, solution, report)."""
        import dataclasses

        x = as_vector(x, "x", size=self.model_.n)
        b = self._base_b.copy()
        b[:self.model_.n] = x
        sol_x, sol_y, report = self.solver_.solve(q=self.program_.q, b=b,
                                                  warm_start=self._warm,
                                                  iter_log=iter_log)
        if report.status == "MaxIter" and self._warm is not None:
            # A stale warm start can stall the iteration; retry cold with
            # the penalty reset before declaring the step lost.
            self.solver_.reset_penalty()
            sol_x, sol_y, report = self.solver_.solve(q=self.program_.q, b=b,
                                                      iter_log=iter_log)
        if report.status != "Solved":
            err = InitialInfeasible if first else StepInfeasible
            raise err(f"solve at state {x} finished with status {report.status}")
        self.program_ = dataclasses.replace(self.program_, b=b)
        # Feasibility tolerance follows the solver accuracy actually used.
        tol = max(1e-6, 20.0 * self.solver_.settings.eps_abs)
        sol = extract_solution(self.program_, sol_x, params=self.params, tol=tol)
        self._store_warm(sol_x, sol_y, sol)
        return sol.inputs[0].copy(), sol, report

    # -- internals ---------------------------------------------------------

    def _build(self, x0):
        raise NotImplementedError

    def _store_warm(self, sol_x, sol_y, sol: FeasibleSolution):
        raise NotImplementedError


class HarmonicMpc(_MpcBase):
    """MPC whose terminal condition is an artificial harmonic reference.

    The terminal state must land on an admissible single-harmonic
    trajectory of the plant instead of a steady state, which lets short
    horizons exploit transients a steady-state terminal condition forbids.
    """

    _kind = "hmpc"

    def _build(self, x0):
        return build_hmpc(self.model_, self.constraints_, self.params,
                          self.ref_, x0)

    def _store_warm(self, sol_x, sol_y, sol):
        # Shifted solution is feasible for the successor state; reuse duals.
        shifted = shift_solution(self.model_, sol, self.params.w, tol=np.inf)
        self._warm = (solution_to_primal(self.program_, shifted), sol_y)


class TrackingMpc(_MpcBase):
    """MPC for tracking with an artificial steady-state reference."""

    _kind = "mpct"

    def _build(self, x0):
        return build_mpct(self.model_, self.constraints_, self.params,
                          self.ref_, x0)

    def _store_warm(self, sol_x, sol_y, sol):
        # Shift the plan, repeat the last input, keep the artificial reference.
        A, B = self.model_.A, self.model_.B
        N = sol.inputs.shape[0]
        inputs = np.empty_like(sol.inputs)
        inputs[:-1] = sol.inputs[1:]
        inputs[-1] = sol.inputs[-1]
        states = np.empty_like(sol.states)
        states[0] = A @ sol.states[0] + B @ sol.inputs[0]
        for j in range(N):
            states[j + 1] = A @ states[j] + B @ inputs[j]
        shifted = FeasibleSolution(states=states, inputs=inputs,
                                   objective=np.nan, artificial=sol.artificial)
        self._warm = (solution_to_primal(self.program_, shifted), sol_y)
