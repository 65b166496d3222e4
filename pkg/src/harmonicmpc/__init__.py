"""Linear MPC for set-point tracking with harmonic artificial references."""

from .benchmark import (BASE_FREQUENCY, benchmark_model, benchmark_params,
                        benchmark_reference)
from .controllers import HarmonicMpc, TrackingMpc
from .formulations import (ConeProgram, ControllerParams, FeasibleSolution,
                           build_hmpc, build_mpct, extract_solution,
                           offset_cost, shift_solution, solution_cost)
from .harmonic import (HarmonicReference, Reference, amplitude_bounds,
                       check_harmonic_dynamics, eval_harmonic,
                       optimal_artificial_reference, rotate_coeffs)
from .model import (BallPlateParams, ConstraintSet, LtiModel, ball_plate_model,
                    controllability_index, discretize_zoh, evaluate_output,
                    linearize_ball_plate, model_from_json, model_to_json)
from .freqdesign import frequency_response, gain_at, suggest_w
from .sim import (SimulationTrace, lyapunov_check, performance_index,
                  run_closed_loop, snapshot, trace_to_csv)
from .solver import (AdmmSolver, SolveReport, SolverSettings,
                     linear_system_factor, project_soc, solve)

__all__ = [
    "BASE_FREQUENCY", "AdmmSolver", "BallPlateParams", "ConeProgram",
    "ConstraintSet", "ControllerParams", "FeasibleSolution", "HarmonicMpc",
    "HarmonicReference", "LtiModel", "Reference", "SimulationTrace",
    "SolveReport", "SolverSettings", "TrackingMpc", "amplitude_bounds",
    "ball_plate_model", "benchmark_model", "benchmark_params",
    "benchmark_reference", "build_hmpc", "build_mpct",
    "check_harmonic_dynamics", "controllability_index", "discretize_zoh",
    "eval_harmonic", "evaluate_output", "extract_solution",
    "frequency_response", "gain_at", "linear_system_factor",
    "linearize_ball_plate", "lyapunov_check", "model_from_json",
    "model_to_json", "offset_cost", "optimal_artificial_reference",
    "performance_index", "project_soc", "rotate_coeffs", "run_closed_loop",
    "shift_solution", "snapshot", "solution_cost", "solve", "suggest_w",
    "trace_to_csv",
]
