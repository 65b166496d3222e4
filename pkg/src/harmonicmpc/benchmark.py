"""Ball-and-plate benchmark configuration.

Bundles the plant, its constraint set and the tuned controller weights
used throughout the test suite and the CLI.
"""

from __future__ import annotations

import numpy as np

from .formulations import ControllerParams
from .harmonic import Reference
from .model import BallPlateParams, ConstraintSet, LtiModel, ball_plate_model

BASE_FREQUENCY = 0.3254
N_ITER = 50


def benchmark_params(N: int, w: float = BASE_FREQUENCY) -> ControllerParams:
    """Tuned controller weights for the ball-and-plate plant."""
    Q = np.diag([10.0, 0.05, 0.05, 0.05, 10.0, 0.05, 0.05, 0.05])
    R = np.diag([0.5, 0.5])
    T_e = np.diag([600.0, 50.0, 50.0, 50.0, 600.0, 50.0, 50.0, 50.0])
    S_e = np.diag([0.3, 0.3])
    return ControllerParams(
        N=N, Q=Q, R=R,
        T_e=T_e, S_e=S_e,
        T_h=T_e, S_h=0.5 * S_e,
        T_a=T_e, S_a=S_e,
        w=w,
    )


def benchmark_model(p: BallPlateParams | None = None) -> tuple[LtiModel, ConstraintSet]:
    return ball_plate_model(p)


def benchmark_reference() -> Reference:
    """Default set-point: move the ball to position (1.8, 1.4)."""
    return Reference(x_r=[1.8, 0, 0, 0, 1.4, 0, 0, 0], u_r=[0.0, 0.0])
