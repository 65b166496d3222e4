"""Discrete LTI plant representation and the ball-and-plate case study.

Contains the state-space container with constraint handling, exact
zero-order-hold discretization, and the linearized ball-and-plate model
used by the benchmark.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, NotControllable
from .validation import as_matrix, as_vector

# Truncation tolerance of the matrix exponential series.
_EXPM_TOL = 1e-12


@dataclass(frozen=True)
class LtiModel:
    """Discrete-time state-space model x+ = A x + B u, z = C x + D u.

    The pair (A, B) must be controllable; construction fails otherwise.
    Instances are immutable and safe to share between threads.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        n = A.shape[0]
        if A.shape[1] != n:
            raise DimensionError(f"A must be square, got {A.shape}")
        B = as_matrix(self.B, "B")
        if B.shape[0] != n:
            raise DimensionError(f"B must have {n} rows, got {B.shape}")
        m = B.shape[1]
        C = as_matrix(self.C, "C")
        if C.shape[1] != n:
            raise DimensionError(f"C must have {n} columns, got {C.shape}")
        D = as_matrix(self.D, "D", shape=(C.shape[0], m))
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)
        # Fails with NotControllable if rank never reaches n.
        controllability_index(self)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def n_z(self) -> int:
        return self.C.shape[0]

    def to_dict(self) -> dict:
        return {
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "C": self.C.tolist(),
            "D": self.D.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LtiModel":
        return cls(A=d["A"], B=d["B"], C=d["C"], D=d["D"])


@dataclass(frozen=True)
class ConstraintSet:
    """Box constraints z_m <= z <= z_M with a positive tightening eps.

    The tightened bounds z_m + eps and z_M - eps define the admissible
    band for artificial references.
    """

    z_min: np.ndarray
    z_max: np.ndarray
    eps: np.ndarray

    def __post_init__(self):
        z_min = as_vector(self.z_min, "z_min")
        z_max = as_vector(self.z_max, "z_max", size=z_min.size)
        eps = np.asarray(self.eps, dtype=float)
        if eps.ndim == 0:
            eps = np.full(z_min.size, float(eps))
        eps = as_vector(eps, "eps", size=z_min.size)
        if np.any(z_min >= z_max):
            raise ValueError("z_min < z_max must hold componentwise")
        if np.any(eps <= 0):
            raise ValueError("eps must be strictly positive")
        if np.any(z_min + eps >= z_max - eps):
            raise ValueError("tightened bounds collapse: eps too large")
        object.__setattr__(self, "z_min", z_min)
        object.__setattr__(self, "z_max", z_max)
        object.__setattr__(self, "eps", eps)

    @property
    def n_z(self) -> int:
        return self.z_min.size

    @property
    def z_min_tight(self) -> np.ndarray:
        return self.z_min + self.eps

    @property
    def z_max_tight(self) -> np.ndarray:
        return self.z_max - self.eps

    def to_dict(self) -> dict:
        return {
            "z_min": self.z_min.tolist(),
            "z_max": self.z_max.tolist(),
            "eps": self.eps.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConstraintSet":
        return cls(z_min=d["z_min"], z_max=d["z_max"], eps=d["eps"])


def model_to_json(model: LtiModel, constraints: ConstraintSet | None = None) -> str:
    """Serialize a model (and optionally constraints) to a JSON document."""
    doc = model.to_dict()
    if constraints is not None:
        doc.update(constraints.to_dict())
    return json.dumps(doc)


def model_from_json(text: str) -> tuple[LtiModel, ConstraintSet | None]:
    """Parse a JSON document produced by :func:`model_to_json`."""
    doc = json.loads(text)
    model = LtiModel.from_dict(doc)
    constraints = None
    if "z_min" in doc:
        constraints = ConstraintSet.from_dict(doc)
    return model, constraints


@dataclass(frozen=True)
class BallPlateParams:
    """Physical parameters of the ball-and-plate system."""

    mass: float = 0.05          # kg
    radius: float = 0.01        # m
    inertia: float = 2e-6       # kg m^2, solid ball: (2/5) m r^2
    gravity: float = 9.81       # m/s^2
    sample_time: float = 0.2    # s

    def __post_init__(self):
        for name in ("mass", "radius", "inertia", "gravity", "sample_time"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")


def controllability_index(model: LtiModel) -> int:
    """Smallest k such that rank [B, AB, ..., A^(k-1) B] equals n."""
    A, B, n = model.A, model.B, model.A.shape[0]
    blocks = [B]
    for k in range(1, n + 1):
        ctrb = np.hstack(blocks)
        if np.linalg.matrix_rank(ctrb) == n:
            return k
        blocks.append(A @ blocks[-1])
    raise NotControllable("(A, B) is not controllable")


def evaluate_output(model: LtiModel, x, u) -> np.ndarray:
    """Constrained output z = C x + D u."""
    x = as_vector(x, "x", size=model.n)
    u = as_vector(u, "u", size=model.m)
    return model.C @ x + model.D @ u


def expm_series(M: np.ndarray, tol: float = _EXPM_TOL) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring on a truncated series."""
    M = as_matrix(M, "M")
    nrm = np.linalg.norm(M, 1)
    # Scale so the series argument has norm <= 0.5.
    s = max(0, int(math.ceil(math.log2(nrm / 0.5)))) if nrm > 0.5 else 0
    Ms = M / (2 ** s)
    E = np.eye(M.shape[0])
    term = np.eye(M.shape[0])
    k = 1
    while True:
        term = term @ Ms / k
        E = E + term
        if np.linalg.norm(term, 1) < tol:
            break
        k += 1
    for _ in range(s):
        E = E @ E
    return E


def linearize_ball_plate(p: BallPlateParams) -> tuple[np.ndarray, np.ndarray]:
    """Continuous-time Jacobians of the ball-and-plate dynamics at the origin.

    State order is (z1, z1', th1, th1', z2, z2', th2, th2'); inputs are the
    angular accelerations of the two plate axes.  At the origin the only
    coupling left is the acceleration gain m/(m + I/r^2) * g from plate
    angle to ball acceleration, plus the two integrator chains.
    """
    gain = p.mass / (p.mass + p.inertia / p.radius ** 2) * p.gravity
    A_c = np.zeros((8, 8))
    B_c = np.zeros((8, 2))
    for axis in range(2):
        o = 4 * axis
        A_c[o + 0, o + 1] = 1.0        # position <- velocity
        A_c[o + 1, o + 2] = gain       # velocity <- plate angle
        A_c[o + 2, o + 3] = 1.0        # angle <- angular velocity
        B_c[o + 3, axis] = 1.0         # angular velocity <- input
    return A_c, B_c


def discretize_zoh(A_c, B_c, T_s: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact zero-order-hold discretization via the augmented exponential."""
    A_c = as_matrix(A_c, "A_c")
    B_c = as_matrix(B_c, "B_c")
    if T_s <= 0:
        raise ValueError("T_s must be strictly positive")
    n, m = A_c.shape[0], B_c.shape[1]
    M = np.zeros((n + m, n + m))
    M[:n, :n] = A_c * T_s
    M[:n, n:] = B_c * T_s
    E = expm_series(M)
    return E[:n, :n], E[:n, n:]


def ball_plate_model(p: BallPlateParams | None = None) -> tuple[LtiModel, ConstraintSet]:
    """Discretized ball-and-plate model with its constraint set.

    Constrained outputs are (z1', th1, z2', th2, u1, u2) with symmetric
    bounds (0.5, pi/4, 0.5, pi/4, 0.4, 0.4) and tightening 1e-4.
    """
    p = p or BallPlateParams()
    A_c, B_c = linearize_ball_plate(p)
    A, B = discretize_zoh(A_c, B_c, p.sample_time)
    C = np.zeros((6, 8))
    C[0, 1] = 1.0
    C[1, 2] = 1.0
    C[2, 5] = 1.0
    C[3, 6] = 1.0
    D = np.zeros((6, 2))
    D[4, 0] = 1.0
    D[5, 1] = 1.0
    bound = np.array([0.5, np.pi / 4, 0.5, np.pi / 4, 0.4, 0.4])
    constraints = ConstraintSet(z_min=-bound, z_max=bound, eps=1e-4)
    return LtiModel(A=A, B=B, C=C, D=D), constraints
