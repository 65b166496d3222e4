"""Algebra of single-harmonic reference sequences.

A harmonic reference is parameterized by a center, a sine coefficient and
a cosine coefficient for both states and inputs, together with a base
frequency.  This module provides pointwise evaluation, the one-step
coefficient rotation, amplitude envelopes, consistency checks against the
plant dynamics, and the optimal artificial reference subproblem.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import SolverFailure
from .model import ConstraintSet, LtiModel
from .validation import as_vector

# Absolute tolerance for "this harmonic is consistent with the dynamics".
DYNAMICS_TOL = 1e-8


@dataclass(frozen=True)
class Reference:
    """Target state/input pair the controller should steer to."""

    x_r: np.ndarray
    u_r: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x_r", as_vector(self.x_r, "x_r"))
        object.__setattr__(self, "u_r", as_vector(self.u_r, "u_r"))


@dataclass(frozen=True)
class HarmonicReference:
    """Harmonic sequence center + sin/cos coefficients with base frequency w.

    The phase is anchored at sample N, i.e. the sequence value at index j
    is center + sin(w (j - N)) * sin-coefficient + cos(w (j - N)) *
    cos-coefficient, so at j = N the state value is x_e + x_c.
    """

    x_e: np.ndarray
    x_s: np.ndarray
    x_c: np.ndarray
    u_e: np.ndarray
    u_s: np.ndarray
    u_c: np.ndarray
    w: float
    N: int = 0

    def __post_init__(self):
        n = np.asarray(self.x_e).size
        m = np.asarray(self.u_e).size
        for name, size in (("x_e", n), ("x_s", n), ("x_c", n),
                           ("u_e", m), ("u_s", m), ("u_c", m)):
            object.__setattr__(self, name, as_vector(getattr(self, name), name, size=size))
        if self.w <= 0:
            raise ValueError("base frequency w must be strictly positive")

    def output_coeffs(self, model: LtiModel) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Constrained-output coefficients (z_e, z_s, z_c), recomputed on demand."""
        z_e = model.C @ self.x_e + model.D @ self.u_e
        z_s = model.C @ self.x_s + model.D @ self.u_s
        z_c = model.C @ self.x_c + model.D @ self.u_c
        return z_e, z_s, z_c

    def to_json(self) -> str:
        return json.dumps({
            "x_e": self.x_e.tolist(), "x_s": self.x_s.tolist(), "x_c": self.x_c.tolist(),
            "u_e": self.u_e.tolist(), "u_s": self.u_s.tolist(), "u_c": self.u_c.tolist(),
            "w": self.w,
        })

    @classmethod
    def from_json(cls, text: str, N: int = 0) -> "HarmonicReference":
        d = json.loads(text)
        return cls(x_e=d["x_e"], x_s=d["x_s"], x_c=d["x_c"],
                   u_e=d["u_e"], u_s=d["u_s"], u_c=d["u_c"], w=d["w"], N=N)


def eval_harmonic(h: HarmonicReference, j: int) -> tuple[np.ndarray, np.ndarray]:
    """Value of the harmonic state and input sequences at sample j."""
    phase = h.w * (j - h.N)
    s, c = np.sin(phase), np.cos(phase)
    x = h.x_e + h.x_s * s + h.x_c * c
    u = h.u_e + h.u_s * s + h.u_c * c
    return x, u


def rotate_coeffs(v_s, v_c, w: float) -> tuple[np.ndarray, np.ndarray]:
    """Advance sin/cos coefficients by one sample of a frequency-w harmonic.

    Preserves the componentwise sum of squares (a planar rotation).
    """
    v_s = np.asarray(v_s, dtype=float)
    v_c = np.asarray(v_c, dtype=float)
    cw, sw = np.cos(w), np.sin(w)
    return v_s * cw - v_c * sw, v_s * sw + v_c * cw


def amplitude_bounds(v_e, v_s, v_c) -> tuple[np.ndarray, np.ndarray]:
    """Componentwise envelope v_e -/+ sqrt(v_s^2 + v_c^2) of a harmonic."""
    v_e = np.asarray(v_e, dtype=float)
    amp = np.hypot(np.asarray(v_s, dtype=float), np.asarray(v_c, dtype=float))
    return v_e - amp, v_e + amp


def check_harmonic_dynamics(model: LtiModel, h: HarmonicReference,
                            tol: float = DYNAMICS_TOL) -> bool:
    """True iff the harmonic is consistent with the plant dynamics.

    Checks that the center is a steady state and that the rotated sin/cos
    coefficients propagate through (A, B).  When this holds, simulating the
    plant from x_e + x_c under the harmonic input reproduces the harmonic
    state sequence at every step.
    """
    A, B = model.A, model.B
    r_e = h.x_e - A @ h.x_e - B @ h.u_e
    xs_rot, xc_rot = rotate_coeffs(h.x_s, h.x_c, h.w)
    r_s = xs_rot - A @ h.x_s - B @ h.u_s
    r_c = xc_rot - A @ h.x_c - B @ h.u_c
    res = max(np.abs(r_e).max(), np.abs(r_s).max(), np.abs(r_c).max(), 0.0)
    return bool(res <= tol)


def build_artificial_reference_program(model: LtiModel, constraints: ConstraintSet,
                                       params, ref: Reference):
    """Conic program for the best admissible harmonic reference.

    Minimizes the offset cost over all harmonics consistent with the
    dynamics whose output envelope stays inside the tightened box.  Its
    optimum is the admissible steady state closest to the reference in the
    (T_e, S_e) metric, with vanishing sin/cos coefficients.
    """
    # Local import: formulations depends on this module for HarmonicReference.
    from .formulations import _harmonic_constraint_blocks, ConeProgram

    n, m = model.n, model.m
    layout = {
        "x_e": slice(0, n), "x_s": slice(n, 2 * n), "x_c": slice(2 * n, 3 * n),
        "u_e": slice(3 * n, 3 * n + m),
        "u_s": slice(3 * n + m, 3 * n + 2 * m),
        "u_c": slice(3 * n + 2 * m, 3 * n + 3 * m),
    }
    nv = 3 * n + 3 * m
    H = np.zeros((nv, nv))
    g = np.zeros(nv)
    const = 0.0
    H[layout["x_e"], layout["x_e"]] += params.T_e
    g[layout["x_e"]] += -2.0 * params.T_e @ ref.x_r
    const += ref.x_r @ params.T_e @ ref.x_r
    H[layout["u_e"], layout["u_e"]] += params.S_e
    g[layout["u_e"]] += -2.0 * params.S_e @ ref.u_r
    const += ref.u_r @ params.S_e @ ref.u_r
    H[layout["x_s"], layout["x_s"]] += params.T_h
    H[layout["x_c"], layout["x_c"]] += params.T_h
    H[layout["u_s"], layout["u_s"]] += params.S_h
    H[layout["u_c"], layout["u_c"]] += params.S_h

    A_eq, b_eq, A_soc, b_soc = _harmonic_constraint_blocks(
        model, constraints, params.w, nv, layout)
    A_all = np.vstack([A_eq, A_soc])
    b_all = np.concatenate([b_eq, b_soc])
    return ConeProgram(
        P=2.0 * H, q=g, const=const, A=A_all, b=b_all,
        n_zero=A_eq.shape[0], n_nonneg=0, n_soc=A_soc.shape[0] // 3,
        layout=layout,
    )


def optimal_artificial_reference(model: LtiModel, constraints: ConstraintSet,
                                 params, ref: Reference,
                                 settings=None) -> tuple[HarmonicReference, float]:
    """Best admissible harmonic reference for a target and its offset cost."""
    from .solver import SolverSettings, solve

    if settings is None:
        # Tight defaults: this subproblem is tiny and its optimum is used
        # as a zero-cost baseline by the stability diagnostics.
        settings = SolverSettings(eps_abs=1e-9, eps_rel=1e-9)
    program = build_artificial_reference_program(model, constraints, params, ref)
    primal, _, report = solve(program, settings)
    if report.status != "Solved":
        raise SolverFailure(f"artificial reference subproblem: {report.status}")
    h = HarmonicReference(
        x_e=primal[program.layout["x_e"]],
        x_s=primal[program.layout["x_s"]],
        x_c=primal[program.layout["x_c"]],
        u_e=primal[program.layout["u_e"]],
        u_s=primal[program.layout["u_s"]],
        u_c=primal[program.layout["u_c"]],
        w=params.w, N=params.N,
    )
    return h, report.objective
