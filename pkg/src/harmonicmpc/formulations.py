"""Builders for the tracking-MPC QP and the harmonic-MPC SOCP.

Both problems are emitted in one canonical conic form (quadratic cost,
zero cone, nonnegative cone, 3-dimensional second-order cones) consumed
by the in-repo ADMM solver.  Also implements the one-step shift of a
feasible harmonic-MPC solution used for warm starts and the recursive
feasibility diagnostics.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sparse

from .errors import DimensionError, InfeasibleInput, ResidualTooLarge
from .harmonic import HarmonicReference, Reference, eval_harmonic, rotate_coeffs
from .model import ConstraintSet, LtiModel, controllability_index
from .validation import (as_matrix, as_vector, check_diagonal,
                         check_positive_definite)


@dataclass(frozen=True)
class ControllerParams:
    """Horizon, cost weights and base frequency of the controllers.

    T_h and S_h must be diagonal: the stability argument relies on the
    rotation invariance of the harmonic offset cost, which only holds for
    diagonal weights.
    """

    N: int
    Q: np.ndarray
    R: np.ndarray
    T_e: np.ndarray
    S_e: np.ndarray
    T_h: np.ndarray
    S_h: np.ndarray
    T_a: np.ndarray
    S_a: np.ndarray
    w: float = 0.3254

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("horizon N must be at least 1")
        if self.w <= 0:
            raise ValueError("base frequency w must be strictly positive")
        n = np.atleast_2d(np.asarray(self.Q)).shape[0]
        m = np.atleast_2d(np.asarray(self.R)).shape[0]
        for name, size in (("Q", n), ("R", m), ("T_e", n), ("S_e", m),
                           ("T_h", n), ("S_h", m), ("T_a", n), ("S_a", m)):
            M = as_matrix(getattr(self, name), name, shape=(size, size))
            check_positive_definite(M, name)
            object.__setattr__(self, name, M)
        check_diagonal(self.T_h, "T_h")
        check_diagonal(self.S_h, "S_h")

    def warn_if_horizon_short(self, model: LtiModel) -> None:
        """Emit a warning when N is below the controllability index."""
        idx = controllability_index(model)
        if self.N < idx:
            warnings.warn(
                f"horizon N={self.N} is below the controllability index {idx}; "
                "convergence guarantees may not hold", stacklevel=2)


@dataclass(frozen=True)
class ConeProgram:
    """Canonical conic form: min 0.5 y'P y + q'y + const, A y + s = b, s in K.

    Rows of A are ordered zero cone, nonnegative cone, then n_soc blocks
    of dimension 3.  `layout` maps named quantities to index slices of the
    decision vector; every index is covered by exactly one name.
    """

    P: np.ndarray
    q: np.ndarray
    const: float
    A: np.ndarray
    b: np.ndarray
    n_zero: int
    n_nonneg: int
    n_soc: int
    layout: dict = field(default_factory=dict)

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        q = as_vector(self.q, "q", size=P.shape[0])
        A = self.A if sparse.issparse(self.A) else np.asarray(self.A, dtype=float)
        b = as_vector(self.b, "b", size=A.shape[0])
        if A.shape[1] != P.shape[0]:
            raise DimensionError("A and P disagree on the number of variables")
        if A.shape[0] != self.n_zero + self.n_nonneg + 3 * self.n_soc:
            raise DimensionError("cone sizes do not add up to the row count")
        if not np.allclose(P, np.asarray(P.T if not sparse.issparse(P) else P.T),
                           atol=1e-9):
            raise ValueError("P must be symmetric")
        covered = np.zeros(P.shape[0], dtype=int)
        for sl in self.layout.values():
            covered[sl] += 1
        if self.layout and np.any(covered != 1):
            raise ValueError("layout must cover every variable index exactly once")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def num_vars(self) -> int:
        return self.P.shape[0]

    def objective(self, y: np.ndarray) -> float:
        return float(0.5 * y @ (self.P @ y) + self.q @ y + self.const)

    def residuals(self, y: np.ndarray) -> tuple[float, float, float]:
        """(equality, nonnegative, SOC) constraint violations of a point."""
        r = np.asarray(self.A @ y) - self.b
        eq = float(np.abs(r[:self.n_zero]).max(initial=0.0))
        nn_slice = r[self.n_zero:self.n_zero + self.n_nonneg]
        nonneg = float(np.maximum(nn_slice, 0.0).max(initial=0.0))
        soc = 0.0
        s0 = self.n_zero + self.n_nonneg
        for k in range(self.n_soc):
            t = self.b[s0 + 3 * k] - float(np.asarray(self.A[s0 + 3 * k] @ y))
            a = self.b[s0 + 3 * k + 1] - float(np.asarray(self.A[s0 + 3 * k + 1] @ y))
            c = self.b[s0 + 3 * k + 2] - float(np.asarray(self.A[s0 + 3 * k + 2] @ y))
            soc = max(soc, np.hypot(a, c) - t)
        return eq, nonneg, max(soc, 0.0)

    def max_violation(self, y: np.ndarray) -> float:
        return max(self.residuals(y))

    def to_debug_json(self) -> str:
        """Sparse-triplet dump for cross-checking against external solvers."""
        Pc = sparse.coo_matrix(self.P)
        Ac = sparse.coo_matrix(self.A)
        return json.dumps({
            "num_vars": self.num_vars,
            "cones": {"zero": self.n_zero, "nonneg": self.n_nonneg,
                      "soc3": self.n_soc},
            "P": {"row": Pc.row.tolist(), "col": Pc.col.tolist(),
                  "val": Pc.data.tolist()},
            "q": self.q.tolist(),
            "const": self.const,
            "A": {"row": Ac.row.tolist(), "col": Ac.col.tolist(),
                  "val": Ac.data.tolist()},
            "b": self.b.tolist(),
            "layout": {k: [v.start, v.stop] for k, v in self.layout.items()},
        })


@dataclass(frozen=True)
class FeasibleSolution:
    """Predicted trajectory plus its artificial reference.

    `states` has N+1 rows (the terminal state is materialized), `inputs`
    has N rows.  Exactly one of `artificial` (steady-state pair) or
    `harmonic` is set, depending on the originating formulation.
    """

    states: np.ndarray
    inputs: np.ndarray
    objective: float
    artificial: tuple[np.ndarray, np.ndarray] | None = None
    harmonic: HarmonicReference | None = None


def _stage_layout(n: int, m: int, N: int, extra_names: list[tuple[str, int]]):
    """Interleaved per-stage layout with trailing named blocks."""
    layout = {}
    off = 0
    for j in range(N):
        layout[f"x_{j}"] = slice(off, off + n)
        layout[f"u_{j}"] = slice(off + n, off + n + m)
        off += n + m
    layout[f"x_{N}"] = slice(off, off + n)
    off += n
    for name, size in extra_names:
        layout[name] = slice(off, off + size)
        off += size
    return layout, off


def _stage_cost_terms(H, g, const, layout, weight, blocks_and_coeffs, target=None):
    """Accumulate || sum_i c_i y_block_i - target ||^2_weight into (H, g, const)."""
    for name_i, c_i in blocks_and_coeffs:
        for name_j, c_j in blocks_and_coeffs:
            H[layout[name_i], layout[name_j]] += (c_i * c_j) * weight
        if target is not None:
            g[layout[name_i]] += -2.0 * c_i * (weight @ target)
    if target is not None:
        const += target @ weight @ target
    return const


def _stage_constraint_rows(model, constraints, layout, N, nv):
    """Two nonnegative-cone rows per constrained component and stage."""
    C, D = model.C, model.D
    n_z = model.n_z
    rows = np.zeros((2 * n_z * N, nv))
    b = np.zeros(2 * n_z * N)
    for j in range(N):
        r0 = 2 * n_z * j
        sx, su = layout[f"x_{j}"], layout[f"u_{j}"]
        # upper: C x + D u <= z_max
        rows[r0:r0 + n_z, sx] = C
        rows[r0:r0 + n_z, su] = D
        b[r0:r0 + n_z] = constraints.z_max
        # lower: -(C x + D u) <= -z_min
        rows[r0 + n_z:r0 + 2 * n_z, sx] = -C
        rows[r0 + n_z:r0 + 2 * n_z, su] = -D
        b[r0 + n_z:r0 + 2 * n_z] = -constraints.z_min
    return rows, b


def _harmonic_constraint_blocks(model, constraints, w, nv, layout):
    """Equality and SOC rows tying the harmonic blocks to the dynamics.

    Equalities: steady center, rotated sin/cos propagation.  SOC blocks:
    per constrained component, the output envelope must fit on both sides
    of the tightened box.
    """
    A_m, B_m, C, D = model.A, model.B, model.C, model.D
    n, m, n_z = model.n, model.m, model.n_z
    cw, sw = np.cos(w), np.sin(w)
    I = np.eye(n)

    A_eq = np.zeros((3 * n, nv))
    b_eq = np.zeros(3 * n)
    # center is a steady state: (I - A) x_e - B u_e = 0
    A_eq[0:n, layout["x_e"]] = I - A_m
    A_eq[0:n, layout["u_e"]] = -B_m
    # rotated sin coefficient: (cos(w) I - A) x_s - sin(w) x_c - B u_s = 0
    A_eq[n:2 * n, layout["x_s"]] = cw * I - A_m
    A_eq[n:2 * n, layout["x_c"]] = -sw * I
    A_eq[n:2 * n, layout["u_s"]] = -B_m
    # rotated cos coefficient: sin(w) x_s + (cos(w) I - A) x_c - B u_c = 0
    A_eq[2 * n:3 * n, layout["x_s"]] = sw * I
    A_eq[2 * n:3 * n, layout["x_c"]] = cw * I - A_m
    A_eq[2 * n:3 * n, layout["u_c"]] = -B_m

    # Output maps of the harmonic blocks as row vectors over y.
    ze_rows = np.zeros((n_z, nv))
    zs_rows = np.zeros((n_z, nv))
    zc_rows = np.zeros((n_z, nv))
    ze_rows[:, layout["x_e"]] = C
    ze_rows[:, layout["u_e"]] = D
    zs_rows[:, layout["x_s"]] = C
    zs_rows[:, layout["u_s"]] = D
    zc_rows[:, layout["x_c"]] = C
    zc_rows[:, layout["u_c"]] = D

    zm_t = constraints.z_min_tight
    zM_t = constraints.z_max_tight
    A_soc = np.zeros((6 * n_z, nv))
    b_soc = np.zeros(6 * n_z)
    for i in range(n_z):
        # lower side: ||(z_s, z_c)|| <= z_e - z_min_tight
        r = 6 * i
        A_soc[r] = -ze_rows[i]
        b_soc[r] = -zm_t[i]
        A_soc[r + 1] = -zs_rows[i]
        A_soc[r + 2] = -zc_rows[i]
        # upper side: ||(z_s, z_c)|| <= z_max_tight - z_e
        A_soc[r + 3] = ze_rows[i]
        b_soc[r + 3] = zM_t[i]
        A_soc[r + 4] = -zs_rows[i]
        A_soc[r + 5] = -zc_rows[i]
    return A_eq, b_eq, A_soc, b_soc


def _dynamics_rows(model, layout, N, nv, x0):
    """Initial condition and stage dynamics as zero-cone rows."""
    A_m, B_m = model.A, model.B
    n = model.n
    rows = np.zeros(((N + 1) * n, nv))
    b = np.zeros((N + 1) * n)
    rows[0:n, layout["x_0"]] = np.eye(n)
    b[0:n] = x0
    for j in range(N):
        r0 = (j + 1) * n
        rows[r0:r0 + n, layout[f"x_{j + 1}"]] = np.eye(n)
        rows[r0:r0 + n, layout[f"x_{j}"]] = -A_m
        rows[r0:r0 + n, layout[f"u_{j}"]] = -B_m
    return rows, b


def build_mpct(model: LtiModel, constraints: ConstraintSet,
               params: ControllerParams, ref: Reference, x0) -> ConeProgram:
    """Tracking-MPC QP with an artificial steady-state reference.

    The terminal state must equal the artificial steady state, which in
    turn must satisfy the tightened output box; the offset cost pulls it
    toward the target.  No second-order cones are involved.
    """
    n, m, N = model.n, model.m, params.N
    x0 = as_vector(x0, "x0", size=n)
    layout, nv = _stage_layout(n, m, N, [("x_a", n), ("u_a", m)])

    H = np.zeros((nv, nv))
    g = np.zeros(nv)
    const = 0.0
    for j in range(N):
        const = _stage_cost_terms(H, g, const, layout, params.Q,
                                  [(f"x_{j}", 1.0), ("x_a", -1.0)])
        const = _stage_cost_terms(H, g, const, layout, params.R,
                                  [(f"u_{j}", 1.0), ("u_a", -1.0)])
    const = _stage_cost_terms(H, g, const, layout, params.T_a,
                              [("x_a", 1.0)], target=ref.x_r)
    const = _stage_cost_terms(H, g, const, layout, params.S_a,
                              [("u_a", 1.0)], target=ref.u_r)

    dyn_rows, dyn_b = _dynamics_rows(model, layout, N, nv, x0)
    # terminal equality x_N = x_a and steady-state condition on (x_a, u_a)
    extra_eq = np.zeros((2 * n, nv))
    extra_b = np.zeros(2 * n)
    extra_eq[0:n, layout[f"x_{N}"]] = np.eye(n)
    extra_eq[0:n, layout["x_a"]] = -np.eye(n)
    extra_eq[n:2 * n, layout["x_a"]] = np.eye(n) - model.A
    extra_eq[n:2 * n, layout["u_a"]] = -model.B
    A_eq = np.vstack([dyn_rows, extra_eq])
    b_eq = np.concatenate([dyn_b, extra_b])

    box_rows, box_b = _stage_constraint_rows(model, constraints, layout, N, nv)
    n_z = model.n_z
    art_rows = np.zeros((2 * n_z, nv))
    art_rows[0:n_z, layout["x_a"]] = model.C
    art_rows[0:n_z, layout["u_a"]] = model.D
    art_rows[n_z:, layout["x_a"]] = -model.C
    art_rows[n_z:, layout["u_a"]] = -model.D
    art_b = np.concatenate([constraints.z_max_tight, -constraints.z_min_tight])
    A_in = np.vstack([box_rows, art_rows])
    b_in = np.concatenate([box_b, art_b])

    return ConeProgram(
        P=2.0 * H, q=g, const=const,
        A=np.vstack([A_eq, A_in]), b=np.concatenate([b_eq, b_in]),
        n_zero=A_eq.shape[0], n_nonneg=A_in.shape[0], n_soc=0,
        layout=layout,
    )


def build_hmpc(model: LtiModel, constraints: ConstraintSet,
               params: ControllerParams, ref: Reference, x0) -> ConeProgram:
    """Harmonic-MPC SOCP with an artificial harmonic reference.

    The terminal state must land on the harmonic at its phase anchor,
    the harmonic coefficients must propagate through the dynamics, and
    two second-order cones per constrained component keep the output
    envelope inside the tightened box.
    """
    n, m, N, w = model.n, model.m, params.N, params.w
    x0 = as_vector(x0, "x0", size=n)
    layout, nv = _stage_layout(n, m, N, [
        ("x_e", n), ("x_s", n), ("x_c", n),
        ("u_e", m), ("u_s", m), ("u_c", m),
    ])

    H = np.zeros((nv, nv))
    g = np.zeros(nv)
    const = 0.0
    for j in range(N):
        s_j = np.sin(w * (j - N))
        c_j = np.cos(w * (j - N))
        const = _stage_cost_terms(H, g, const, layout, params.Q, [
            (f"x_{j}", 1.0), ("x_e", -1.0), ("x_s", -s_j), ("x_c", -c_j)])
        const = _stage_cost_terms(H, g, const, layout, params.R, [
            (f"u_{j}", 1.0), ("u_e", -1.0), ("u_s", -s_j), ("u_c", -c_j)])
    const = _stage_cost_terms(H, g, const, layout, params.T_e,
                              [("x_e", 1.0)], target=ref.x_r)
    const = _stage_cost_terms(H, g, const, layout, params.S_e,
                              [("u_e", 1.0)], target=ref.u_r)
    for name, weight in (("x_s", params.T_h), ("x_c", params.T_h),
                         ("u_s", params.S_h), ("u_c", params.S_h)):
        H[layout[name], layout[name]] += weight

    dyn_rows, dyn_b = _dynamics_rows(model, layout, N, nv, x0)
    # terminal state lands on the harmonic at its phase anchor
    term_rows = np.zeros((n, nv))
    term_rows[:, layout[f"x_{N}"]] = np.eye(n)
    term_rows[:, layout["x_e"]] = -np.eye(n)
    term_rows[:, layout["x_c"]] = -np.eye(n)
    harm_eq, harm_eq_b, A_soc, b_soc = _harmonic_constraint_blocks(
        model, constraints, w, nv, layout)
    A_eq = np.vstack([dyn_rows, term_rows, harm_eq])
    b_eq = np.concatenate([dyn_b, np.zeros(n), harm_eq_b])

    box_rows, box_b = _stage_constraint_rows(model, constraints, layout, N, nv)

    return ConeProgram(
        P=2.0 * H, q=g, const=const,
        A=np.vstack([A_eq, box_rows, A_soc]),
        b=np.concatenate([b_eq, box_b, b_soc]),
        n_zero=A_eq.shape[0], n_nonneg=box_rows.shape[0],
        n_soc=A_soc.shape[0] // 3,
        layout=layout,
    )


def extract_solution(program: ConeProgram, primal: np.ndarray,
                     params: ControllerParams | None = None,
                     tol: float = 1e-6) -> FeasibleSolution:
    """Recover named quantities from a raw primal vector.

    Raises ResidualTooLarge if the point violates the program constraints
    beyond `tol`.
    """
    primal = as_vector(primal, "primal", size=program.num_vars)
    viol = program.max_violation(primal)
    if viol > tol:
        raise ResidualTooLarge(
            f"constraint violation {viol:.3e} exceeds tolerance {tol:.1e}")
    N = max(int(k.split("_")[1]) for k in program.layout if k.startswith("x_")
            and k.split("_")[1].isdigit())
    states = np.stack([primal[program.layout[f"x_{j}"]] for j in range(N + 1)])
    inputs = np.stack([primal[program.layout[f"u_{j}"]] for j in range(N)])
    artificial = None
    harmonic = None
    if "x_a" in program.layout:
        artificial = (primal[program.layout["x_a"]].copy(),
                      primal[program.layout["u_a"]].copy())
    elif "x_e" in program.layout:
        if params is None:
            raise ValueError("params required to recover the harmonic reference")
        harmonic = HarmonicReference(
            x_e=primal[program.layout["x_e"]],
            x_s=primal[program.layout["x_s"]],
            x_c=primal[program.layout["x_c"]],
            u_e=primal[program.layout["u_e"]],
            u_s=primal[program.layout["u_s"]],
            u_c=primal[program.layout["u_c"]],
            w=params.w, N=N,
        )
    return FeasibleSolution(states=states, inputs=inputs,
                            objective=program.objective(primal),
                            artificial=artificial, harmonic=harmonic)


def offset_cost(params: ControllerParams, sol: FeasibleSolution,
                ref: Reference) -> float:
    """Offset-cost part of a solution's objective."""
    if sol.harmonic is not None:
        h = sol.harmonic
        de = h.x_e - ref.x_r
        du = h.u_e - ref.u_r
        return float(de @ params.T_e @ de + du @ params.S_e @ du
                     + h.x_s @ params.T_h @ h.x_s + h.x_c @ params.T_h @ h.x_c
                     + h.u_s @ params.S_h @ h.u_s + h.u_c @ params.S_h @ h.u_c)
    x_a, u_a = sol.artificial
    de = x_a - ref.x_r
    du = u_a - ref.u_r
    return float(de @ params.T_a @ de + du @ params.S_a @ du)


def solution_cost(params: ControllerParams, sol: FeasibleSolution,
                  ref: Reference) -> float:
    """Full objective (stage cost plus offset cost) of a solution."""
    N = sol.inputs.shape[0]
    total = offset_cost(params, sol, ref)
    for j in range(N):
        if sol.harmonic is not None:
            x_t, u_t = eval_harmonic(sol.harmonic, j)
        else:
            x_t, u_t = sol.artificial
        dx = sol.states[j] - x_t
        du = sol.inputs[j] - u_t
        total += float(dx @ params.Q @ dx + du @ params.R @ du)
    return total


def shift_solution(model: LtiModel, sol: FeasibleSolution, w: float,
                   tol: float = 1e-6) -> FeasibleSolution:
    """One-step shift of a feasible harmonic-MPC solution.

    Inputs advance by one sample (the last one is taken from the harmonic
    at its anchor), states are re-simulated from the successor state, the
    harmonic coefficients rotate and the center propagates through the
    dynamics.  The result is feasible for the successor state.
    """
    if sol.harmonic is None:
        raise ValueError("shift_solution requires a harmonic solution")
    h = sol.harmonic
    if not _harmonic_residual_ok(model, sol, tol):
        raise InfeasibleInput(
            "solution violates the harmonic consistency constraints "
            f"beyond tolerance {tol:.1e}")
    A, B = model.A, model.B
    N = sol.inputs.shape[0]

    inputs = np.empty_like(sol.inputs)
    inputs[:-1] = sol.inputs[1:]
    inputs[-1] = h.u_e + h.u_c
    x0_next = A @ sol.states[0] + B @ sol.inputs[0]
    states = np.empty_like(sol.states)
    states[0] = x0_next
    for j in range(N):
        states[j + 1] = A @ states[j] + B @ inputs[j]

    u_s_next, u_c_next = rotate_coeffs(h.u_s, h.u_c, w)
    h_next = HarmonicReference(
        x_e=A @ h.x_e + B @ h.u_e,
        x_s=A @ h.x_s + B @ h.u_s,
        x_c=A @ h.x_c + B @ h.u_c,
        u_e=h.u_e.copy(), u_s=u_s_next, u_c=u_c_next,
        w=w, N=h.N,
    )
    objective = np.nan
    shifted = FeasibleSolution(states=states, inputs=inputs,
                               objective=objective, harmonic=h_next)
    return shifted


def _harmonic_residual_ok(model: LtiModel, sol: FeasibleSolution,
                          tol: float) -> bool:
    """Check the dynamics/terminal/harmonic equalities of a solution."""
    A, B = model.A, model.B
    h = sol.harmonic
    res = 0.0
    for j in range(sol.inputs.shape[0]):
        r = sol.states[j + 1] - A @ sol.states[j] - B @ sol.inputs[j]
        res = max(res, float(np.abs(r).max()))
    res = max(res, float(np.abs(sol.states[-1] - h.x_e - h.x_c).max()))
    res = max(res, float(np.abs(h.x_e - A @ h.x_e - B @ h.u_e).max()))
    xs_rot, xc_rot = rotate_coeffs(h.x_s, h.x_c, h.w)
    res = max(res, float(np.abs(xs_rot - A @ h.x_s - B @ h.u_s).max()))
    res = max(res, float(np.abs(xc_rot - A @ h.x_c - B @ h.u_c).max()))
    return res <= tol


def solution_to_primal(program: ConeProgram, sol: FeasibleSolution) -> np.ndarray:
    """Pack a solution back into the program's decision vector layout."""
    y = np.zeros(program.num_vars)
    N = sol.inputs.shape[0]
    for j in range(N + 1):
        y[program.layout[f"x_{j}"]] = sol.states[j]
    for j in range(N):
        y[program.layout[f"u_{j}"]] = sol.inputs[j]
    if sol.artificial is not None:
        y[program.layout["x_a"]] = sol.artificial[0]
        y[program.layout["u_a"]] = sol.artificial[1]
    if sol.harmonic is not None:
        h = sol.harmonic
        for name in ("x_e", "x_s", "x_c", "u_e", "u_s", "u_c"):
            y[program.layout[name]] = getattr(h, name)
    return y
