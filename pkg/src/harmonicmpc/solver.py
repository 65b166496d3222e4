"""First-order operator-splitting solver for quadratic conic programs.

Solves  minimize 0.5 y'P y + q'y  subject to  A y + s = b,  s in K,
where K is a product of a zero cone, a nonnegative cone and 3-dimensional
second-order cones.  The scheme is the standard ADMM splitting with Ruiz
equilibration, a cached sparse factorization of the regularized KKT
matrix, relaxation, and periodic penalty adaptation.  Termination is
checked on the unscaled residuals with the mixed absolute/relative
infinity-norm criterion.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from .errors import SolverFailure

# Interval (in iterations) between residual/penalty checks.
_CHECK_EVERY = 25
# Penalty multiplier on zero-cone (equality) rows.
_RHO_EQ_SCALE = 1e3
# Residual-ratio threshold that triggers a penalty update and refactor.
_RHO_RATIO_THRESH = 5.0
# Ruiz equilibration sweeps.
_RUIZ_ITERS = 10


@dataclass(frozen=True)
class SolverSettings:
    """Termination tolerances and ADMM parameters."""

    eps_abs: float = 1e-5
    eps_rel: float = 1e-5
    eps_prim_inf: float = 1e-5
    eps_dual_inf: float = 1e-5
    max_iter: int = 20000
    rho: float = 0.1
    sigma: float = 1e-6
    alpha: float = 1.6
    adaptive_rho: bool = True
    scaling: bool = True

    def __post_init__(self):
        for name in ("eps_abs", "eps_rel", "eps_prim_inf", "eps_dual_inf"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        if not 0 < self.alpha < 2:
            raise ValueError("alpha must lie in (0, 2)")
        if self.rho <= 0 or self.sigma < 0:
            raise ValueError("rho must be positive and sigma nonnegative")


@dataclass(frozen=True)
class SolveReport:
    """Outcome of a single solve."""

    status: str          # Solved | PrimalInfeasible | DualInfeasible | MaxIter
    iterations: int
    primal_residual: float
    dual_residual: float
    objective: float
    solve_time: float


def project_soc(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of (t, a, b) onto {(t, a, b): ||(a, b)|| <= t}."""
    v = np.asarray(v, dtype=float)
    t, tail = v[0], v[1:]
    r = np.linalg.norm(tail)
    if r <= t:
        return v.copy()
    if r <= -t:
        return np.zeros_like(v)
    c = 0.5 * (t + r)
    out = np.empty_like(v)
    out[0] = c
    out[1:] = tail * (c / r)
    return out


def _project_soc_blocks(t: np.ndarray, a: np.ndarray, b: np.ndarray):
    """Vectorized projection of stacked 3-dim second-order cone blocks."""
    r = np.hypot(a, b)
    inside = r <= t
    below = r <= -t
    safe_r = np.where(r > 0, r, 1.0)
    scale = 0.5 * (t + r) / safe_r
    t_out = np.where(inside, t, np.where(below, 0.0, 0.5 * (t + r)))
    a_out = np.where(inside, a, np.where(below, 0.0, a * scale))
    b_out = np.where(inside, b, np.where(below, 0.0, b * scale))
    return t_out, a_out, b_out


class KktFactorization:
    """Cached sparse LU factorization of the regularized KKT matrix.

    Reused across iterations and across warm-started resolves where only
    the linear terms q and b change.  A fixed elimination ordering keeps
    the solve deterministic.
    """

    def __init__(self, P, A, rho_vec: np.ndarray, sigma: float):
        self.n = P.shape[0]
        self.m = A.shape[0]
        K = sparse.bmat(
            [[P + sigma * sparse.eye(self.n), A.T],
             [A, -sparse.diags(1.0 / rho_vec)]],
            format="csc",
        )
        try:
            self._lu = spla.splu(K, permc_spec="COLAMD",
                                 options={"SymmetricMode": True})
        except RuntimeError as exc:  # singular factorization
            raise SolverFailure(f"KKT factorization failed: {exc}") from exc

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return self._lu.solve(rhs)


class _Cones:
    """Index bookkeeping for the zero / nonneg / SOC row blocks."""

    def __init__(self, n_zero: int, n_nonneg: int, n_soc: int):
        self.n_zero = n_zero
        self.n_nonneg = n_nonneg
        self.n_soc = n_soc
        self.m = n_zero + n_nonneg + 3 * n_soc
        s = n_zero + n_nonneg
        self.soc_t = np.arange(s, self.m, 3)
        self.soc_a = self.soc_t + 1
        self.soc_b = self.soc_t + 2

    def project(self, v: np.ndarray) -> np.ndarray:
        out = v.copy()
        out[:self.n_zero] = 0.0
        nn = slice(self.n_zero, self.n_zero + self.n_nonneg)
        out[nn] = np.maximum(v[nn], 0.0)
        if self.n_soc:
            t, a, b = _project_soc_blocks(v[self.soc_t], v[self.soc_a], v[self.soc_b])
            out[self.soc_t] = t
            out[self.soc_a] = a
            out[self.soc_b] = b
        return out

    def dual_cone_distance(self, y: np.ndarray) -> float:
        """Max violation of membership in the dual cone K*."""
        viol = 0.0
        nn = y[self.n_zero:self.n_zero + self.n_nonneg]
        if nn.size:
            viol = max(viol, float(np.maximum(-nn, 0.0).max(initial=0.0)))
        if self.n_soc:
            r = np.hypot(y[self.soc_a], y[self.soc_b])
            viol = max(viol, float(np.maximum(r - y[self.soc_t], 0.0).max(initial=0.0)))
        return viol

    def recession_distance(self, v: np.ndarray) -> float:
        """Max violation of -v belonging to the recession cone of K."""
        viol = float(np.abs(v[:self.n_zero]).max(initial=0.0))
        nn = v[self.n_zero:self.n_zero + self.n_nonneg]
        if nn.size:
            viol = max(viol, float(np.maximum(nn, 0.0).max(initial=0.0)))
        if self.n_soc:
            r = np.hypot(v[self.soc_a], v[self.soc_b])
            viol = max(viol, float(np.maximum(r + v[self.soc_t], 0.0).max(initial=0.0)))
        return viol

    def uniformize_rows(self, e: np.ndarray) -> np.ndarray:
        """Force one shared scaling per SOC block (cone invariance)."""
        if self.n_soc:
            g = np.stack([e[self.soc_t], e[self.soc_a], e[self.soc_b]]).mean(axis=0)
            e = e.copy()
            e[self.soc_t] = g
            e[self.soc_a] = g
            e[self.soc_b] = g
        return e


def _ruiz_equilibrate(P, A, q, cones, iters=_RUIZ_ITERS):
    """Modified Ruiz scaling of the KKT data with cost normalization.

    Returns (P_s, A_s, q_s, d, e, c) where the scaled data is
    P_s = c D P D, A_s = E A D, q_s = c D q with D = diag(d), E = diag(e).
    Rows belonging to one SOC block share a common factor.
    """
    n, m = P.shape[0], A.shape[0]
    d = np.ones(n)
    e = np.ones(m)
    c = 1.0
    Ps = P.copy()
    As = A.copy()
    qs = q.copy()
    for _ in range(iters):
        col_P = np.abs(Ps).max(axis=0).toarray().ravel() if sparse.issparse(Ps) \
            else np.abs(Ps).max(axis=0)
        col_A = np.abs(As).max(axis=0).toarray().ravel() if sparse.issparse(As) \
            else np.abs(As).max(axis=0)
        col = np.maximum(col_P, col_A)
        # leave structurally empty columns/rows alone
        dd = np.where(col > 0, 1.0 / np.sqrt(np.maximum(col, 1e-12)), 1.0)
        row_A = np.abs(As).max(axis=1)
        if sparse.issparse(As):
            row_A = row_A.toarray().ravel()
        de = np.where(row_A > 0, 1.0 / np.sqrt(np.maximum(row_A, 1e-12)), 1.0)
        de = cones.uniformize_rows(de)
        Dd = sparse.diags(dd)
        Ee = sparse.diags(de)
        Ps = Dd @ Ps @ Dd
        As = Ee @ As @ Dd
        qs = dd * qs
        d *= dd
        e *= de
        # cost normalization
        col_P = np.abs(Ps).max(axis=0).toarray().ravel() if sparse.issparse(Ps) \
            else np.abs(Ps).max(axis=0)
        denom = max(float(np.mean(col_P)), float(np.abs(qs).max(initial=0.0)))
        gamma = 1.0 / denom if denom > 1e-12 else 1.0
        Ps = Ps * gamma
        qs = qs * gamma
        c *= gamma
    return Ps, As, qs, d, e, c


class AdmmSolver:
    """Reusable solver bound to one program structure.

    The scaling, factorization and cone layout are kept between calls;
    `solve` may be given updated q/b vectors and a warm start.  A solver
    instance is single-threaded; use one instance per thread.
    """

    def __init__(self, program, settings: SolverSettings | None = None):
        self.settings = settings or SolverSettings()
        self.P0 = sparse.csc_matrix(program.P)
        self.A0 = sparse.csc_matrix(program.A)
        self.q0 = np.asarray(program.q, dtype=float).copy()
        self.b0 = np.asarray(program.b, dtype=float).copy()
        self.const = float(program.const)
        self.cones = _Cones(program.n_zero, program.n_nonneg, program.n_soc)
        if self.A0.shape[0] != self.cones.m:
            raise ValueError("cone sizes do not match the constraint matrix")
        if self.settings.scaling:
            Ps, As, qs, d, e, c = _ruiz_equilibrate(
                self.P0, self.A0, self.q0, self.cones)
            self.P = sparse.csc_matrix(Ps)
            self.A = sparse.csc_matrix(As)
            self.q = qs
            self.d, self.e, self.c = d, e, c
        else:
            self.P, self.A, self.q = self.P0, self.A0, self.q0.copy()
            self.d = np.ones(self.P0.shape[0])
            self.e = np.ones(self.cones.m)
            self.c = 1.0
        self.b = self.e * self.b0
        self._rho_bar = self.settings.rho
        self._factor = None

    # -- penalty handling -------------------------------------------------

    def _rho_vec(self) -> np.ndarray:
        rho = np.full(self.cones.m, self._rho_bar)
        rho[:self.cones.n_zero] *= _RHO_EQ_SCALE
        return rho

    def _refactor(self):
        self._rho = self._rho_vec()
        self._factor = KktFactorization(self.P, self.A, self._rho,
                                        self.settings.sigma)

    def reset_penalty(self):
        """Drop any adapted penalty back to the configured base value."""
        self._rho_bar = self.settings.rho
        self._factor = None

    # -- main loop --------------------------------------------------------

    def solve(self, q=None, b=None, warm_start=None, iter_log: list | None = None):
        """Run ADMM to the configured tolerances.

        Returns (primal, dual, SolveReport) in the original (unscaled)
        variables.  `warm_start` is an optional (primal, dual) pair.
        """
        st = self.settings
        if q is not None:
            self.q0 = np.asarray(q, dtype=float).copy()
            self.q = self.c * self.d * self.q0
        if b is not None:
            self.b0 = np.asarray(b, dtype=float).copy()
            self.b = self.e * self.b0
        n, m = self.P.shape[0], self.cones.m
        if self._factor is None:
            self._refactor()
        rho = self._rho

        # Internally the multiplier carries the opposite sign of the KKT
        # dual returned to callers (it lives in the polar cone).
        if warm_start is not None:
            x = np.asarray(warm_start[0], dtype=float) / self.d
            y = -self.c * np.asarray(warm_start[1], dtype=float) / self.e
            s = self.cones.project(self.b - self.A @ x)
        else:
            x = np.zeros(n)
            y = np.zeros(m)
            s = self.cones.project(self.b.copy())

        t0 = time.perf_counter()
        status = "MaxIter"
        r_prim = r_dual = np.inf
        it = 0
        x_prev_chk = x.copy()
        y_prev_chk = y.copy()
        # Penalty updates back off geometrically: repeated rescaling can
        # lock the iteration into a limit cycle, so each update doubles
        # the wait before the next one is allowed.
        next_adapt = _CHECK_EVERY
        rhs = np.empty(n + m)
        for it in range(1, st.max_iter + 1):
            rhs[:n] = st.sigma * x - self.q
            rhs[n:] = self.b - s + y / rho
            sol = self._factor.solve(rhs)
            x_t = sol[:n]
            nu = sol[n:]
            s_t = s - (nu + y) / rho
            x = st.alpha * x_t + (1.0 - st.alpha) * x
            u = st.alpha * s_t + (1.0 - st.alpha) * s + y / rho
            s = self.cones.project(u)
            y = rho * (u - s)

            if it % _CHECK_EVERY == 0 or it == st.max_iter:
                # Unscaled quantities for the termination criterion.
                Ax_u = (self.A @ x) / self.e
                s_u = s / self.e
                Px_u = (self.P @ x) / (self.c * self.d)
                ATy_u = (self.A.T @ (-y)) / (self.c * self.d)
                q_u = self.q0
                r_prim = float(np.abs(Ax_u + s_u - self.b0).max(initial=0.0))
                r_dual = float(np.abs(Px_u + q_u + ATy_u).max(initial=0.0))
                if iter_log is not None:
                    obj = (0.5 * x @ (self.P @ x) + self.q @ x) / self.c + self.const
                    iter_log.append((it, r_prim, r_dual, obj))
                eps_p = st.eps_abs + st.eps_rel * max(
                    np.abs(Ax_u).max(initial=0.0), np.abs(s_u).max(initial=0.0),
                    np.abs(self.b0).max(initial=0.0))
                eps_d = st.eps_abs + st.eps_rel * max(
                    np.abs(Px_u).max(initial=0.0), np.abs(q_u).max(initial=0.0),
                    np.abs(ATy_u).max(initial=0.0))
                if r_prim <= eps_p and r_dual <= eps_d:
                    status = "Solved"
                    break
                dy = (y - y_prev_chk) * self.e / self.c
                dx = (x - x_prev_chk) * self.d
                if self._primal_infeasible(dy):
                    status = "PrimalInfeasible"
                    break
                if self._dual_infeasible(dx):
                    status = "DualInfeasible"
                    break
                x_prev_chk = x.copy()
                y_prev_chk = y.copy()
                if st.adaptive_rho and it < st.max_iter and it >= next_adapt:
                    before = self._rho_bar
                    rho = self._maybe_update_rho(r_prim / max(eps_p, 1e-30),
                                                r_dual / max(eps_d, 1e-30))
                    if self._rho_bar != before:
                        next_adapt = 2 * it

        elapsed = time.perf_counter() - t0
        x_out = x * self.d
        y_out = -y * self.e / self.c
        obj = float(0.5 * x_out @ (self.P0 @ x_out) + self.q0 @ x_out + self.const)
        report = SolveReport(status=status, iterations=it,
                             primal_residual=r_prim, dual_residual=r_dual,
                             objective=obj, solve_time=elapsed)
        return x_out, y_out, report

    def _maybe_update_rho(self, rp_scaled: float, rd_scaled: float) -> np.ndarray:
        ratio = np.sqrt(rp_scaled / max(rd_scaled, 1e-30))
        if ratio > _RHO_RATIO_THRESH or ratio < 1.0 / _RHO_RATIO_THRESH:
            self._rho_bar = float(np.clip(self._rho_bar * ratio, 1e-6, 1e6))
            self._refactor()
        return self._rho

    def _primal_infeasible(self, dy: np.ndarray) -> bool:
        nrm = np.abs(dy).max(initial=0.0)
        if nrm < 1e-12:
            return False
        eps = self.settings.eps_prim_inf
        for cand in (dy / nrm, -dy / nrm):
            if (np.abs(self.A0.T @ cand).max(initial=0.0) <= eps
                    and self.cones.dual_cone_distance(cand) <= eps
                    and self.b0 @ cand <= -eps):
                return True
        return False

    def _dual_infeasible(self, dx: np.ndarray) -> bool:
        nrm = np.abs(dx).max(initial=0.0)
        if nrm < 1e-12:
            return False
        eps = self.settings.eps_dual_inf
        e = dx / nrm
        return (np.abs(self.P0 @ e).max(initial=0.0) <= eps
                and self.q0 @ e <= -eps
                and self.cones.recession_distance(self.A0 @ e) <= eps)


def linear_system_factor(program, rho: float, sigma: float) -> KktFactorization:
    """Factor the regularized KKT matrix of a program once, for reuse."""
    cones = _Cones(program.n_zero, program.n_nonneg, program.n_soc)
    rho_vec = np.full(cones.m, rho)
    rho_vec[:cones.n_zero] *= _RHO_EQ_SCALE
    return KktFactorization(sparse.csc_matrix(program.P),
                            sparse.csc_matrix(program.A), rho_vec, sigma)


def solve(program, settings: SolverSettings | None = None, warm_start=None,
          iter_log: list | None = None):
    """One-shot solve of a conic program.

    Returns (primal, dual, SolveReport).  Deterministic for identical
    inputs and settings.
    """
    return AdmmSolver(program, settings).solve(warm_start=warm_start,
                                               iter_log=iter_log)
