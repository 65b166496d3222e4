import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from harmonicmpc import (HarmonicReference, Reference, amplitude_bounds,
                         check_harmonic_dynamics, eval_harmonic,
                         optimal_artificial_reference, rotate_coeffs)
from harmonicmpc.solver import SolverSettings

from conftest import small_params

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)
coeff_vecs = st.lists(finite, min_size=1, max_size=5)
freqs = st.floats(min_value=1e-3, max_value=np.pi)


def make_consistent_harmonic(model, rng, w, N=0):
    """Harmonic consistent with the dynamics, built by direct linear solve."""
    n, m = model.n, model.m
    A, B = model.A, model.B
    E = np.eye(n) - A
    if np.linalg.matrix_rank(E) == n:
        u_e = rng.normal(scale=0.1, size=m)
        x_e = np.linalg.solve(E, B @ u_e)
    else:
        # steady family at zero input: pick a random point in null(I - A)
        u_e = np.zeros(m)
        _, s, Vt = np.linalg.svd(E)
        null = Vt[s.size - np.sum(s < 1e-12):] if np.sum(s < 1e-12) else Vt[-1:]
        x_e = null.T @ rng.normal(scale=0.5, size=null.shape[0])
    u_s = rng.normal(scale=0.1, size=m)
    u_c = rng.normal(scale=0.1, size=m)
    cw, sw = np.cos(w), np.sin(w)
    M = np.block([[cw * np.eye(n) - A, -sw * np.eye(n)],
                  [sw * np.eye(n), cw * np.eye(n) - A]])
    sc = np.linalg.solve(M, np.concatenate([B @ u_s, B @ u_c]))
    return HarmonicReference(x_e=x_e, x_s=sc[:n], x_c=sc[n:],
                             u_e=u_e, u_s=u_s, u_c=u_c, w=w, N=N)


class TestRotation:
    @given(coeff_vecs, freqs, st.randoms(use_true_random=False))
    def test_norm_preserved(self, v_s, w, rnd):
        v_s = np.asarray(v_s)
        v_c = np.asarray([rnd.uniform(-10, 10) for _ in v_s])
        r_s, r_c = rotate_coeffs(v_s, v_c, w)
        np.testing.assert_allclose(r_s ** 2 + r_c ** 2, v_s ** 2 + v_c ** 2,
                                   rtol=1e-9, atol=1e-6)

    @given(freqs)
    def test_full_turn_is_identity(self, w):
        v_s, v_c = np.array([1.0, -2.0]), np.array([0.5, 3.0])
        r_s, r_c = v_s, v_c
        steps = 16
        for _ in range(steps):
            r_s, r_c = rotate_coeffs(r_s, r_c, w)
        # rotating 16 times by w equals rotating once by 16 w
        e_s, e_c = rotate_coeffs(v_s, v_c, steps * w)
        np.testing.assert_allclose(r_s, e_s, atol=1e-9)
        np.testing.assert_allclose(r_c, e_c, atol=1e-9)

    @given(freqs, st.integers(min_value=-20, max_value=20))
    def test_shift_identity(self, w, j):
        """Rotating the coefficients advances the sequence by one sample."""
        h = HarmonicReference(x_e=[0.3, -0.1], x_s=[1.0, 0.2],
                              x_c=[-0.4, 0.8], u_e=[0.0], u_s=[0.5],
                              u_c=[-0.2], w=w, N=0)
        r_s, r_c = rotate_coeffs(h.x_s, h.x_c, w)
        h_rot = HarmonicReference(x_e=h.x_e, x_s=r_s, x_c=r_c,
                                  u_e=h.u_e, u_s=h.u_s, u_c=h.u_c, w=w, N=0)
        x_next, _ = eval_harmonic(h, j + 1)
        x_rot, _ = eval_harmonic(h_rot, j)
        np.testing.assert_allclose(x_rot, x_next, atol=1e-9)


class TestEnvelope:
    @given(freqs, st.integers(min_value=0, max_value=200))
    def test_bounds_contain_samples(self, w, j):
        h = HarmonicReference(x_e=[0.3, -0.1], x_s=[1.0, 0.2],
                              x_c=[-0.4, 0.8], u_e=[0.0], u_s=[0.5],
                              u_c=[-0.2], w=w, N=0)
        lo, hi = amplitude_bounds(h.x_e, h.x_s, h.x_c)
        x, _ = eval_harmonic(h, j)
        assert np.all(x >= lo - 1e-12)
        assert np.all(x <= hi + 1e-12)

    def test_bounds_are_tight(self):
        lo, hi = amplitude_bounds([0.0], [3.0], [4.0])
        assert lo[0] == pytest.approx(-5.0)
        assert hi[0] == pytest.approx(5.0)
        # the envelope is attained at the right phase
        phases = np.linspace(0, 2 * np.pi, 100001)
        vals = 3.0 * np.sin(phases) + 4.0 * np.cos(phases)
        assert vals.max() == pytest.approx(5.0, abs=1e-6)


class TestConsistency:
    def test_constructed_harmonic_is_consistent(self, double_integrator):
        model, _ = double_integrator
        rng = np.random.default_rng(5)
        for w in (0.2, 0.7, 1.5):
            h = make_consistent_harmonic(model, rng, w)
            assert check_harmonic_dynamics(model, h)

    def test_simulation_tracks_harmonic(self, double_integrator):
        """Feeding the harmonic input reproduces the harmonic states."""
        model, _ = double_integrator
        h = make_consistent_harmonic(model, np.random.default_rng(6), 0.6)
        x, _ = eval_harmonic(h, 0)
        for j in range(30):
            _, u = eval_harmonic(h, j)
            x = model.A @ x + model.B @ u
            x_expect, _ = eval_harmonic(h, j + 1)
            np.testing.assert_allclose(x, x_expect, atol=1e-8)

    def test_inconsistent_rejected(self, double_integrator):
        model, _ = double_integrator
        h = HarmonicReference(x_e=[1.0, 1.0], x_s=[0.0, 0.0], x_c=[0.0, 0.0],
                              u_e=[0.0], u_s=[0.0], u_c=[0.0], w=0.5)
        assert not check_harmonic_dynamics(model, h)


class TestHarmonicReference:
    def test_json_round_trip(self):
        h = HarmonicReference(x_e=[0.3, -0.1], x_s=[1.0, 0.2], x_c=[-0.4, 0.8],
                              u_e=[0.1], u_s=[0.5], u_c=[-0.2], w=0.33, N=5)
        h2 = HarmonicReference.from_json(h.to_json(), N=5)
        for name in ("x_e", "x_s", "x_c", "u_e", "u_s", "u_c"):
            np.testing.assert_array_equal(getattr(h, name), getattr(h2, name))
        assert h2.w == h.w and h2.N == 5

    def test_rejects_nonpositive_frequency(self):
        with pytest.raises(ValueError):
            HarmonicReference(x_e=[0.0], x_s=[0.0], x_c=[0.0],
                              u_e=[0.0], u_s=[0.0], u_c=[0.0], w=0.0)

    def test_output_coeffs(self, double_integrator):
        model, _ = double_integrator
        h = HarmonicReference(x_e=[0.3, -0.1], x_s=[1.0, 0.2], x_c=[-0.4, 0.8],
                              u_e=[0.1], u_s=[0.5], u_c=[-0.2], w=0.33)
        z_e, z_s, z_c = h.output_coeffs(model)
        np.testing.assert_allclose(z_e, model.C @ h.x_e + model.D @ h.u_e)
        np.testing.assert_allclose(z_s, model.C @ h.x_s + model.D @ h.u_s)


class TestOptimalArtificialReference:
    def test_admissible_target_recovered(self, double_integrator, di_params):
        model, constraints = double_integrator
        # steady states of the double integrator: any position, zero
        # velocity, zero input -- admissible for every position
        ref = Reference(x_r=[0.7, 0.0], u_r=[0.0])
        h, cost = optimal_artificial_reference(model, constraints, di_params,
                                               ref)
        np.testing.assert_allclose(h.x_e, ref.x_r, atol=1e-6)
        np.testing.assert_allclose(h.u_e, ref.u_r, atol=1e-6)
        amp = (np.linalg.norm(h.x_s) + np.linalg.norm(h.x_c)
               + np.linalg.norm(h.u_s) + np.linalg.norm(h.u_c))
        assert amp <= 1e-6
        assert cost == pytest.approx(0.0, abs=1e-6)

    def test_inadmissible_target_projected(self, double_integrator, di_params):
        model, constraints = double_integrator
        # nonzero commanded velocity is not a steady state
        ref = Reference(x_r=[0.0, 0.5], u_r=[0.0])
        h, cost = optimal_artificial_reference(model, constraints, di_params,
                                               ref)
        assert check_harmonic_dynamics(model, h, tol=1e-6)
        assert cost > 1e-3
        # grid oracle over the steady-state family (position p, 0 velocity)
        T_e, S_e = di_params.T_e, di_params.S_e
        best = np.inf
        for p in np.linspace(-2, 2, 4001):
            dx = np.array([p, 0.0]) - ref.x_r
            best = min(best, dx @ T_e @ dx)
        assert cost == pytest.approx(best, rel=1e-3)

    def test_respects_tightened_bounds(self, double_integrator, di_params):
        model, constraints = double_integrator
        # ask for a steady input far outside its box
        ref = Reference(x_r=[0.0, 0.0], u_r=[10.0])
        h, _ = optimal_artificial_reference(model, constraints, di_params, ref)
        z_e, z_s, z_c = h.output_coeffs(model)
        lo, hi = amplitude_bounds(z_e, z_s, z_c)
        assert np.all(lo >= constraints.z_min_tight - 1e-6)
        assert np.all(hi <= constraints.z_max_tight + 1e-6)
