import json

import numpy as np
import pytest
import scipy.linalg

from harmonicmpc import (BallPlateParams, ConstraintSet, LtiModel,
                         ball_plate_model, controllability_index,
                         discretize_zoh, evaluate_output,
                         linearize_ball_plate, model_from_json, model_to_json)
from harmonicmpc.errors import DimensionError, NotControllable
from harmonicmpc.model import expm_series

from oracles import ctrb_index_oracle, zoh_oracle


class TestExpm:
    def test_zero_matrix(self):
        assert np.allclose(expm_series(np.zeros((3, 3))), np.eye(3))

    def test_diagonal(self):
        d = np.array([0.3, -1.2, 2.0])
        out = expm_series(np.diag(d))
        assert np.allclose(out, np.diag(np.exp(d)), atol=1e-12)

    def test_against_scipy_random(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            n = rng.integers(1, 7)
            M = rng.normal(scale=2.0, size=(n, n))
            assert np.allclose(expm_series(M), scipy.linalg.expm(M),
                               atol=1e-9, rtol=1e-9)

    def test_inverse_identity(self):
        rng = np.random.default_rng(11)
        M = rng.normal(size=(4, 4))
        assert np.allclose(expm_series(M) @ expm_series(-M), np.eye(4),
                           atol=1e-9)


class TestDiscretize:
    def test_double_integrator_closed_form(self):
        T = 0.2
        A_c = np.array([[0.0, 1.0], [0.0, 0.0]])
        B_c = np.array([[0.0], [1.0]])
        Ad, Bd = discretize_zoh(A_c, B_c, T)
        assert np.allclose(Ad, [[1.0, T], [0.0, 1.0]], atol=1e-12)
        assert np.allclose(Bd, [[T * T / 2], [T]], atol=1e-12)

    def test_against_fine_step_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            n = int(rng.integers(1, 6))
            m = int(rng.integers(1, 4))
            A_c = rng.normal(size=(n, n))
            B_c = rng.normal(size=(n, m))
            Ad, Bd = discretize_zoh(A_c, B_c, 0.2)
            Ao, Bo = zoh_oracle(A_c, B_c, 0.2)
            assert np.allclose(Ad, Ao, atol=1e-9)
            assert np.allclose(Bd, Bo, atol=1e-9)

    def test_singular_a(self):
        # nilpotent continuous dynamics: the augmented-matrix route must
        # not rely on invertibility of A
        A_c = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]])
        B_c = np.array([[0.0], [0.0], [1.0]])
        Ad, Bd = discretize_zoh(A_c, B_c, 0.5)
        Ao, Bo = zoh_oracle(A_c, B_c, 0.5)
        assert np.allclose(Ad, Ao, atol=1e-10)
        assert np.allclose(Bd, Bo, atol=1e-10)


class TestControllability:
    def test_double_integrator(self, double_integrator):
        model, _ = double_integrator
        assert controllability_index(model) == 2

    def test_benchmark_index(self, plant):
        model, _ = plant
        assert controllability_index(model) == 4

    def test_random_against_rank_oracle(self):
        rng = np.random.default_rng(19)
        hits = 0
        while hits < 20:
            n = int(rng.integers(2, 6))
            A = rng.normal(size=(n, n))
            B = rng.normal(size=(n, 1))
            expect = ctrb_index_oracle(A, B)
            if expect is None:
                continue
            model = LtiModel(A=A, B=B, C=np.eye(n), D=np.zeros((n, 1)))
            assert controllability_index(model) == expect
            hits += 1

    def test_uncontrollable_rejected(self):
        with pytest.raises(NotControllable):
            LtiModel(A=np.eye(2), B=[[1.0], [0.0]],
                     C=np.eye(2), D=np.zeros((2, 1)))


class TestBallPlate:
    def test_gravity_gain(self):
        p = BallPlateParams()
        A_c, B_c = linearize_ball_plate(p)
        kappa = p.mass / (p.mass + p.inertia / p.radius ** 2) * p.gravity
        assert kappa == pytest.approx(0.05 / 0.07 * 9.81)
        assert A_c[1, 2] == pytest.approx(kappa)
        assert A_c[5, 6] == pytest.approx(kappa)
        # double-integrator chains elsewhere
        assert A_c[0, 1] == 1.0 and A_c[2, 3] == 1.0

    def test_discrete_model_values(self, plant):
        model, constraints = plant
        assert model.n == 8 and model.m == 2 and model.n_z == 6
        assert model.A[0, 1] == pytest.approx(0.2)
        assert model.A[1, 2] == pytest.approx(1.4014, abs=5e-5)
        np.testing.assert_allclose(constraints.z_max,
                                   [0.5, np.pi / 4, 0.5, np.pi / 4, 0.4, 0.4])
        np.testing.assert_allclose(constraints.z_min, -constraints.z_max)

    def test_constrained_outputs(self, plant):
        model, _ = plant
        x = np.arange(1.0, 9.0)
        u = np.array([0.5, -0.5])
        z = evaluate_output(model, x, u)
        # velocities and angles of both axes, then the raw inputs
        np.testing.assert_allclose(z, [x[1], x[2], x[5], x[6], u[0], u[1]])

    def test_input_decoupling(self, plant):
        model, _ = plant
        # each input only drives its own axis
        assert np.allclose(model.B[:4, 1], 0.0)
        assert np.allclose(model.B[4:, 0], 0.0)


class TestSerialization:
    def test_round_trip(self, plant):
        model, constraints = plant
        text = model_to_json(model, constraints)
        model2, constraints2 = model_from_json(text)
        for name in ("A", "B", "C", "D"):
            np.testing.assert_array_equal(getattr(model, name),
                                          getattr(model2, name))
        np.testing.assert_array_equal(constraints.z_min, constraints2.z_min)
        np.testing.assert_array_equal(constraints.eps, constraints2.eps)

    def test_model_only(self, double_integrator):
        model, _ = double_integrator
        model2, constraints2 = model_from_json(model_to_json(model))
        assert constraints2 is None
        np.testing.assert_array_equal(model.A, model2.A)

    def test_plain_json(self, double_integrator):
        model, constraints = double_integrator
        doc = json.loads(model_to_json(model, constraints))
        assert set(doc) == {"A", "B", "C", "D", "z_min", "z_max", "eps"}


class TestConstraintSet:
    def test_eps_broadcast(self):
        cs = ConstraintSet(z_min=[-1, -1, -1], z_max=[1, 1, 1], eps=1e-2)
        np.testing.assert_allclose(cs.eps, [1e-2] * 3)
        np.testing.assert_allclose(cs.z_min_tight, [-0.99] * 3)
        np.testing.assert_allclose(cs.z_max_tight, [0.99] * 3)

    def test_rejects_inverted_bounds(self):
        with pytest.raises(ValueError):
            ConstraintSet(z_min=[1.0], z_max=[-1.0], eps=1e-3)

    def test_rejects_collapsing_eps(self):
        with pytest.raises(ValueError, match="collapse"):
            ConstraintSet(z_min=[-1e-3], z_max=[1e-3], eps=1e-2)

    def test_rejects_nonpositive_eps(self):
        with pytest.raises(ValueError):
            ConstraintSet(z_min=[-1.0], z_max=[1.0], eps=0.0)


class TestLtiModelValidation:
    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            LtiModel(A=np.eye(2), B=np.ones((3, 1)),
                     C=np.eye(2), D=np.zeros((2, 1)))

    def test_nonsquare_a(self):
        with pytest.raises(DimensionError):
            LtiModel(A=np.ones((2, 3)), B=np.ones((2, 1)),
                     C=np.eye(2), D=np.zeros((2, 1)))
