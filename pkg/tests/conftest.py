import numpy as np
import pytest

from harmonicmpc import (ConstraintSet, ControllerParams, LtiModel,
                         benchmark_model, benchmark_params,
                         benchmark_reference)


# One PASS/FAIL line per acceptance criterion, echoed after the run so
# the verdicts survive output capture.
acceptance_lines = []


def pytest_terminal_summary(terminalreporter):
    if acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(acceptance_lines):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def plant():
    """Ball-and-plate benchmark plant and constraints."""
    return benchmark_model()


@pytest.fixture(scope="session")
def bench_ref():
    return benchmark_reference()


@pytest.fixture
def double_integrator():
    """Sampled double integrator with velocity and input bounds."""
    T = 0.25
    model = LtiModel(A=[[1.0, T], [0.0, 1.0]], B=[[T * T / 2], [T]],
                     C=[[0.0, 1.0], [0.0, 0.0]], D=[[0.0], [1.0]])
    constraints = ConstraintSet(z_min=[-1.0, -2.0], z_max=[1.0, 2.0],
                                eps=1e-3)
    return model, constraints


def small_params(N=4, w=0.5, n=2, m=1):
    return ControllerParams(
        N=N,
        Q=np.eye(n), R=np.eye(m),
        T_e=10.0 * np.eye(n), S_e=np.eye(m),
        T_h=10.0 * np.eye(n), S_h=np.eye(m),
        T_a=10.0 * np.eye(n), S_a=np.eye(m),
        w=w,
    )


@pytest.fixture
def di_params():
    return small_params(N=6)
