"""Exception types shared across the package."""


class HarmonicMpcError(Exception):
    """Base class for all package errors."""


class DimensionError(HarmonicMpcError):
    """Matrix or vector dimensions are inconsistent."""


class NotControllable(HarmonicMpcError):
    """The pair (A, B) is not controllable."""


class SolverFailure(HarmonicMpcError):
    """The conic solver did not converge to the requested accuracy."""


class ResidualTooLarge(HarmonicMpcError):
    """Recovered solution violates the problem constraints beyond tolerance."""


class InfeasibleInput(HarmonicMpcError):
    """A solution passed as input does not satisfy the constraints."""


class InitialInfeasible(HarmonicMpcError):
    """The closed loop cannot start: the first solve reports infeasibility."""


class StepInfeasible(HarmonicMpcError):
    """A mid-run solve failed; indicates a solver or tolerance problem."""


class PoleOnGrid(HarmonicMpcError):
    """Frequency response requested at a pole of the transfer function."""


class NoCrossingWarning(UserWarning):
    """The channel gain never crosses the requested bound ratio."""
