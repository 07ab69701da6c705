"""Exception hierarchy.

Numerical failures derive from :class:`NumericalError` so the command line
front end can map them onto a single exit status.
"""


class ConformalSpectraError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(ConformalSpectraError, ValueError):
    pass


class ParseError(ConformalSpectraError, ValueError):
    pass


class TopologyError(ConformalSpectraError, ValueError):
    pass


class NumericalError(ConformalSpectraError, ArithmeticError):
    pass


class DegenerateTriangle(NumericalError):
    pass


class NoBoundary(ConformalSpectraError, ValueError):
    pass


class EmptyBall(ConformalSpectraError, ValueError):
    pass


class BallTooSmall(EmptyBall):
    pass


class NoConvergence(NumericalError):
    def __init__(self, iterations, worst_residual, message=None):
        self.iterations = iterations
        self.worst_residual = worst_residual
        super().__init__(
            message
            or f"eigensolver did not converge after {iterations} iterations "
            f"(worst residual {worst_residual:.3e})"
        )


class DegenerateEigenvalue(NumericalError):
    pass


class StepUnderflow(NumericalError):
    pass


class ClusterTooLarge(NumericalError):
    pass


class LPFailure(NumericalError):
    def __init__(self, message, status=None):
        self.status = status
        super().__init__(message)


class EndpointNotCritical(NumericalError):
    pass


class NormalizationFailure(NumericalError):
    pass


class PairingValidationError(NumericalError):
    pass
