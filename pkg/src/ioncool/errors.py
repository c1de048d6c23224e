"""Exception types shared across the package."""


class IoncoolError(Exception):
    """Base class for all package errors."""


class InputError(IoncoolError, ValueError):
    """Rejected input: non-finite, out of range or inconsistent parameters."""


class TruncationError(IoncoolError):
    """The Fock basis is too small for the requested physics."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class IntegrationError(IoncoolError):
    """The ODE integrator failed; ``last_time`` is the last successful time."""

    def __init__(self, message, last_time=None):
        super().__init__(message)
        self.last_time = last_time


class ReducibleGeneratorError(IoncoolError):
    """Rate generator has more than one closed class, so no unique steady state."""

    def __init__(self, message, blocks=()):
        super().__init__(message)
        self.blocks = list(blocks)


class StepError(IoncoolError):
    """QMC time step too coarse for the non-Hermitian decay."""


class TrajectoryError(IoncoolError):
    """A QMC trajectory failed inside an ensemble run."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class ConfigError(IoncoolError):
    """Invalid run configuration; ``path`` names the offending field."""

    def __init__(self, message, path=None, line=None):
        super().__init__(message)
        self.path = path
        self.line = line
