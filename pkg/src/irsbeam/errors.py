"""Exception types shared across the package."""


class IrsBeamError(Exception):
    """Base class for all package errors."""


class ConfigError(IrsBeamError, ValueError):
    """Invalid configuration or scenario data.

    ``path`` is a dotted location (e.g. ``"system.sinr_targets"``) when the
    error comes from a structured document.
    """

    def __init__(self, message, path=None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class SolverFailure(IrsBeamError):
    """The SDP solver stopped without a usable answer."""

    def __init__(self, message, solution=None):
        self.solution = solution
        super().__init__(message)


class InfeasibleTargets(IrsBeamError):
    """The SINR targets cannot be met, even by the relaxation."""

    def __init__(self, message, solution=None):
        self.solution = solution
        super().__init__(message)


class RandomizationFailed(IrsBeamError):
    """No rank-one point could be recovered from a non-tight relaxation.

    ``sdr_bound`` carries the relaxation objective so callers can still
    report it.
    """

    def __init__(self, message, sdr_bound=None):
        self.sdr_bound = sdr_bound
        super().__init__(message)
