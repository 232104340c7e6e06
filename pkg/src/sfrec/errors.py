"""Exception types shared across the package."""


class SfrecError(Exception):
    """Base class for all package-specific errors."""


class ParameterError(SfrecError, ValueError):
    """An argument violates a documented precondition."""


class SingularSourceError(ParameterError):
    """A point source coincides with a grid node."""


class SamplingError(SfrecError, RuntimeError):
    """Observation sampling could not satisfy its constraints."""


class CoverageError(SfrecError, RuntimeError):
    """A grid node is covered by no subdomain during reassembly."""


class IngestionError(SfrecError, ValueError):
    """A dataset file is malformed or inconsistent with its header."""


class DivergenceError(SfrecError, RuntimeError):
    """The iterative solver diverged; partial state is attached.

    Attributes
    ----------
    state : object
        Solver state at the point divergence was detected.
    diagnostics : list
        Per-iteration statistics collected before the failure.
    """

    def __init__(self, message, state=None, diagnostics=None):
        super().__init__(message)
        self.state = state
        self.diagnostics = diagnostics if diagnostics is not None else []
