"""Exception types shared across the toolkit."""


class PipelineError(Exception):
    """Base class for recoverable pipeline failures."""


class IngestError(PipelineError):
    """A frame sequence could not be loaded (missing, undecodable, inconsistent)."""


class DataError(PipelineError):
    """Input data violates a numeric precondition (non-finite values, bad range)."""


class DivergenceError(PipelineError):
    """An iterative solver produced non-finite values."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration
