"""Exception hierarchy; each class carries the CLI exit code it maps to."""


class MLGCNError(Exception):
    exit_code = 2


class UsageError(MLGCNError):
    """Bad invocation, stale cache, empty menu and the like."""

    exit_code = 1


class DataError(MLGCNError):
    exit_code = 2


class EmptyGraphError(DataError):
    pass


class IngestionError(DataError):
    pass


class ParameterError(MLGCNError):
    exit_code = 1


class DomainError(MLGCNError):
    exit_code = 2


class NumericalError(MLGCNError):
    exit_code = 3


class StageError(MLGCNError):
    """Wraps a failure inside the model pipeline with the stage name."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 3)
