"""Exception types shared across the toolkit."""


class ValidationError(ValueError):
    """Input violates a documented precondition or invariant."""


class FormatError(ValidationError):
    """Malformed tensor file or stack directory."""


class AmbiguousBoundaryError(RuntimeError):
    """Boundary detection could not rank two peaks; carries the score trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class TrainingDivergedError(RuntimeError):
    """Non-finite loss during optimization; carries the loss trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
