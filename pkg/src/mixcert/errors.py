"""Exception types shared across the package."""


class ModelFormatError(ValueError):
    """Raised when a model file cannot be parsed or has an unknown version."""


class DatasetFormatError(ValueError):
    """Raised when a dataset file is malformed; carries the offending line."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class TrainingDivergenceError(RuntimeError):
    """Raised when the training loss becomes non-finite."""

    def __init__(self, epoch: int):
        super().__init__(f"training loss became non-finite at epoch {epoch}")
        self.epoch = epoch


class NotCertifiableError(ValueError):
    """Raised when the mixing weight is too small for any non-trivial certificate."""


class DegenerateProbabilityError(ValueError):
    """Raised when smoothed probabilities are exactly 0 or 1 where the
    certified-radius formula needs an interior value."""


class GridTooLargeError(ValueError):
    """Raised when a verification grid would exceed the point budget."""


class UnsupportedDimensionError(ValueError):
    """Raised when an operation only defined in low dimension gets a larger input."""
