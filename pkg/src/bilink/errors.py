"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Bad input data or configuration, detected before any training work."""


class TrainingError(RuntimeError):
    """Failure during an optimization run (e.g. non-finite loss)."""
