"""Exception types shared across the package."""


class DataFormatError(ValueError):
    """Malformed or internally inconsistent input data (CSV rows, spacing, duplicates)."""


class UndefinedScoreError(ValueError):
    """A verification score is mathematically undefined for the given sample."""


class TrainingError(RuntimeError):
    """Model training failed (non-finite loss, unusable training slice)."""


class FitError(RuntimeError):
    """A statistical fit failed to produce a usable solution."""
