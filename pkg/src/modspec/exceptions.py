"""Exception types shared across the package."""


class ModspecError(Exception):
    """Base class for every error this package raises on purpose."""


class FormatError(ModspecError):
    """A file does not conform to the expected on-disk layout."""


class ValidationError(ModspecError, ValueError):
    """An in-memory input violates a documented precondition."""


class DivisibilityError(ValidationError):
    """The requested period does not divide the number of tokens."""


class SingularScatterError(ValidationError):
    """The within-class scatter matrix is singular (or nearly so)."""


class FoldError(ValidationError):
    """Cross-validation folds cannot be built for the given labels."""


class SwapPoolError(ValidationError):
    """The pooled number stream cannot supply a replacement slice."""
