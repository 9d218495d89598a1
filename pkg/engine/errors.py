# engine/errors.py


class HFunctionError(Exception):
    """Base class for every error raised by the library."""


class InputError(HFunctionError, ValueError):
    """A domain or precondition violation in the caller's arguments or data."""


class UsageError(HFunctionError):
    """Command-line misuse: unknown method, malformed flag, missing option."""


class CoarseGridWarning(UserWarning):
    """No θ-grid point satisfied h > α; the inversion fell back to a degenerate interval."""


class MonotonicityWarning(UserWarning):
    """A limits table is not monotone where a shortcut needs it; a slower scan was used."""
