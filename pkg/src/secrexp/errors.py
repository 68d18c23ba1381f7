"""Exception hierarchy shared by the solvers, the type machinery and the CLI."""


class SecrexpError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(SecrexpError, ValueError):
    """Malformed input: bad probabilities, shapes, or distortion entries."""


class InfeasibleError(SecrexpError, ValueError):
    """A distortion level or rate is below what the problem allows."""


class GuardExceeded(SecrexpError):
    """An enumeration would exceed the configured size limit.

    ``size`` is the estimated number of objects, ``limit`` the guard.
    """

    def __init__(self, what, size, limit):
        self.what = what
        self.size = size
        self.limit = limit
        super().__init__(
            f"{what}: would enumerate {size} objects (limit {limit}); "
            "reduce n or the alphabet sizes"
        )


class EmptyFeasibleSetError(SecrexpError):
    """No integer joint type meets the constraint at this blocklength."""


class PersistentEventError(SecrexpError):
    """A random codebook kept hitting the covering failure event.

    The offending :class:`~secrexp.typelab.KeyedCodebooks` is attached as
    ``books`` so callers can inspect the flags.
    """

    def __init__(self, message, books=None):
        super().__init__(message)
        self.books = books
