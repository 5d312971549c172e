"""Exception types shared across the package."""


class DivergenceError(ValueError):
    """A series that was asked for does not converge.

    ``partial_sums`` carries a few (index, partial sum) pairs for diagnostics.
    """

    def __init__(self, message, partial_sums=()):
        super().__init__(message)
        self.partial_sums = tuple(partial_sums)


class TailCertificationError(ArithmeticError):
    """A truncated series cannot be given a certified remainder bound."""


class SizeGuardError(ValueError):
    """An exhaustive enumeration would be too large to run."""


class OutOfRangeError(IndexError):
    """A tabulated weight was queried beyond its table."""
