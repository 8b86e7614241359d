"""Exception hierarchy shared by the estimator, oracles and CLI."""


class RLSError(Exception):
    """Base class for every error raised by :mod:`rlsff`."""

    #: Step index at which the error surfaced, filled in by callers that
    #: iterate over data (``None`` when not applicable).
    step = None


class InvalidConfigurationError(RLSError, ValueError):
    """An estimator configuration violates its invariants.

    ``field`` names the offending configuration entry.
    """

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class InvalidInputError(RLSError, ValueError):
    """Input data has the wrong shape, is non-finite, or is too short."""


class NumericalDegeneracyError(RLSError, ArithmeticError):
    """The covariance lost positive definiteness beyond tolerance."""

    def __init__(self, eigenvalue, message=None):
        if message is None:
            message = f"covariance degenerate: smallest eigenvalue {eigenvalue!r}"
        super().__init__(message)
        self.eigenvalue = eigenvalue


class RankDeficiencyError(RLSError, ArithmeticError):
    """A normal-equation matrix is numerically singular."""

    def __init__(self, smallest_singular_value, message=None):
        if message is None:
            message = (
                "normal matrix is rank deficient: smallest singular value "
                f"{smallest_singular_value!r}"
            )
        super().__init__(message)
        self.smallest_singular_value = smallest_singular_value
