"""Exception hierarchy shared by all modules."""


class QfaError(Exception):
    """Base class for errors raised by qfadiag."""


class InputError(QfaError, ValueError):
    """Rejected input: out-of-range argument, malformed data."""


class MissingColumnError(InputError):
    pass


class ValueParseError(InputError):
    """A CSV cell could not be parsed; ``row`` is the 1-based file line."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class EmptyFileError(InputError):
    pass


class DegenerateError(QfaError, ValueError):
    """Input is valid in form but carries no usable variation (e.g. constant)."""


class ContractError(QfaError, ValueError):
    """Objects handed to an operation are in the wrong state or misaligned."""


class SolverError(QfaError, RuntimeError):
    """The quantile regression solver stopped without certifying optimality.

    Attributes
    ----------
    incumbent : object
        Best available solution when the solver stopped.
    cell : tuple or None
        ``(k, l)`` grid position when raised from a periodogram computation.
    """

    def __init__(self, message, incumbent=None, cell=None):
        super().__init__(message)
        self.incumbent = incumbent
        self.cell = cell


class NonStationaryError(InputError):
    pass
