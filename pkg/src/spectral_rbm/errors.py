"""Exception types shared across the package.

Everything raised for a bad input derives from ValidationError so callers
(and the CLI exit-code mapping) can catch one family. ConvergenceError is
the odd one out: the inputs were fine, the iteration just ran out of road.
"""


class ValidationError(ValueError):
    """An input violates a documented precondition or invariant."""


class SizeLimitError(ValidationError):
    """An exact-enumeration routine was asked to enumerate too many states."""


class DegenerateInputError(ValidationError):
    """Structurally valid input with no defined result, e.g. an all-zero row."""


class FormatError(ValidationError):
    """A serialized model, sidecar, or dataset file is malformed."""


class MissingColumnError(FormatError):
    """A required CSV column is absent."""


class CsvParseError(FormatError):
    """A CSV cell failed to parse.

    Carries the 1-based file line (header is line 1) and the column name
    when known, so the message can point at the offending cell.
    """

    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column


class ConvergenceError(RuntimeError):
    """An iterative computation did not converge within its budget.

    ``last_iterate`` holds the final iterate so callers can inspect how
    far the computation got.
    """

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate
