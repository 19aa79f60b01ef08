"""Exception taxonomy shared across the pipeline.

The CLI maps these onto its exit codes: validation/format problems are
data errors (3), training divergence is a numeric error (4), and anything
raised by the OS while reading/writing is I/O (5).
"""


class SpellerError(Exception):
    """Base class for all pipeline errors."""


class SessionValidationError(SpellerError):
    """A session (or epoch set) violates one or more structural invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class FormatError(SpellerError):
    """Container bytes do not conform to the declared format."""


class TruncationError(FormatError):
    """Payload ends before the header-declared byte count."""

    def __init__(self, expected, actual):
        self.expected = expected
        self.actual = actual
        super().__init__(
            f"truncated payload: expected {expected} bytes, got {actual}")


class DimensionError(SpellerError):
    """An array has the wrong shape for the requested operation."""


class DivergenceError(SpellerError):
    """Training produced a non-finite loss."""

    def __init__(self, message, batch_index=None, history=None):
        self.batch_index = batch_index
        self.history = history
        super().__init__(message)
