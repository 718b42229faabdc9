"""Exception types raised across the package."""


class NmpError(Exception):
    """Base class; ``kind`` is the short machine-readable reason."""

    kind = "error"


class InvalidArgumentError(NmpError, ValueError):
    kind = "invalid-argument"


class InvalidPhaseError(NmpError, ValueError):
    kind = "invalid-phase"


class DegenerateEnvelopeError(NmpError, ArithmeticError):
    kind = "degenerate-envelope"


class NonUniformGridError(NmpError, ValueError):
    kind = "non-uniform-grid"


class InputFileError(NmpError, OSError):
    kind = "input-file"


class ParseError(NmpError, ValueError):
    kind = "parse-error"
