"""Exception hierarchy.  Everything raised on bad input derives from
:class:`ReplimapError`; the CLI maps those to exit code 2."""


class ReplimapError(Exception):
    """Base class for input, validation and degenerate-data errors."""

    name = "Error"

    def __str__(self):
        msg = super().__str__()
        return f"{self.name}: {msg}" if msg else self.name


class ParseError(ReplimapError):
    name = "ParseError"


class ValidationError(ReplimapError):
    name = "ValidationError"


class UnknownScene(ValidationError):
    name = "UnknownScene"


class DomainError(ReplimapError, ValueError):
    name = "DomainError"


class ConfigError(ReplimapError):
    """Bad simulator config; ``pointer`` is a JSON pointer to the offending key."""

    name = "ConfigError"

    def __init__(self, pointer: str, message: str):
        self.pointer = pointer
        super().__init__(f"{pointer}: {message}")


class LengthMismatchError(ReplimapError):
    name = "LengthMismatch"


class ZeroVarianceError(ReplimapError):
    name = "ZeroVariance"


class ZeroDeviationError(ReplimapError):
    name = "ZeroDeviation"


class InsufficientDataError(ReplimapError):
    name = "InsufficientData"


class DegenerateError(ReplimapError):
    name = "Degenerate"
