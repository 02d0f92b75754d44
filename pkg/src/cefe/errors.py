"""Exception hierarchy.

Two families matter to callers: ``ValidationError`` subclasses signal bad
input or configuration (the CLI maps them to exit code 3), everything else
deriving from ``CefeError`` is a runtime failure (exit code 1).
"""


class CefeError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(CefeError, ValueError):
    """Input or configuration failed validation."""


class EmptyInput(ValidationError):
    pass


class ParseError(ValidationError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = f"line {line}" if line is not None else "input"
        if path is not None:
            where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {message}")


class SchemaError(ValidationError):
    pass


class DomainError(ValidationError):
    """A numeric argument lies outside its mathematical domain."""


class ConfigError(ValidationError):
    pass


class ShapeError(ValidationError):
    pass


class MissingClass(ValidationError):
    pass


class EmptyPool(ValidationError):
    pass


class EmptyAggregation(ValidationError):
    pass


class AlignmentError(ValidationError):
    pass


class InjectionInfeasible(CefeError):
    """No corruption operator of the requested category applies to the text."""


class TranslationError(CefeError):
    def __init__(self, message, provider=None, diagnostics=None):
        self.provider = provider
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class IoError(CefeError, OSError):
    pass
