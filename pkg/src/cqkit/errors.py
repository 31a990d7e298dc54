"""Exception types shared across the toolkit."""


class CqkitError(Exception):
    """Base class for all toolkit errors."""


class ModelError(CqkitError):
    """A query, dependency, or instance violates a structural invariant."""


class ParseError(CqkitError):
    """Syntax or consistency error in a `.dl` program."""

    def __init__(self, message, line=None, col=None):
        self.line = line
        self.col = col
        if line is not None:
            message = f"{line}:{col if col is not None else '?'}: {message}"
        super().__init__(message)


class UnsupportedClassError(CqkitError):
    """The dependency set is outside the class an operation supports."""


class UndecidableClassError(UnsupportedClassError):
    """The requested question is undecidable for this dependency class."""


class ChaseBudgetRequired(CqkitError):
    """Chase refused to run: termination not certified and no budget given."""


class DependencyViolationError(CqkitError):
    """A database handed to an operation does not satisfy its dependencies."""

    def __init__(self, message, violations=()):
        self.violations = tuple(violations)
        super().__init__(message)
