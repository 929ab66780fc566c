"""Exception hierarchy shared across the package."""


class MomentccError(Exception):
    pass


class DimensionError(MomentccError):
    """Operands live on different qubit/mode counts or bases."""


class ContractViolation(MomentccError):
    """An operation was called outside its documented precondition."""


class ResourceError(MomentccError):
    """A configured size cap (dense matrix, sector dimension) was exceeded."""


class ParseError(MomentccError):
    """Malformed input file; carries a 1-based line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ModelError(MomentccError):
    """Inconsistent model parameters (electron count, bath sizes, ...)."""


class ConvergenceError(MomentccError):
    """Iterative solver failed; carries the residual history."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []
