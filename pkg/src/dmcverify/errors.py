"""Exception hierarchy shared across the toolchain."""


class DmcError(Exception):
    """Base class for all errors raised by this package."""


class DmcSyntaxError(DmcError):
    def __init__(self, message, line=None, col=None, expected=None):
        self.line = line
        self.col = col
        self.expected = tuple(sorted(expected)) if expected else ()
        loc = f" at line {line}, col {col}" if line is not None else ""
        exp = f" (expected one of: {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{message}{loc}{exp}")


class SemanticError(DmcError):
    def __init__(self, message, line=None, col=None):
        self.line = line
        self.col = col
        loc = f" at line {line}, col {col}" if line is not None else ""
        super().__init__(f"{message}{loc}")


class ValidationFailure(DmcError):
    """Raised by validate() carrying every collected SemanticError."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(str(e) for e in self.errors))


class MacroRecursionError(DmcError):
    pass


class MacroArityError(DmcError):
    pass


class OverlapError(DmcError):
    """Tensor product of states with a shared qubit."""


class UnknownQubitError(DmcError):
    pass


class NormalizationError(DmcError):
    pass


class IllegalStepError(DmcError):
    pass


class StateBudgetExceededError(DmcError):
    def __init__(self, limit):
        self.limit = limit
        super().__init__(f"reachable state count exceeded the budget of {limit}")


class DomainTooLargeError(DmcError):
    pass


class UntranslatableAtomError(DmcError):
    pass
