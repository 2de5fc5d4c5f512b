"""Exception types raised across the package."""


class InvalidInputError(ValueError):
    """Arguments violate a documented precondition."""


class NumericalDegeneracyError(ArithmeticError):
    """A determinant came out negative beyond rounding tolerance."""


class BudgetExceededError(RuntimeError):
    """An exhaustive computation would exceed its tuple budget."""


class ConfigError(ValueError):
    """An experiment or estimator configuration is inconsistent."""


class ParseError(ValueError):
    """Malformed input file. ``lineno`` is 1-based and counts the header."""

    def __init__(self, message, lineno=None, path=None):
        self.lineno = lineno
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if lineno is not None:
            where += f"line {lineno}: "
        elif where:
            where += " "
        super().__init__(where + message)
