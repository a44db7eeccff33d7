"""Exception hierarchy. Everything the CLI maps to exit code 2 derives from IrdropError."""


class IrdropError(Exception):
    pass


class NetlistError(IrdropError):
    """Malformed netlist text. Carries the 1-based line number and the line."""

    def __init__(self, message, lineno=None, line=None):
        self.lineno = lineno
        self.line = line
        if lineno is not None:
            message = f"line {lineno}: {message}: {line!r}"
        super().__init__(message)


class GraphError(IrdropError):
    pass


class SingularSystemError(IrdropError):
    pass


class ConvergenceError(IrdropError):
    def __init__(self, message, residual):
        self.residual = residual
        super().__init__(message)


class ShapeError(IrdropError, ValueError):
    pass


class FormatError(IrdropError):
    """Bad binary file (magic, version, truncation, tensor shape)."""


class ConfigError(IrdropError, ValueError):
    pass
