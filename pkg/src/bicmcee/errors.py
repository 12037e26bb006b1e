"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration value or inconsistent sizes."""


class ChannelFileError(ValueError):
    """Malformed fade-vector file. The message names the offending line."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DegenerateDrawError(ArithmeticError):
    """A Monte Carlo draw hit a numerically degenerate point and must be redrawn."""


class PerfectCSILimit(ArithmeticError):
    """Raised when rho is so close to 1 that the imperfect-CSI formulas break down."""
