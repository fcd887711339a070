"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class KdspError(Exception):
    exit_code = 5
    reason = "error"


class ConfigError(KdspError, ValueError):
    """A parameter is outside the range its operation accepts."""

    exit_code = 2
    reason = "config"


class ParseError(KdspError, ValueError):
    exit_code = 3
    reason = "parse"


class CapExceeded(KdspError):
    """A dimension or qubit count is above the configured desk-scale cap."""

    exit_code = 4
    reason = "cap"


class NumericalError(KdspError, ArithmeticError):
    """Rank deficiency, empty search sets, failed searches."""

    exit_code = 5
    reason = "numerical"
