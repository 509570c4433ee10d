"""Exception hierarchy shared by the library and the command line."""


class OckmError(Exception):
    """Base class; ``exit_code`` is what the CLI returns for it."""

    exit_code = 1


class ConfigError(OckmError, ValueError):
    exit_code = 2


class FormatError(OckmError, ValueError):
    exit_code = 3


class UnsupportedVersionError(FormatError):
    pass


class NumericError(OckmError, ArithmeticError):
    exit_code = 4
