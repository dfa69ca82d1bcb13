"""Exception hierarchy. Each subclass maps to one CLI exit code."""


class EcgError(Exception):
    exit_code = 1


class ShapeError(EcgError, ValueError):
    # a shape mismatch at the CLI is always bad input data
    exit_code = 2


class DataError(EcgError, ValueError):
    exit_code = 2


class CheckpointError(EcgError):
    exit_code = 3


class NumericError(EcgError, ArithmeticError):
    exit_code = 4
