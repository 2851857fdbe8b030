"""Exception hierarchy shared by every stage of the pipeline.

Each class carries the CLI exit code it maps to.
"""


class GapspinError(Exception):
    exit_code = 3


class ParameterError(GapspinError, ValueError):
    """Invalid argument (bad radii, nonpositive mass, dimension mismatch...)."""

    exit_code = 2


class ConfigError(ParameterError):
    exit_code = 2


class MeshParseError(GapspinError):
    exit_code = 2

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MeshValidationError(GapspinError):
    exit_code = 2


class AssemblyError(GapspinError):
    exit_code = 3


class ModelError(GapspinError):
    exit_code = 3


class SolverError(GapspinError):
    exit_code = 3

    def __init__(self, message, residuals=None):
        self.residuals = residuals
        super().__init__(message)


class BlowUpError(GapspinError):
    exit_code = 3

    def __init__(self, message, t=None, state_norm=None):
        self.t = t
        self.state_norm = state_norm
        super().__init__(message)


class IntegrityError(GapspinError):
    """Checksum or format mismatch in a serialized container."""

    exit_code = 2


class InvariantError(GapspinError):
    exit_code = 4
