"""
Exception hierarchy for the HCRNN toolkit.

Every error carries the process exit status the command line reports for it:
2 for usage/configuration problems, 3 for data problems, 4 for numeric failures.
"""


class HcrnnError(Exception):
    """Base class for all toolkit errors"""

    exit_code = 1


class UsageError(HcrnnError):
    """An API or command was called in a way it does not support"""

    exit_code = 2


class ConfigurationError(HcrnnError):
    """A configuration value is missing, unknown or inconsistent"""

    exit_code = 2


class DimensionError(HcrnnError):
    """Tensor shapes do not fit the operation"""

    exit_code = 2


class ValidationError(HcrnnError):
    """Input data violates a domain constraint (angles, joint counts, topology)"""

    exit_code = 3


class ManifestParseError(HcrnnError):
    """A manifest record could not be parsed"""

    exit_code = 3

    def __init__(self, path, line_number, reason):
        self.path = path
        self.line_number = line_number
        self.reason = reason
        super().__init__(f"{path}:{line_number}: {reason}")


class CropError(HcrnnError):
    """The hand cube does not project onto the image"""

    exit_code = 3


class CheckpointFormatError(HcrnnError):
    """A checkpoint file is truncated or has an invalid header field"""

    exit_code = 3

    def __init__(self, field, reason):
        self.field = field
        super().__init__(f"invalid checkpoint field '{field}': {reason}")


class NonFiniteError(HcrnnError):
    """An operation produced NaN or Inf"""

    exit_code = 4

    def __init__(self, source, detail=""):
        self.source = source
        message = f"non-finite values produced by {source}"
        if detail:
            message += f" ({detail})"
        super().__init__(message)


def exit_code_for(error):
    """Map an exception onto the command-line exit status"""
    if isinstance(error, HcrnnError):
        return error.exit_code
    if isinstance(error, (FileNotFoundError, PermissionError)):
        return 3
    return 1
