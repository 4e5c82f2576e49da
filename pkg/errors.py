"""
MOTIONTOK Errors
Exception hierarchy shared by every subsystem. Each class carries the
process exit code the command line reports for it.
"""


class MotionTokError(Exception):
    """Base error."""

    # Exit codes
    EXIT_OK = 0
    EXIT_FAILURE = 1
    EXIT_CONFIG = 2
    EXIT_DATA = 3
    EXIT_NUMERIC = 4

    exit_code = EXIT_FAILURE

    def __init__(self, message: str):
        self.message = message
        super().__init__(message)


class ConfigError(MotionTokError):
    """Invalid or unknown configuration."""
    exit_code = MotionTokError.EXIT_CONFIG


class DataError(MotionTokError):
    """Invalid input data."""
    exit_code = MotionTokError.EXIT_DATA


class NumericError(MotionTokError):
    """Non-finite values or failed numeric checks."""
    exit_code = MotionTokError.EXIT_NUMERIC


class ShapeError(DataError):
    """Array shapes do not agree."""
    pass


class CoordinateSpaceError(DataError):
    """Operation received a sequence in the wrong coordinate space."""
    pass


class DegenerateProjectionError(DataError):
    """Joint depth is not strictly positive."""
    pass


class FormatError(DataError):
    """Malformed file contents."""
    pass


class CheckpointError(DataError):
    """Checkpoint cannot be read or does not match the model."""
    pass


class EmptyDatasetError(DataError):
    """Operation needs at least one sample."""
    pass


class TokenIndexError(DataError):
    """Token index outside the codebook."""
    pass


class SerializationError(DataError):
    """Token text does not follow the frame/body-part format."""
    pass


class CodebookError(NumericError):
    """Codebook entries are degenerate."""
    pass


class ContextOverflowError(MotionTokError):
    """Prompt does not fit into the model context."""
    pass
