class ConfigError(ValueError):
    """
    Raised when a run config file contains an unknown key,
    a malformed line or a value that cannot be parsed
    """


class WorldParamsError(ValueError):
    """
    World generation parameters outside their allowed ranges
    """


class InvalidActionError(ValueError):
    """
    Raised for non-finite control actions or actions outside
    the actuation envelope where one is required
    """


class ShapeMismatchError(ValueError):
    """
    Tensor shapes of two operands do not agree
    """


class SimulationAbort(RuntimeError):
    """
    Raised when the simulated robot ends up intersecting a wall.
    This points at a bug in the planner or the simulator itself.
    """


class SequenceExistsError(FileExistsError):
    """
    The sequence directory already exists and overwriting
    has not been forced
    """


class DatasetFormatError(IOError):
    """
    A dataset file could not be parsed. The offending path and
    the line number (text files) or byte offset (binary files)
    are available as attributes.
    """

    def __init__(self, message, path=None, line=None, offset=None):
        location = ''
        if line is not None:
            location = f', line {line}'
        elif offset is not None:
            location = f', byte {offset}'
        super().__init__(f"{path}{location}: {message}")
        self.path = path
        self.line = line
        self.offset = offset


class CheckpointFormatError(IOError):
    """
    Checkpoint file is truncated or carries a wrong magic/version
    """


class EmptyClipIndexError(ValueError):
    """
    No clip fits in the given sequences
    """


class MetricsError(ValueError):
    """
    Raised on misaligned or empty metric inputs, or frames
    smaller than the SSIM window
    """
