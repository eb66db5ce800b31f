"""Exception types raised across the package.

Each class carries the CLI exit code it maps to (2 usage/IO, 3 numerical,
4 data format).
"""


class StreamEtmError(Exception):
    exit_code = 2


class EmptyVocabulary(StreamEtmError):
    exit_code = 4


class FormatError(StreamEtmError):
    exit_code = 4

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ZeroVector(StreamEtmError):
    exit_code = 3


class DivergenceError(StreamEtmError):
    exit_code = 3

    def __init__(self, epoch, message="non-finite loss"):
        super().__init__(f"{message} at epoch {epoch}")
        self.epoch = epoch


class NumericalError(StreamEtmError):
    exit_code = 3


class DimensionError(StreamEtmError, ValueError):
    exit_code = 4


class InvalidConfig(StreamEtmError, ValueError):
    exit_code = 2


class PoolError(StreamEtmError):
    exit_code = 4

    def __init__(self, topic):
        super().__init__(f"empty document pool for active topic {topic!r}")
        self.topic = topic


class ScheduleError(StreamEtmError):
    exit_code = 4

    def __init__(self, row, message):
        super().__init__(f"row {row}: {message}")
        self.row = row


class DegenerateEmbedding(StreamEtmError):
    exit_code = 3


class LabelError(StreamEtmError):
    exit_code = 4
