from typing import Optional


class VibrometryError(Exception):
    """Base class for pipeline errors."""


class EventFormatError(VibrometryError, ValueError):
    """Malformed event file content. `line` is the 1-based file line (CSV) or record number (binary)."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class EventValidationError(VibrometryError, ValueError):
    """An event stream broke an invariant. `record` is the 1-based event index."""

    def __init__(self, message: str, record: Optional[int] = None):
        self.record = record
        super().__init__(f"record {record}: {message}" if record is not None else message)


class OutOfFieldError(VibrometryError, ValueError):
    """Speckle displacement left the rendered field margin."""


class InsufficientDataError(VibrometryError):
    """Not enough events, bins or frames to produce a signal."""


class UndefinedMetricError(VibrometryError):
    """Metric undefined on the given input, e.g. all frames silent."""


class WavFormatError(VibrometryError, ValueError):
    """Malformed or unsupported WAV file."""
