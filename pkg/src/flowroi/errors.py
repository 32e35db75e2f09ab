"""Exception types shared across the package."""


class FlowRoiError(Exception):
    """Base class for all package errors."""


class SequenceError(FlowRoiError, ValueError):
    """Invalid, empty or inconsistent image sequence."""


class CodecError(FlowRoiError, ValueError):
    """Encoder could not satisfy the request (e.g. infeasible rate)."""


class InfeasibleRateError(CodecError):
    """The byte budget cannot even hold the header and mask segment."""

    def __init__(self, message, minimum_bytes):
        super().__init__(message)
        self.minimum_bytes = minimum_bytes


class CorruptStreamError(CodecError):
    """A .froi container failed validation while decoding."""


class FrameError(FlowRoiError):
    """A pipeline stage failed on a particular frame; the cause is chained."""

    def __init__(self, stage: str, frame: int, cause: Exception):
        super().__init__(f"{stage} failed on frame {frame}: {cause}")
        self.stage = stage
        self.frame = frame
        self.cause = cause
