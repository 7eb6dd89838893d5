from typing import List, Optional


class NibbleError(Exception):
    """Base class for every error raised by nibble_coloring."""


class PreconditionError(NibbleError, ValueError):
    """An argument or a documented precondition was violated."""


class SizeLimitError(NibbleError, ValueError):
    """An exact enumeration would exceed its configured size cap."""


class InfeasibleError(NibbleError):
    """The requested object cannot exist under the given constraints."""


class StructureError(NibbleError):
    """A witness structure does not have the properties it claims."""

    def __init__(self, message: str, failures: Optional[List[str]] = None):
        super().__init__(message)
        self.failures = failures or []


class RetriesExhaustedError(NibbleError):
    """A resampling loop ran out of retries. `report` holds the surviving bad events."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class FinisherError(NibbleError):
    """The finisher could not complete the coloring. `uncolored` lists the remaining vertices."""

    def __init__(self, message: str, uncolored: Optional[List[int]] = None):
        super().__init__(message)
        self.uncolored = uncolored or []


class PartFailureError(NibbleError):
    """A sub-pipeline failed while coloring one part of a partition."""

    def __init__(self, part: int, cause: Exception):
        super().__init__(f"Coloring of part {part} failed: {cause}")
        self.part = part
        self.cause = cause


class InvariantError(NibbleError):
    """A result failed its own postcondition, such as a proper coloring check."""
