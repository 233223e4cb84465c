"""Exception types shared across the package.

The CLI maps these onto documented exit codes: usage errors exit 1,
ParameterError exits 2, ResourceError exits 3.
"""


class ParameterError(ValueError):
    """A model or distribution parameter is outside its valid range."""


class ResourceError(RuntimeError):
    """A configured size/tractability bound was exceeded."""


class TruncationError(ResourceError):
    """Tree sampling hit the node cap.

    Carries the partially explored tree so callers can inspect how far
    the exploration got before the cap.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
