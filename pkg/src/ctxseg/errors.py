"""Exception types shared across the package."""


class CtxsegError(Exception):
    """Base class for all ctxseg errors."""


class ParseError(CtxsegError):
    """A knowledge-base file is syntactically malformed."""


class ValidationError(CtxsegError):
    """A knowledge base violates a structural invariant."""


class UnknownClassError(ValidationError):
    """A class name is not declared in the knowledge base."""


class FormatError(CtxsegError):
    """An image file is not in the expected PGM format."""


class InvalidParameterError(CtxsegError):
    """A numeric parameter is outside its documented range."""


class DimensionMismatchError(CtxsegError):
    """Two rasters that must share a shape do not."""


class NotAdjacentError(CtxsegError):
    """A merge was requested for regions that share no boundary."""


class DeadRegionError(CtxsegError):
    """A region id refers to a region absorbed by an earlier merge."""


class LengthMismatchError(CtxsegError):
    """Two membership vectors have different lengths."""


class EmptyContextError(CtxsegError):
    """A region has no information-bearing neighbor this sweep."""


class InvalidTargetSetError(CtxsegError):
    """The set of classes to reinforce is empty or covers every class."""


class InvalidSpecError(CtxsegError):
    """A phantom specification is inconsistent with its layout."""
