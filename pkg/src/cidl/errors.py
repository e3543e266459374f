"""Exception types shared across the package."""


class CidlError(Exception):
    """Base class for all package errors."""


class ValidationError(CidlError):
    """A value violates a model invariant (negativity, non-finiteness, ...)."""


class DimensionError(CidlError):
    """Array shapes do not agree."""


class ConfigError(CidlError):
    """Configuration text failed strict parsing or validation."""


class TensorFormatError(CidlError):
    """A tensor file is malformed."""


class BadMagicError(TensorFormatError):
    pass


class BadVersionError(TensorFormatError):
    pass


class BadDtypeError(TensorFormatError):
    pass


class TruncatedPayloadError(TensorFormatError):
    pass
