"""Exception types raised across the package."""


class SqueezeCamError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(SqueezeCamError, ValueError):
    """A physical parameter lies outside its allowed domain."""


class DegenerateDerivativeError(SqueezeCamError, ArithmeticError):
    """The derivative used for error propagation vanishes."""


class NonPhysicalEstimateError(SqueezeCamError, ValueError):
    """An inversion produced photon numbers outside ``[0, n_total]``."""


class InsufficientCutoffError(SqueezeCamError, ValueError):
    """A truncated Fock representation leaks more mass than allowed."""


class DegenerateFitError(SqueezeCamError, ValueError):
    """The design of a least-squares fit has no information."""


class FrameFileError(SqueezeCamError, IOError):
    """Frame container could not be decoded."""


class FormatVersionError(FrameFileError):
    """Frame container was written with an unsupported format version."""


class CorruptFrameFileError(FrameFileError):
    """Frame container is truncated or fails its checksum."""


class ConfigMismatchError(SqueezeCamError, ValueError):
    """Inputs that must describe the same experiment disagree."""
