"""Exception types raised across the package."""


class HptpcError(Exception):
    """Base class for all package errors."""


class NonSquare(HptpcError):
    pass


class NotHermitian(HptpcError):
    pass


class NotPsd(HptpcError):
    pass


class NotIsometry(HptpcError):
    pass


class DimensionMismatch(HptpcError):
    pass


class NotTracePreserving(HptpcError):
    pass


class ConvergenceFailure(HptpcError):
    pass


class InvalidDelta(HptpcError):
    pass


class SingularChannel(HptpcError):
    pass


class DegenerateBranch(HptpcError):
    pass


class InvalidMapFormat(HptpcError):
    """A serialized map failed validation; the message names the invariant."""
