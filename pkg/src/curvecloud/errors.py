"""Exception types shared across the package."""


class CurveCloudError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(CurveCloudError):
    """Input data violates a documented contract (bad values, bad shapes)."""


class FormatError(CurveCloudError):
    """A file or byte stream does not match the expected on-disk format."""


class MismatchError(CurveCloudError):
    """Two structures that must agree (features/params/config) do not."""


class EmptyScanError(CurveCloudError):
    """A simulated scan produced no surface hits."""
