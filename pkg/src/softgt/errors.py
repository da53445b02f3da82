"""Exception and warning types raised across the package."""


class SoftGTError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(SoftGTError, ValueError):
    """An argument violates an operation's precondition (bad code, grid mismatch, ...)."""


class NiftiFormatError(SoftGTError):
    """The file is not a readable single-file NIfTI-1 volume."""


class UnsupportedDatatypeError(NiftiFormatError):
    def __init__(self, code):
        super().__init__(f"unsupported NIfTI datatype code {code}")
        self.code = code


class ManifestError(SoftGTError):
    """The dataset manifest fails validation."""


class NoOverlapError(SoftGTError):
    """Registration inputs have no nonempty slice to align."""


class UndefinedMetricError(SoftGTError):
    """A metric is undefined for the given inputs (e.g. empty reference mask)."""


class UndefinedTestError(SoftGTError):
    """A statistical test cannot be computed (e.g. all paired differences are zero)."""


class DegenerateInputWarning(UserWarning):
    """Input is degenerate (constant image, empty mask) and a fallback was used."""
