"""Exception hierarchy shared by all spectracube modules."""


class SpectraCubeError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(SpectraCubeError, ValueError):
    """An input violates a type invariant (range, shape, finiteness)."""


class DimensionMismatchError(ValidationError):
    pass


class GridMismatchError(ValidationError):
    pass


class MissingFileError(SpectraCubeError, FileNotFoundError):
    def __init__(self, path, wavelength=None):
        self.path = path
        self.wavelength = wavelength
        msg = f"missing file {path}"
        if wavelength is not None:
            msg += f" (channel {wavelength:g} nm)"
        super().__init__(msg)


class UnsupportedBitDepthError(SpectraCubeError, ValueError):
    pass


class PFMFormatError(SpectraCubeError, ValueError):
    pass


class SingularConfigurationError(SpectraCubeError, ValueError):
    """Point configuration does not determine a homography."""


class QuadOutOfBoundsError(ValidationError):
    pass


class ZeroBaselineError(SpectraCubeError, ValueError):
    pass


class OutOfBoundsBlockError(SpectraCubeError, IndexError):
    pass


class InsufficientDataError(SpectraCubeError, ValueError):
    """Fewer than two known pairs are available for a regression."""


class DegenerateDataError(SpectraCubeError, ValueError):
    """Regression inputs have zero variance."""


class BitstreamError(SpectraCubeError, ValueError):
    pass


class VersionMismatchError(BitstreamError):
    pass


class CurveError(SpectraCubeError, ValueError):
    """Rate-distortion curve is unusable for Bjontegaard metrics."""


class NonMonotoneCurveError(CurveError):
    pass


class EmptyOverlapError(CurveError):
    pass
