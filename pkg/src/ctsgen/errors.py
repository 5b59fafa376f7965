"""Exception hierarchy shared across the package."""


class CtsError(Exception):
    """Base class for every error raised by ctsgen."""

    code = "cts_error"


class ShapeError(CtsError, ValueError):
    code = "shape_error"


class NonFiniteError(CtsError, FloatingPointError):
    code = "non_finite"


class SchemaError(CtsError, ValueError):
    code = "schema_error"


class DataFormatError(CtsError, ValueError):
    code = "data_format_error"


class ConfigError(CtsError, ValueError):
    code = "config_error"


class BundleError(CtsError):
    code = "bundle_error"


class TrainingDivergedError(CtsError):
    code = "training_diverged"

    def __init__(self, epoch, message=None):
        self.epoch = epoch
        super().__init__(message or f"loss became non-finite at epoch {epoch}")


class NominalExtrapolationError(CtsError):
    """Raised when an edit asks for a nominal category never seen in training."""

    code = "nominal_extrapolation"
