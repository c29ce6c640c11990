"""Exception types for posekit.

Every error carries the CLI exit code it maps to:
2 input/schema, 3 numeric failure, 4 data alignment.
"""


class PosekitError(Exception):
    """Base class for all posekit errors."""

    exit_code: int = 1


class SchemaError(PosekitError, ValueError):
    """Input could not be parsed or is missing required fields."""

    exit_code = 2


class TemplateValidationError(PosekitError, ValueError):
    """Template parsed but violates a structural invariant."""

    exit_code = 2


class NonPositiveScaleError(PosekitError, ValueError):
    """Frame scale phi or beta is not strictly positive."""

    exit_code = 2


class ScaleOutOfBoundsError(PosekitError, ValueError):
    """Frame scale lies outside the sanity bounds."""

    exit_code = 2


class SingularTransformError(PosekitError, ValueError):
    """Affine transform is malformed or its linear block is singular."""

    exit_code = 3


class MissingTransformError(PosekitError, KeyError):
    """A template part has no transform."""

    exit_code = 2


class ModeMismatchError(PosekitError, ValueError):
    """TransformSet contents do not match its mode or parameterization."""

    exit_code = 2


class DegeneratePartError(PosekitError, ValueError):
    """A transformed part covariance is singular beyond tolerance."""

    exit_code = 3


class DimMismatchError(PosekitError, ValueError):
    """Two heatmaps differ in size or channel count."""

    exit_code = 2


class LengthMismatchError(PosekitError, ValueError):
    """Ground truth and prediction lists are not aligned."""

    exit_code = 4


class DegenerateBoxError(PosekitError, ValueError):
    """All ground-truth keypoints coincide."""

    exit_code = 3


class DegenerateTorsoError(PosekitError, ValueError):
    """Predicted torso length is below tolerance."""

    exit_code = 3


class NonFiniteLossError(PosekitError, ArithmeticError):
    """Loss or gradient evaluated to NaN or infinity."""

    exit_code = 3


class FrameIdMismatchError(PosekitError, ValueError):
    """Frame ids of two inputs do not join one-to-one."""

    exit_code = 4

    def __init__(self, message: str, missing: list[str] | None = None) -> None:
        super().__init__(message)
        self.missing = missing or []


class FlipMismatchError(PosekitError, ArithmeticError):
    """Metrics changed when predictions and references were both mirrored."""

    exit_code = 3
