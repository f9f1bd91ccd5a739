"""
Exception hierarchy for the KCR toolkit.

Every error raised on purpose by the library derives from ``KcrError`` so
callers (the CLI in particular) can separate domain failures from bugs.
"""

from typing import Optional


class KcrError(Exception):
    """Base class for all library errors."""


# =============================================================================
# GEOMETRY
# =============================================================================

class GeometryError(KcrError, ValueError):
    """Invalid geometric input."""


class DegenerateQuad(GeometryError):
    """Quadrilateral (or midpoint-offset parallelogram) with no area."""


class NonConvexQuad(GeometryError):
    """Quadrilateral whose vertices do not form a convex polygon."""


class InvalidBox(GeometryError):
    """Box parameters violating their invariants (non-positive extent, xmin > xmax, NaN)."""


class InvalidGamma(GeometryError):
    """Enlargement factor below 1 or not finite."""


# =============================================================================
# ASSIGNMENT / LOSSES / EVALUATION
# =============================================================================

class AssignmentError(KcrError, ValueError):
    """Assignment called with inconsistent inputs."""


class EmptyGroundTruth(AssignmentError):
    """Raised only when an empty ground-truth set is used where boxes are required."""


class GroundTruthKindError(AssignmentError):
    """Ground truth of the wrong kind (rotated vs axis-aligned) for the requested rule."""


class LossError(KcrError, ValueError):
    """Loss computation failure."""


class NonFiniteLoss(LossError):
    """A loss component evaluated to NaN or infinity."""


class EvaluationError(KcrError, ValueError):
    """Evaluation failure."""


class ZeroGroundTruth(EvaluationError):
    """Average precision requested with no ground-truth boxes; AP is undefined."""


# =============================================================================
# CONFIGURATION / TRAINING
# =============================================================================

class ConfigError(KcrError, ValueError):
    """Invalid configuration values or spec file."""


class TrainingError(KcrError, RuntimeError):
    """Simulator training failure."""


class DivergedLoss(TrainingError):
    """Total training loss became non-finite."""

    def __init__(self, epoch: int, value: float):
        self.epoch = epoch
        self.value = value
        super().__init__(f"Loss diverged at epoch {epoch}: {value!r}")


# =============================================================================
# PARSING
# =============================================================================

class ParseError(KcrError, ValueError):
    """
    Malformed input with its location.

    Args:
        reason: What is wrong
        line: 1-based line number in the source text, if known
        field: Field or JSON path, if known
    """

    def __init__(self, reason: str, line: Optional[int] = None, field: Optional[str] = None):
        self.reason = reason
        self.line = line
        self.field = field
        super().__init__(self._format())

    def _format(self) -> str:
        location = []
        if self.line is not None:
            location.append(f"line {self.line}")
        if self.field is not None:
            location.append(self.field)
        if location:
            return f"{', '.join(location)}: {self.reason}"
        return self.reason


class SchemaVersionError(ParseError):
    """Document declares a schema name or version this build does not read."""


class AnnotationBoxError(ParseError, InvalidBox):
    """Annotation row describing an invalid box (e.g. xmin > xmax), with location."""
