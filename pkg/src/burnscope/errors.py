"""Exception hierarchy shared across the package."""


class BurnscopeError(Exception):
    """Base class for all errors raised by this package."""


class NotFoundError(BurnscopeError):
    """A patient, session, job, or artifact id does not exist."""


class IntegrityError(BurnscopeError):
    """Stored state is inconsistent (dangling reference, hash mismatch)."""


class VersionError(BurnscopeError):
    """A persisted document declares an unsupported schema version."""


class ManifestParseError(BurnscopeError):
    """A manifest file could not be parsed; the message names the file."""


class ValidationError(BurnscopeError):
    """An input value is outside its documented range."""


class DegenerateInputError(BurnscopeError):
    """Input too small or structurally unable to support the operation."""


class InsufficientMatchesError(BurnscopeError):
    """Fewer correspondences than the estimator's minimal set."""


class InsufficientCandidatesError(BurnscopeError):
    """Candidate descriptor set too small for a ratio test."""


class DegenerateGeometryError(BurnscopeError):
    """Point configuration does not constrain the estimated geometry."""


class LowParallaxError(BurnscopeError):
    """Viewing rays are too close to parallel to triangulate."""


class BehindCameraError(BurnscopeError):
    """Point has non-positive depth in the camera frame."""


class NumericalFailureError(BurnscopeError):
    """An optimizer produced non-finite values."""


class ShapeError(BurnscopeError):
    """Array dimensions do not match."""


class TopologyError(BurnscopeError):
    """Mesh connectivity violates the manifold assumption."""


class EmptyRegionError(BurnscopeError):
    """An operation over the burn region received an empty region."""


class EmptyVisibilityError(BurnscopeError):
    """No mesh face is visible from any supplied view."""


class UnscaledGeometryError(BurnscopeError):
    """Metric output requested from geometry not yet scaled to cm."""


class ZeroBaselineError(BurnscopeError):
    """Scale reference points coincide."""


class DegenerateFitError(BurnscopeError):
    """Surface fit input is collinear or otherwise rank deficient."""


class ConflictError(BurnscopeError):
    """A non-terminal job already exists for the session."""


class IncompleteSessionError(BurnscopeError):
    """Session lacks the analyses the operation requires."""
