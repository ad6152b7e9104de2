"""Exception types shared across the package."""


class GeoverifyError(Exception):
    """Base class for all package-specific errors."""


class InvalidPoseError(GeoverifyError):
    """A rotation matrix failed the orthonormality / determinant check."""


class NoIntersectionError(GeoverifyError):
    """A viewing ray does not intersect the projection plane in front of the camera."""


class DegenerateSampleError(GeoverifyError):
    """A minimal sample is rank-deficient and admits no unique model."""


class InsufficientDataError(GeoverifyError):
    """Too few correspondences to run the requested estimator."""


class SceneGenerationError(GeoverifyError):
    """Synthetic scene sampling exhausted its retry budget."""


class ParseError(GeoverifyError):
    """A text input file failed to parse.

    Carries the file kind ("pose", "matches", ...) and the 1-based line
    number so the CLI can emit a pinpointed diagnostic.
    """

    def __init__(self, kind: str, line_no: int, message: str, path: str = ""):
        self.kind = kind
        self.line_no = line_no
        self.path = path
        super().__init__(f"{kind} file line {line_no}: {message}" + (f" ({path})" if path else ""))
