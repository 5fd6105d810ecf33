"""Exception types shared across the package."""


class ArtisceneError(Exception):
    """Base class for all package errors."""


class InsufficientGeometryError(ArtisceneError):
    """Too few or too degenerate points for a geometric operation."""


class DegenerateInteractionError(ArtisceneError):
    """Hand trajectory too small or malformed to classify a joint."""


class DatasetError(ArtisceneError):
    """On-disk dataset is missing, malformed, or truncated."""


class SceneSpecError(ArtisceneError):
    """Scene or script JSON violates the expected schema."""


class GraphQueryError(ArtisceneError):
    """Invalid query against the scene graph (unknown id, bad timestamp)."""


class RankDeficiencyError(ArtisceneError):
    """Regression system has no unique solution (constant inputs)."""
