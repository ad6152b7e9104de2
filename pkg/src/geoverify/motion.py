"""Object-space motions: directed 2D vectors joining the plane projections of a match.

Each candidate correspondence projects to one point per camera on the shared
elevation plane; the pair (start, end) forms a motion whose direction (degrees
counter-clockwise from +X, in [0, 360)) and length (meters) drive the
consistency voting stages.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    CameraIntrinsics,
    CameraPose,
    ProjectionPlane,
    project_points_to_plane,
    undistort_points,
)

#: Motions shorter than this (meters) carry no usable direction.
DEGENERATE_LENGTH = 1e-9


@dataclass(frozen=True)
class Correspondence:
    """A candidate match: one pixel location per image, plus its input ordinal."""

    p1: np.ndarray
    p2: np.ndarray
    id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "p1", np.asarray(self.p1, dtype=float).reshape(2))
        object.__setattr__(self, "p2", np.asarray(self.p2, dtype=float).reshape(2))


@dataclass(frozen=True)
class Motion:
    """Directed object-space vector with cached direction/length attributes."""

    start: np.ndarray
    end: np.ndarray
    source_id: int = 0
    direction: float = field(init=False)
    length: float = field(init=False)

    def __post_init__(self):
        start = np.asarray(self.start, dtype=float).reshape(2)
        end = np.asarray(self.end, dtype=float).reshape(2)
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "end", end)
        object.__setattr__(self, "direction", motion_direction(start, end))
        object.__setattr__(self, "length", motion_length(start, end))

    @property
    def degenerate(self) -> bool:
        """True when the motion is too short to define a direction."""
        return self.length < DEGENERATE_LENGTH


def motion_direction(start, end) -> float:
    """Full-quadrant angle of end-start, CCW from +X, mapped to [0, 360) degrees."""
    d = np.asarray(end, dtype=float) - np.asarray(start, dtype=float)
    return float(np.degrees(np.arctan2(d[1], d[0])) % 360.0)


def motion_length(start, end) -> float:
    """Euclidean norm of end-start in meters."""
    d = np.asarray(end, dtype=float) - np.asarray(start, dtype=float)
    return float(np.hypot(d[0], d[1]))


def _outside_frame(points: np.ndarray, intr: CameraIntrinsics) -> int:
    w, h = intr.image_size
    return int(np.sum((points[:, 0] < 0) | (points[:, 0] > w) | (points[:, 1] < 0) | (points[:, 1] > h)))


def generate_motions(
    matches: list[Correspondence],
    intr1: CameraIntrinsics,
    intr2: CameraIntrinsics,
    pose1: CameraPose,
    pose2: CameraPose,
    plane: ProjectionPlane,
) -> tuple[list[Motion], list[int]]:
    """Project every correspondence onto the plane and build its motion.

    Pixels are undistorted before ray casting.  Correspondences whose ray in
    either image misses the plane (parallel, or intersection behind the
    camera) are dropped; their ids are returned separately.  Output order
    follows input order.
    """
    if not matches:
        return [], []

    raw1 = np.array([m.p1 for m in matches])
    raw2 = np.array([m.p2 for m in matches])
    n_border = _outside_frame(raw1, intr1) + _outside_frame(raw2, intr2)
    if n_border:
        warnings.warn(
            f"{n_border} correspondence endpoint(s) lie outside the image frame",
            RuntimeWarning,
            stacklevel=2,
        )

    px1 = undistort_points(raw1, intr1)
    px2 = undistort_points(raw2, intr2)
    start, ok1 = project_points_to_plane(px1, intr1, pose1, plane)
    end, ok2 = project_points_to_plane(px2, intr2, pose2, plane)
    ok = ok1 & ok2

    motions = [
        Motion(start=start[i], end=end[i], source_id=matches[i].id)
        for i in range(len(matches))
        if ok[i]
    ]
    dropped = [matches[i].id for i in range(len(matches)) if not ok[i]]
    return motions, dropped
