"""Camera model, pose composition and projection onto a constant-elevation plane.

Coordinate conventions used throughout the package:

  World frame (right-handed): X/Y horizontal in meters, Z up (elevation).
  Camera frame: X right, Y down in the image, Z forward along the optical
    axis toward the scene.  A camera looking straight down therefore has
    rotation ``diag(1, -1, -1)`` (world X kept, world Y and Z flipped).
  Rotation matrices map world-frame vectors INTO the platform/camera frame;
    positions and camera centers are expressed in world coordinates.
  Pixel frame: origin top-left, x right, y down, units pixels.

Pose composition follows the navigation-data model: the platform pose comes
from onboard GNSS/IMU, the camera is rigidly mounted with a fixed relative
rotation and lever arm, and the actual camera pose is

    rotation_world_to_camera = mount_rotation @ platform_rotation
    center_world             = platform_rotation.T @ lever_arm + platform_position

A nadir mount is the identity rotation with a zero lever arm, in which case
the camera pose equals the platform pose.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidPoseError, NoIntersectionError

#: Orthonormality tolerance for accepting a rotation matrix.
ROTATION_TOL = 1e-6

#: A ray is treated as parallel to the plane below this |direction_z|.
PARALLEL_TOL = 1e-12


def rot_x(deg: float) -> np.ndarray:
    """Right-handed rotation about the X axis by ``deg`` degrees."""
    c, s = np.cos(np.radians(deg)), np.sin(np.radians(deg))
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(deg: float) -> np.ndarray:
    """Right-handed rotation about the Y axis by ``deg`` degrees."""
    c, s = np.cos(np.radians(deg)), np.sin(np.radians(deg))
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(deg: float) -> np.ndarray:
    """Right-handed rotation about the Z axis by ``deg`` degrees."""
    c, s = np.cos(np.radians(deg)), np.sin(np.radians(deg))
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def opk_to_matrix(omega: float, phi: float, kappa: float) -> np.ndarray:
    """World-to-frame rotation from omega/phi/kappa angles in degrees.

    The factorization is ``rot_z(kappa) @ rot_y(phi) @ rot_x(omega)``, the
    common photogrammetric ordering.  Inverse of :func:`matrix_to_opk`.
    """
    return rot_z(kappa) @ rot_y(phi) @ rot_x(omega)


def matrix_to_opk(rotation: np.ndarray) -> tuple[float, float, float]:
    """Decompose a world-to-frame rotation into omega/phi/kappa degrees.

    At phi = +-90 (gimbal lock) kappa is conventionally set to zero.
    """
    r = np.asarray(rotation, dtype=float)
    phi = -np.arcsin(np.clip(r[2, 0], -1.0, 1.0))
    if abs(abs(r[2, 0]) - 1.0) < 1e-12:
        omega = np.arctan2(-r[0, 1], r[1, 1])
        kappa = 0.0
    else:
        omega = np.arctan2(r[2, 1], r[2, 2])
        kappa = np.arctan2(r[1, 0], r[0, 0])
    return float(np.degrees(omega)), float(np.degrees(phi)), float(np.degrees(kappa))


def _check_rotation(rotation: np.ndarray, tol: float = ROTATION_TOL) -> np.ndarray:
    r = np.asarray(rotation, dtype=float)
    if r.shape != (3, 3):
        raise InvalidPoseError(f"rotation must be 3x3, got shape {r.shape}")
    err = np.max(np.abs(r @ r.T - np.eye(3)))
    if err > tol:
        raise InvalidPoseError(f"rotation is not orthonormal (|R R^T - I| = {err:.3e})")
    det = np.linalg.det(r)
    if abs(det - 1.0) > tol:
        raise InvalidPoseError(f"rotation has det {det:.9f}, expected +1")
    return r


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole model with Brown radial-tangential distortion.

    ``focal_length`` and ``principal_point`` are in pixels.  The three radial
    and two tangential coefficients act on normalized image coordinates
    (pixel offsets divided by the focal length), so they are dimensionless.
    """

    focal_length: float
    principal_point: tuple[float, float]
    image_size: tuple[int, int]
    radial: tuple[float, float, float] = (0.0, 0.0, 0.0)
    tangential: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.focal_length <= 0:
            raise ValueError(f"focal_length must be > 0, got {self.focal_length}")
        if self.image_size[0] <= 0 or self.image_size[1] <= 0:
            raise ValueError(f"image_size components must be > 0, got {self.image_size}")


@dataclass(frozen=True)
class PlatformPose:
    """Orientation and position of the carrying platform from navigation data."""

    rotation_world_to_platform: np.ndarray
    position_world: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "rotation_world_to_platform", _check_rotation(self.rotation_world_to_platform)
        )
        object.__setattr__(
            self, "position_world", np.asarray(self.position_world, dtype=float).reshape(3)
        )


@dataclass(frozen=True)
class MountCalibration:
    """Rigid camera-to-platform offset: relative rotation plus lever arm (meters)."""

    rotation_platform_to_camera: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(
            self, "rotation_platform_to_camera", _check_rotation(self.rotation_platform_to_camera)
        )
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float).reshape(3))

    @classmethod
    def nadir(cls) -> "MountCalibration":
        """Identity rotation, zero lever arm."""
        return cls()


@dataclass(frozen=True)
class CameraPose:
    """World-to-camera rotation plus camera center in world coordinates."""

    rotation_world_to_camera: np.ndarray
    center_world: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "rotation_world_to_camera", _check_rotation(self.rotation_world_to_camera)
        )
        object.__setattr__(self, "center_world", np.asarray(self.center_world, dtype=float).reshape(3))


@dataclass(frozen=True)
class ProjectionPlane:
    """Horizontal object-space plane Z = elevation (meters)."""

    elevation: float = -100.0

    def __post_init__(self):
        if not np.isfinite(self.elevation):
            raise ValueError(f"plane elevation must be finite, got {self.elevation}")


def compose_camera_pose(platform: PlatformPose, mount: MountCalibration) -> CameraPose:
    """Combine a platform pose with the mount calibration into the camera pose.

    Rotations compose as mount @ platform; the camera center is the lever arm
    rotated out of the platform frame plus the platform position.
    """
    r = mount.rotation_platform_to_camera
    rot = platform.rotation_world_to_platform
    center = rot.T @ mount.translation + platform.position_world
    return CameraPose(rotation_world_to_camera=r @ rot, center_world=center)


def distort_points(points: np.ndarray, intr: CameraIntrinsics) -> np.ndarray:
    """Apply the forward Brown model to ideal pixel locations, shape (N, 2)."""
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    f = intr.focal_length
    cx, cy = intr.principal_point
    k1, k2, k3 = intr.radial
    p1, p2 = intr.tangential

    xn = (p[:, 0] - cx) / f
    yn = (p[:, 1] - cy) / f
    r2 = xn * xn + yn * yn
    radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3))
    xd = xn * radial + 2.0 * p1 * xn * yn + p2 * (r2 + 2.0 * xn * xn)
    yd = yn * radial + p1 * (r2 + 2.0 * yn * yn) + 2.0 * p2 * xn * yn
    return np.column_stack([cx + f * xd, cy + f * yd])


def distort_point(point, intr: CameraIntrinsics) -> np.ndarray:
    """Single-point convenience wrapper around :func:`distort_points`."""
    return distort_points(np.asarray(point, dtype=float).reshape(1, 2), intr)[0]


def undistort_points(
    points: np.ndarray,
    intr: CameraIntrinsics,
    tol_px: float = 1e-8,
    max_iter: int = 20,
) -> np.ndarray:
    """Invert the Brown model by fixed-point iteration, shape (N, 2).

    Iterates until successive pixel estimates move less than ``tol_px`` or
    ``max_iter`` rounds have run; non-converged points keep the best iterate
    and trigger a low-confidence warning rather than a failure.
    """
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    f = intr.focal_length
    cx, cy = intr.principal_point
    k1, k2, k3 = intr.radial
    p1, p2 = intr.tangential

    xd = (p[:, 0] - cx) / f
    yd = (p[:, 1] - cy) / f
    xn, yn = xd.copy(), yd.copy()
    converged = False
    for _ in range(max_iter):
        r2 = xn * xn + yn * yn
        radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3))
        dx = 2.0 * p1 * xn * yn + p2 * (r2 + 2.0 * xn * xn)
        dy = p1 * (r2 + 2.0 * yn * yn) + 2.0 * p2 * xn * yn
        xn_new = (xd - dx) / radial
        yn_new = (yd - dy) / radial
        step = f * np.hypot(xn_new - xn, yn_new - yn)
        xn, yn = xn_new, yn_new
        if np.all(step < tol_px):
            converged = True
            break
    if not converged:
        warnings.warn(
            "undistortion did not converge within "
            f"{max_iter} iterations; returning best iterate (low confidence)",
            RuntimeWarning,
            stacklevel=2,
        )
    return np.column_stack([cx + f * xn, cy + f * yn])


def undistort_point(point, intr: CameraIntrinsics) -> np.ndarray:
    """Single-point convenience wrapper around :func:`undistort_points`."""
    return undistort_points(np.asarray(point, dtype=float).reshape(1, 2), intr)[0]


def pixel_rays_world(points: np.ndarray, intr: CameraIntrinsics, pose: CameraPose) -> np.ndarray:
    """World-frame viewing directions for undistorted pixels, shape (N, 3).

    Directions are un-normalized: ((x-cx)/f, (y-cy)/f, 1) rotated into the
    world frame.
    """
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    f = intr.focal_length
    cx, cy = intr.principal_point
    d_cam = np.column_stack([(p[:, 0] - cx) / f, (p[:, 1] - cy) / f, np.ones(len(p))])
    return d_cam @ pose.rotation_world_to_camera  # == (R^T @ d_cam^T)^T


def project_points_to_plane(
    points: np.ndarray,
    intr: CameraIntrinsics,
    pose: CameraPose,
    plane: ProjectionPlane,
) -> tuple[np.ndarray, np.ndarray]:
    """Intersect pixel viewing rays with the elevation plane.

    Returns ``(xy, ok)`` where ``xy`` has shape (N, 2) in meters and ``ok``
    marks rays that hit the plane strictly in front of the camera.  Rows with
    ``ok == False`` contain NaN.
    """
    d = pixel_rays_world(points, intr, pose)
    dz = d[:, 2]
    z0 = plane.elevation
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = (z0 - pose.center_world[2]) / dz
    ok = (np.abs(dz) >= PARALLEL_TOL) & (lam > 0) & np.isfinite(lam)
    xy = pose.center_world[:2] + lam[:, None] * d[:, :2]
    xy[~ok] = np.nan
    return xy, ok


def project_to_plane(point, intr: CameraIntrinsics, pose: CameraPose, plane: ProjectionPlane) -> np.ndarray:
    """Project one undistorted pixel onto the plane; raises if the ray misses.

    The ray misses when it is parallel to the plane or the intersection lies
    at or behind the camera center (non-positive ray parameter).
    """
    xy, ok = project_points_to_plane(np.asarray(point, dtype=float).reshape(1, 2), intr, pose, plane)
    if not ok[0]:
        raise NoIntersectionError(
            f"ray through pixel {tuple(np.asarray(point, dtype=float))} does not meet "
            f"plane Z={plane.elevation} in front of the camera"
        )
    return xy[0]


def project_points_to_pixels(
    world_points: np.ndarray, intr: CameraIntrinsics, pose: CameraPose
) -> tuple[np.ndarray, np.ndarray]:
    """Forward-project world points to ideal (distortion-free) pixels.

    Returns ``(pixels, in_front)``; points at or behind the camera plane get
    NaN pixels and ``in_front == False``.
    """
    w = np.asarray(world_points, dtype=float).reshape(-1, 3)
    cam = (w - pose.center_world) @ pose.rotation_world_to_camera.T
    z = cam[:, 2]
    in_front = z > PARALLEL_TOL
    with np.errstate(divide="ignore", invalid="ignore"):
        x = intr.principal_point[0] + intr.focal_length * cam[:, 0] / z
        y = intr.principal_point[1] + intr.focal_length * cam[:, 1] / z
    px = np.column_stack([x, y])
    px[~in_front] = np.nan
    return px, in_front


def project_to_pixel(world_point, intr: CameraIntrinsics, pose: CameraPose) -> np.ndarray:
    """Forward-project one world point; raises if it lies behind the camera."""
    px, ok = project_points_to_pixels(np.asarray(world_point, dtype=float).reshape(1, 3), intr, pose)
    if not ok[0]:
        raise NoIntersectionError("world point lies at or behind the camera")
    return px[0]
