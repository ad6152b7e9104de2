"""Synthetic two-view scenes with ground-truth labels for protocol testing.

A scene is a pair of aerial cameras over a gently-relieved ground patch:
true matches come from projecting shared 3D points into both frames, outliers
are independent uniform pixel pairs, and the navigation-data stand-in is the
true pose pair perturbed by configurable position/attitude noise.  Everything
is driven by a single seed, so scenes are bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import SceneGenerationError
from .geometry import (
    CameraIntrinsics,
    CameraPose,
    opk_to_matrix,
    project_points_to_pixels,
    rot_y,
)
from .motion import Correspondence
from .ransac import normalize_fundamental

#: Orientation of a camera looking straight down: world X kept as image x,
#: world Y/Z flipped so the optical axis points at the ground.
NADIR_ROTATION = np.diag([1.0, -1.0, -1.0])

_DEFAULT_INTRINSICS = dict(
    focal_length=7200.0,
    principal_point=(3680.0, 2456.0),
    image_size=(7360, 4912),
)


@dataclass(frozen=True)
class SceneSpec:
    """Parameters of one synthetic image pair."""

    n_inliers: int = 200
    outlier_ratio: float = 0.5
    flight_height: float = 300.0
    terrain_relief_sigma: float = 5.0
    mount_pitch: float = 0.0
    pose_noise: tuple[float, float] = (2.0, 1.0)  # (position sigma m, angle sigma deg)
    pixel_noise_sigma: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n_inliers <= 0:
            raise ValueError(f"n_inliers must be positive, got {self.n_inliers}")
        if not 0.0 <= self.outlier_ratio < 1.0:
            raise ValueError(f"outlier_ratio must be in [0, 1), got {self.outlier_ratio}")
        if self.flight_height <= 0:
            raise ValueError(f"flight_height must be positive, got {self.flight_height}")
        for name in ("terrain_relief_sigma", "pixel_noise_sigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.pose_noise[0] < 0 or self.pose_noise[1] < 0:
            raise ValueError(f"pose_noise sigmas must be >= 0, got {self.pose_noise}")


@dataclass
class LabeledMatchSet:
    """A shuffled correspondence set with per-match ground-truth labels."""

    correspondences: list[Correspondence]
    labels: np.ndarray
    true_poses: tuple[CameraPose, CameraPose]
    noisy_poses: tuple[CameraPose, CameraPose]
    intrinsics: tuple[CameraIntrinsics, CameraIntrinsics]
    ground_truth_f: np.ndarray


class PrecisionRecall(NamedTuple):
    precision: float
    recall: float
    #: True when the mask selected nothing, making precision undefined
    #: (reported as 1.0: no predictions, no false positives).
    no_predictions: bool = False


def skew(v: np.ndarray) -> np.ndarray:
    """Cross-product matrix: skew(a) @ b == cross(a, b)."""
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


def intrinsic_matrix(intr: CameraIntrinsics) -> np.ndarray:
    return np.array(
        [
            [intr.focal_length, 0.0, intr.principal_point[0]],
            [0.0, intr.focal_length, intr.principal_point[1]],
            [0.0, 0.0, 1.0],
        ]
    )


def fundamental_from_poses(
    pose1: CameraPose, pose2: CameraPose, intr1: CameraIntrinsics, intr2: CameraIntrinsics
) -> np.ndarray:
    """Ground-truth fundamental matrix from two known camera poses.

    Standard two-view construction: the essential matrix of the relative pose
    conjugated by the inverse calibration matrices, normalized to unit
    Frobenius norm.
    """
    r_rel = pose2.rotation_world_to_camera @ pose1.rotation_world_to_camera.T
    t_rel = pose2.rotation_world_to_camera @ (pose1.center_world - pose2.center_world)
    if np.linalg.norm(t_rel) < 1e-12:
        raise SceneGenerationError("coincident camera centers admit no fundamental matrix")
    essential = skew(t_rel) @ r_rel
    k1_inv = np.linalg.inv(intrinsic_matrix(intr1))
    k2_inv = np.linalg.inv(intrinsic_matrix(intr2))
    return normalize_fundamental(k2_inv.T @ essential @ k1_inv)


def _perturbed_pose(pose: CameraPose, pos_sigma: float, angle_sigma: float, rng) -> CameraPose:
    center = pose.center_world + rng.normal(0.0, pos_sigma, 3) if pos_sigma > 0 else pose.center_world
    rotation = pose.rotation_world_to_camera
    if angle_sigma > 0:
        eps = rng.normal(0.0, angle_sigma, 3)
        rotation = opk_to_matrix(*eps) @ rotation  # small attitude error in the camera frame
    return CameraPose(rotation_world_to_camera=rotation, center_world=center)


def _scene_cameras(spec: SceneSpec) -> tuple[CameraPose, CameraPose, float]:
    """True camera pair: camera 1 nadir, camera 2 pitched by ``mount_pitch``.

    Camera 2 is offset so its principal ray lands near the shared ground
    patch; returns the patch center X as well.
    """
    h = spec.flight_height
    baseline = 0.3 * h
    pitch = spec.mount_pitch
    pose1 = CameraPose(rotation_world_to_camera=NADIR_ROTATION, center_world=np.array([0.0, 0.0, h]))
    shift = h * math.tan(math.radians(pitch))
    pose2 = CameraPose(
        rotation_world_to_camera=rot_y(pitch) @ NADIR_ROTATION,
        center_world=np.array([baseline + shift, 0.0, h]),
    )
    return pose1, pose2, baseline / 2.0


def _in_frame(pixels: np.ndarray, intr: CameraIntrinsics) -> np.ndarray:
    w, h = intr.image_size
    return (
        (pixels[:, 0] >= 0.0)
        & (pixels[:, 0] <= w)
        & (pixels[:, 1] >= 0.0)
        & (pixels[:, 1] <= h)
        & np.isfinite(pixels).all(axis=1)
    )


def generate_scene(spec: SceneSpec) -> LabeledMatchSet:
    """Build one labeled match set according to the spec.

    Ground points are sampled with Gaussian relief around Z = 0 and kept only
    when visible in both true cameras (bounded resampling).  Outliers are
    appended as independent uniform pixel pairs at the requested ratio, the
    whole set is shuffled, and the returned poses include both the true pair
    and the noise-perturbed navigation stand-in.
    """
    rng = np.random.default_rng(spec.seed)
    intr = CameraIntrinsics(**_DEFAULT_INTRINSICS)
    pose1, pose2, center_x = _scene_cameras(spec)

    half_extent = 0.25 * spec.flight_height
    px1_list, px2_list = [], []
    remaining = spec.n_inliers
    for _ in range(200):
        if remaining <= 0:
            break
        batch = max(2 * remaining, 16)
        ground = np.column_stack(
            [
                rng.uniform(center_x - half_extent, center_x + half_extent, batch),
                rng.uniform(-half_extent, half_extent, batch),
                rng.normal(0.0, spec.terrain_relief_sigma, batch)
                if spec.terrain_relief_sigma > 0
                else np.zeros(batch),
            ]
        )
        a, front1 = project_points_to_pixels(ground, intr, pose1)
        b, front2 = project_points_to_pixels(ground, intr, pose2)
        ok = front1 & front2 & _in_frame(a, intr) & _in_frame(b, intr)
        take = min(remaining, int(ok.sum()))
        px1_list.append(a[ok][:take])
        px2_list.append(b[ok][:take])
        remaining -= take
    if remaining > 0:
        raise SceneGenerationError(
            f"could not place {spec.n_inliers} points visible in both cameras "
            f"(mount_pitch={spec.mount_pitch}, flight_height={spec.flight_height})"
        )
    px1 = np.vstack(px1_list)
    px2 = np.vstack(px2_list)

    ground_truth_f = fundamental_from_poses(pose1, pose2, intr, intr)

    if spec.pixel_noise_sigma > 0:
        px1 = px1 + rng.normal(0.0, spec.pixel_noise_sigma, px1.shape)
        px2 = px2 + rng.normal(0.0, spec.pixel_noise_sigma, px2.shape)

    n_out = math.ceil(spec.n_inliers * spec.outlier_ratio / (1.0 - spec.outlier_ratio))
    w, h = intr.image_size
    out1 = np.column_stack([rng.uniform(0, w, n_out), rng.uniform(0, h, n_out)])
    out2 = np.column_stack([rng.uniform(0, w, n_out), rng.uniform(0, h, n_out)])

    all1 = np.vstack([px1, out1])
    all2 = np.vstack([px2, out2])
    labels = np.concatenate([np.ones(spec.n_inliers, dtype=bool), np.zeros(n_out, dtype=bool)])
    order = rng.permutation(len(labels))
    all1, all2, labels = all1[order], all2[order], labels[order]

    correspondences = [Correspondence(p1=all1[i], p2=all2[i], id=i) for i in range(len(labels))]
    noisy = (
        _perturbed_pose(pose1, spec.pose_noise[0], spec.pose_noise[1], rng),
        _perturbed_pose(pose2, spec.pose_noise[0], spec.pose_noise[1], rng),
    )
    return LabeledMatchSet(
        correspondences=correspondences,
        labels=labels,
        true_poses=(pose1, pose2),
        noisy_poses=noisy,
        intrinsics=(intr, intr),
        ground_truth_f=ground_truth_f,
    )


def precision_recall(mask, labels) -> PrecisionRecall:
    """Precision/recall of a predicted inlier mask against ground-truth labels.

    An empty mask has no false positives; precision is reported as 1.0 with
    ``no_predictions`` set.
    """
    mask = np.asarray(mask, dtype=bool)
    labels = np.asarray(labels, dtype=bool)
    if mask.shape != labels.shape:
        raise ValueError(f"mask and labels differ in length: {mask.shape} vs {labels.shape}")
    tp = int(np.sum(mask & labels))
    n_pred = int(mask.sum())
    n_true = int(labels.sum())
    recall = tp / n_true if n_true else 1.0
    if n_pred == 0:
        return PrecisionRecall(precision=1.0, recall=recall, no_predictions=True)
    return PrecisionRecall(precision=tp / n_pred, recall=recall)
