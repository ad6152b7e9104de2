"""Plain-text file formats for the command-line front-end.

All formats are one whitespace-delimited record per line with ``#`` comments:

  matches:  x1 y1 x2 y2                      (pixels, image 1 then image 2)
  poses:    image_id X Y Z omega phi kappa   (meters; degrees, see below)
  camera:   f cx cy k1 k2 k3 p1 p2 width height   (single line)
  mount:    pitch roll yaw tx ty tz          (degrees; meters)
  labels:   0|1                              (sidecar, one per correspondence)
  mask:     0|1                              (one per input correspondence)

Angles follow the package rotation convention: a pose line builds the
world-to-platform rotation as rot_z(kappa) @ rot_y(phi) @ rot_x(omega); a
mount line builds the platform-to-camera rotation as
rot_z(yaw) @ rot_y(pitch) @ rot_x(roll).  Floats are written with 17
significant digits so every value round-trips exactly.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .errors import ParseError
from .geometry import (
    CameraIntrinsics,
    CameraPose,
    MountCalibration,
    PlatformPose,
    matrix_to_opk,
    opk_to_matrix,
    rot_x,
    rot_y,
    rot_z,
)
from .hmcc import AccumulatorArray
from .motion import Correspondence
from .synth import LabeledMatchSet, SceneSpec


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _records(path: str, kind: str):
    """Yield (line_no, tokens) for every non-blank, non-comment line."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            lines = handle.readlines()
    except OSError as exc:
        raise ParseError(kind, 0, f"cannot read: {exc}", path) from exc
    for line_no, line in enumerate(lines, start=1):
        stripped = line.split("#", 1)[0].strip()
        if stripped:
            yield line_no, stripped.split()


def _floats(tokens: list[str], kind: str, line_no: int, path: str) -> list[float]:
    try:
        return [float(t) for t in tokens]
    except ValueError as exc:
        raise ParseError(kind, line_no, f"non-numeric field: {exc}", path) from exc


def read_matches(path: str) -> list[Correspondence]:
    matches = []
    for line_no, tokens in _records(path, "matches"):
        if len(tokens) != 4:
            raise ParseError("matches", line_no, f"expected 4 fields, got {len(tokens)}", path)
        x1, y1, x2, y2 = _floats(tokens, "matches", line_no, path)
        matches.append(Correspondence(p1=(x1, y1), p2=(x2, y2), id=len(matches)))
    return matches


def write_matches(path: str, matches: list[Correspondence]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("# x1 y1 x2 y2\n")
        for m in matches:
            handle.write(" ".join(_fmt(v) for v in (*m.p1, *m.p2)) + "\n")


def read_poses(path: str) -> list[tuple[str, PlatformPose]]:
    poses = []
    for line_no, tokens in _records(path, "pose"):
        if len(tokens) != 7:
            raise ParseError("pose", line_no, f"expected 7 fields, got {len(tokens)}", path)
        values = _floats(tokens[1:], "pose", line_no, path)
        x, y, z, omega, phi, kappa = values
        poses.append(
            (
                tokens[0],
                PlatformPose(
                    rotation_world_to_platform=opk_to_matrix(omega, phi, kappa),
                    position_world=(x, y, z),
                ),
            )
        )
    return poses


def write_poses(path: str, poses: list[tuple[str, PlatformPose | CameraPose]]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("# image_id X Y Z omega phi kappa\n")
        for image_id, pose in poses:
            rotation = getattr(pose, "rotation_world_to_platform", None)
            position = getattr(pose, "position_world", None)
            if rotation is None:
                rotation = pose.rotation_world_to_camera
                position = pose.center_world
            omega, phi, kappa = matrix_to_opk(rotation)
            fields = [image_id, *(_fmt(v) for v in (*position, omega, phi, kappa))]
            handle.write(" ".join(fields) + "\n")


def read_camera(path: str) -> CameraIntrinsics:
    records = list(_records(path, "camera"))
    if not records:
        raise ParseError("camera", 0, "file holds no camera line", path)
    line_no, tokens = records[0]
    if len(tokens) != 10:
        raise ParseError("camera", line_no, f"expected 10 fields, got {len(tokens)}", path)
    f, cx, cy, k1, k2, k3, p1, p2, width, height = _floats(tokens, "camera", line_no, path)
    try:
        return CameraIntrinsics(
            focal_length=f,
            principal_point=(cx, cy),
            image_size=(int(width), int(height)),
            radial=(k1, k2, k3),
            tangential=(p1, p2),
        )
    except ValueError as exc:
        raise ParseError("camera", line_no, str(exc), path) from exc


def write_camera(path: str, intr: CameraIntrinsics) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("# f cx cy k1 k2 k3 p1 p2 width height\n")
        fields = [
            intr.focal_length,
            *intr.principal_point,
            *intr.radial,
            *intr.tangential,
            *intr.image_size,
        ]
        handle.write(" ".join(_fmt(v) for v in fields) + "\n")


def read_mount(path: str) -> MountCalibration:
    records = list(_records(path, "mount"))
    if not records:
        raise ParseError("mount", 0, "file holds no mount line", path)
    line_no, tokens = records[0]
    if len(tokens) != 6:
        raise ParseError("mount", line_no, f"expected 6 fields, got {len(tokens)}", path)
    pitch, roll, yaw, tx, ty, tz = _floats(tokens, "mount", line_no, path)
    return MountCalibration(
        rotation_platform_to_camera=rot_z(yaw) @ rot_y(pitch) @ rot_x(roll),
        translation=(tx, ty, tz),
    )


def read_labels(path: str) -> np.ndarray:
    values = []
    for line_no, tokens in _records(path, "labels"):
        if len(tokens) != 1 or tokens[0] not in ("0", "1"):
            raise ParseError("labels", line_no, "expected a single 0 or 1", path)
        values.append(tokens[0] == "1")
    return np.array(values, dtype=bool)


def write_labels(path: str, labels) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for value in np.asarray(labels, dtype=bool):
            handle.write("1\n" if value else "0\n")


def write_mask(path: str, mask) -> None:
    write_labels(path, mask)


def write_histogram(path: str, accumulator: AccumulatorArray) -> None:
    """Dump one accumulator as ``bin_lo bin_hi count`` rows."""
    edges = accumulator.bin_edges()
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(f"# bin_lo bin_hi count (cyclic={int(accumulator.cyclic)})\n")
        for i, count in enumerate(accumulator.counts):
            handle.write(f"{_fmt(edges[i])} {_fmt(edges[i + 1])} {int(count)}\n")


SCENE_FILES = {
    "matches": "matches.txt",
    "poses": "poses.txt",
    "poses_true": "poses_true.txt",
    "camera": "camera.txt",
    "labels": "labels.txt",
    "meta": "scene.json",
}


def write_scene(directory: str, scene: LabeledMatchSet, spec: SceneSpec) -> None:
    """Write one labeled scene as the standard file bundle."""
    os.makedirs(directory, exist_ok=True)
    write_matches(os.path.join(directory, SCENE_FILES["matches"]), scene.correspondences)
    write_poses(
        os.path.join(directory, SCENE_FILES["poses"]),
        [("1", scene.noisy_poses[0]), ("2", scene.noisy_poses[1])],
    )
    write_poses(
        os.path.join(directory, SCENE_FILES["poses_true"]),
        [("1", scene.true_poses[0]), ("2", scene.true_poses[1])],
    )
    write_camera(os.path.join(directory, SCENE_FILES["camera"]), scene.intrinsics[0])
    write_labels(os.path.join(directory, SCENE_FILES["labels"]), scene.labels)
    meta = {
        "spec": {
            "n_inliers": spec.n_inliers,
            "outlier_ratio": spec.outlier_ratio,
            "flight_height": spec.flight_height,
            "terrain_relief_sigma": spec.terrain_relief_sigma,
            "mount_pitch": spec.mount_pitch,
            "pose_noise": list(spec.pose_noise),
            "pixel_noise_sigma": spec.pixel_noise_sigma,
            "seed": spec.seed,
        },
        "ground_truth_f": scene.ground_truth_f.tolist(),
    }
    with open(os.path.join(directory, SCENE_FILES["meta"]), "w", encoding="utf-8") as handle:
        json.dump(meta, handle, indent=2, sort_keys=True)
        handle.write("\n")


def read_scene(directory: str) -> LabeledMatchSet:
    """Read back a scene bundle written by :func:`write_scene`."""
    matches = read_matches(os.path.join(directory, SCENE_FILES["matches"]))
    noisy = read_poses(os.path.join(directory, SCENE_FILES["poses"]))
    true = read_poses(os.path.join(directory, SCENE_FILES["poses_true"]))
    intr = read_camera(os.path.join(directory, SCENE_FILES["camera"]))
    labels = read_labels(os.path.join(directory, SCENE_FILES["labels"]))
    if len(noisy) < 2 or len(true) < 2:
        raise ParseError("pose", 0, "scene pose files must hold two poses", directory)
    with open(os.path.join(directory, SCENE_FILES["meta"]), "r", encoding="utf-8") as handle:
        meta = json.load(handle)

    def as_camera(pose: PlatformPose) -> CameraPose:
        return CameraPose(
            rotation_world_to_camera=pose.rotation_world_to_platform,
            center_world=pose.position_world,
        )

    return LabeledMatchSet(
        correspondences=matches,
        labels=labels,
        true_poses=(as_camera(true[0][1]), as_camera(true[1][1])),
        noisy_poses=(as_camera(noisy[0][1]), as_camera(noisy[1][1])),
        intrinsics=(intr, intr),
        ground_truth_f=np.array(meta["ground_truth_f"]),
    )
