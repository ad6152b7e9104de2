"""Two-view geometric verification for UAV image matches.

Candidate matches are projected onto an object-space elevation plane using
rough navigation poses, turned into 2D motions, filtered by a three-stage
motion-consistency vote, and refined with fundamental-matrix RANSAC.
"""

from .bench import BenchReport, BenchRow, pairwise_vote_filter, run_benchmark
from .errors import (
    DegenerateSampleError,
    GeoverifyError,
    InsufficientDataError,
    InvalidPoseError,
    NoIntersectionError,
    ParseError,
    SceneGenerationError,
)
from .geometry import (
    CameraIntrinsics,
    CameraPose,
    MountCalibration,
    PlatformPose,
    ProjectionPlane,
    compose_camera_pose,
    distort_point,
    project_to_pixel,
    project_to_plane,
    undistort_point,
)
from .hmcc import (
    AccumulatorArray,
    FilterResult,
    HmccConfig,
    StageOutcome,
    direction_change,
    global_direction_vote,
    hmcc_filter,
    knn_motions,
    length_zscore_filter,
    local_direction_change_vote,
)
from .motion import Correspondence, Motion, generate_motions, motion_direction, motion_length
from .ransac import (
    RansacConfig,
    VerificationReport,
    epipolar_residual,
    hmcc_ransac,
    normalize_fundamental,
    ransac_fundamental,
    sampson_distances,
    seven_point,
)
from .synth import (
    LabeledMatchSet,
    PrecisionRecall,
    SceneSpec,
    fundamental_from_poses,
    generate_scene,
    precision_recall,
)

__version__ = "0.1.0"

__all__ = [
    "AccumulatorArray",
    "BenchReport",
    "BenchRow",
    "CameraIntrinsics",
    "CameraPose",
    "Correspondence",
    "DegenerateSampleError",
    "FilterResult",
    "GeoverifyError",
    "HmccConfig",
    "InsufficientDataError",
    "InvalidPoseError",
    "LabeledMatchSet",
    "Motion",
    "MountCalibration",
    "NoIntersectionError",
    "ParseError",
    "PlatformPose",
    "PrecisionRecall",
    "ProjectionPlane",
    "RansacConfig",
    "SceneGenerationError",
    "SceneSpec",
    "StageOutcome",
    "VerificationReport",
    "compose_camera_pose",
    "direction_change",
    "distort_point",
    "epipolar_residual",
    "fundamental_from_poses",
    "generate_motions",
    "generate_scene",
    "global_direction_vote",
    "hmcc_filter",
    "hmcc_ransac",
    "knn_motions",
    "length_zscore_filter",
    "local_direction_change_vote",
    "motion_direction",
    "motion_length",
    "normalize_fundamental",
    "pairwise_vote_filter",
    "precision_recall",
    "project_to_pixel",
    "project_to_plane",
    "ransac_fundamental",
    "run_benchmark",
    "sampson_distances",
    "seven_point",
    "undistort_point",
]
