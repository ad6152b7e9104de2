import sys
from pathlib import Path

import numpy as np
import pytest

from geoverify.geometry import CameraIntrinsics, CameraPose

sys.path.insert(0, str(Path(__file__).parent))  # make oracles importable


@pytest.fixture
def intr() -> CameraIntrinsics:
    """Distortion-free test camera."""
    return CameraIntrinsics(focal_length=1000.0, principal_point=(500.0, 400.0), image_size=(1000, 800))


@pytest.fixture
def nadir_pose():
    """Factory for straight-down cameras at a given center."""

    def make(x=0.0, y=0.0, z=300.0) -> CameraPose:
        return CameraPose(
            rotation_world_to_camera=np.diag([1.0, -1.0, -1.0]), center_world=np.array([x, y, z])
        )

    return make


def random_motions(rng, n, direction_spread=8.0, mean_length=20.0, base_direction=None):
    """Coherent random motion field: clustered directions, similar lengths."""
    from geoverify.motion import Motion

    base = rng.uniform(0.0, 360.0) if base_direction is None else base_direction
    motions = []
    for i in range(n):
        theta = np.radians(base + rng.normal(0.0, direction_spread))
        length = abs(rng.normal(mean_length, 2.0)) + 1e-3
        start = rng.uniform(-200.0, 200.0, 2)
        end = start + length * np.array([np.cos(theta), np.sin(theta)])
        motions.append(Motion(start=start, end=end, source_id=i))
    return motions


def scattered_motions(rng, n, mean_length=None):
    """Incoherent random motion field: uniform directions and lengths."""
    from geoverify.motion import Motion

    motions = []
    for i in range(n):
        theta = rng.uniform(0.0, 2.0 * np.pi)
        length = rng.uniform(1.0, 120.0) if mean_length is None else abs(rng.normal(mean_length, 2.0))
        start = rng.uniform(-200.0, 200.0, 2)
        end = start + length * np.array([np.cos(theta), np.sin(theta)])
        motions.append(Motion(start=start, end=end, source_id=i))
    return motions
