"""Tests for the synthetic scene generator and the evaluation metrics."""

import numpy as np
import pytest

from geoverify.errors import SceneGenerationError
from geoverify.geometry import CameraPose, ProjectionPlane
from geoverify.motion import generate_motions
from geoverify.ransac import sampson_distances
from geoverify.synth import (
    SceneSpec,
    fundamental_from_poses,
    generate_scene,
    precision_recall,
)

NADIR = np.diag([1.0, -1.0, -1.0])


def residuals(scene):
    p1 = np.array([c.p1 for c in scene.correspondences])
    p2 = np.array([c.p2 for c in scene.correspondences])
    return sampson_distances(p1, p2, scene.ground_truth_f)


class TestSceneSpec:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n_inliers": 0},
            {"outlier_ratio": 1.0},
            {"outlier_ratio": -0.1},
            {"flight_height": 0.0},
            {"pixel_noise_sigma": -1.0},
            {"pose_noise": (-1.0, 0.0)},
        ],
    )
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ValueError):
            SceneSpec(**kwargs)


class TestGenerateScene:
    def test_zero_outlier_ratio(self):
        scene = generate_scene(SceneSpec(n_inliers=40, outlier_ratio=0.0, seed=0))
        assert len(scene.correspondences) == 40
        assert scene.labels.all()

    @pytest.mark.parametrize("ratio,expected", [(0.5, 204), (0.25, 68), (0.75, 612)])
    def test_outlier_count_arithmetic(self, ratio, expected):
        scene = generate_scene(SceneSpec(n_inliers=204, outlier_ratio=ratio, seed=1))
        assert int((~scene.labels).sum()) == expected
        assert len(scene.correspondences) == 204 + expected

    def test_correspondence_ids_follow_input_order(self):
        scene = generate_scene(SceneSpec(n_inliers=30, outlier_ratio=0.5, seed=2))
        assert [c.id for c in scene.correspondences] == list(range(len(scene.correspondences)))

    def test_seeded_determinism(self):
        a = generate_scene(SceneSpec(n_inliers=50, outlier_ratio=0.4, seed=3))
        b = generate_scene(SceneSpec(n_inliers=50, outlier_ratio=0.4, seed=3))
        assert np.array_equal(a.labels, b.labels)
        for ca, cb in zip(a.correspondences, b.correspondences):
            assert np.array_equal(ca.p1, cb.p1) and np.array_equal(ca.p2, cb.p2)
        for pa, pb in zip(a.noisy_poses, b.noisy_poses):
            assert np.array_equal(pa.rotation_world_to_camera, pb.rotation_world_to_camera)
            assert np.array_equal(pa.center_world, pb.center_world)
        assert np.array_equal(a.ground_truth_f, b.ground_truth_f)

    def test_seeds_differ(self):
        a = generate_scene(SceneSpec(n_inliers=50, seed=4))
        b = generate_scene(SceneSpec(n_inliers=50, seed=5))
        assert not np.array_equal(a.correspondences[0].p1, b.correspondences[0].p1)

    def test_ground_truth_f_annihilates_noise_free_inliers(self):
        scene = generate_scene(SceneSpec(n_inliers=120, outlier_ratio=0.3, pixel_noise_sigma=0.0, seed=6))
        r = residuals(scene)
        assert np.max(r[scene.labels]) < 1e-9

    def test_outliers_far_from_model(self):
        scene = generate_scene(SceneSpec(n_inliers=120, outlier_ratio=0.5, pixel_noise_sigma=0.0, seed=7))
        r = residuals(scene)
        assert np.median(r[~scene.labels]) > 10.0

    def test_oblique_mount_pitch(self):
        scene = generate_scene(SceneSpec(n_inliers=60, mount_pitch=45.0, pixel_noise_sigma=0.0, seed=8))
        assert np.max(residuals(scene)[scene.labels]) < 1e-9
        # camera 2 is genuinely tilted
        r2 = scene.true_poses[1].rotation_world_to_camera
        assert not np.allclose(r2, NADIR)

    def test_pose_noise_applied(self):
        scene = generate_scene(SceneSpec(n_inliers=20, pose_noise=(2.0, 1.0), seed=9))
        for true, noisy in zip(scene.true_poses, scene.noisy_poses):
            assert not np.allclose(true.center_world, noisy.center_world)
            assert not np.allclose(true.rotation_world_to_camera, noisy.rotation_world_to_camera)

    def test_zero_pose_noise_keeps_true_poses(self):
        scene = generate_scene(SceneSpec(n_inliers=20, pose_noise=(0.0, 0.0), seed=10))
        for true, noisy in zip(scene.true_poses, scene.noisy_poses):
            assert np.array_equal(true.center_world, noisy.center_world)
            assert np.array_equal(true.rotation_world_to_camera, noisy.rotation_world_to_camera)

    def test_impossible_geometry_raises(self):
        # pitch beyond 90 degrees points the second camera at the sky
        with pytest.raises(SceneGenerationError):
            generate_scene(SceneSpec(n_inliers=10, mount_pitch=120.0, seed=11))

    def test_ideal_conditions_degenerate_motions(self):
        # flat scene, exact poses, plane at scene height: motions collapse
        scene = generate_scene(
            SceneSpec(
                n_inliers=60,
                outlier_ratio=0.0,
                terrain_relief_sigma=0.0,
                pose_noise=(0.0, 0.0),
                pixel_noise_sigma=0.0,
                seed=12,
            )
        )
        motions, dropped = generate_motions(
            scene.correspondences, *scene.intrinsics, *scene.true_poses, ProjectionPlane(0.0)
        )
        assert not dropped
        assert max(m.length for m in motions) < 1e-6


class TestFundamentalFromPoses:
    def test_coincident_centers_rejected(self, intr):
        pose = CameraPose(rotation_world_to_camera=NADIR, center_world=[0.0, 0.0, 100.0])
        with pytest.raises(SceneGenerationError):
            fundamental_from_poses(pose, pose, intr, intr)

    def test_rank_two(self, intr):
        pose1 = CameraPose(rotation_world_to_camera=NADIR, center_world=[0.0, 0.0, 100.0])
        pose2 = CameraPose(rotation_world_to_camera=NADIR, center_world=[30.0, 5.0, 100.0])
        f = fundamental_from_poses(pose1, pose2, intr, intr)
        assert abs(np.linalg.det(f)) < 1e-12
        assert np.isclose(np.linalg.norm(f), 1.0)


class TestPrecisionRecall:
    def test_perfect(self):
        labels = np.array([True, False, True, True])
        pr = precision_recall(labels, labels)
        assert pr == (1.0, 1.0, False)

    def test_empty_mask_flagged(self):
        labels = np.array([True, True, False])
        pr = precision_recall(np.zeros(3, bool), labels)
        assert pr.precision == 1.0
        assert pr.recall == 0.0
        assert pr.no_predictions

    def test_arithmetic(self):
        # 9 true positives, 1 false positive, 3 false negatives
        labels = np.array([True] * 12 + [False] * 8)
        mask = np.array([True] * 9 + [False] * 3 + [True] + [False] * 7)
        pr = precision_recall(mask, labels)
        assert pr.precision == pytest.approx(0.9)
        assert pr.recall == pytest.approx(0.75)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            precision_recall([True], [True, False])

    def test_permutation_consistency(self):
        rng = np.random.default_rng(13)
        labels = rng.random(50) < 0.5
        mask = rng.random(50) < 0.6
        base = precision_recall(mask, labels)
        for _ in range(5):
            order = rng.permutation(50)
            assert precision_recall(mask[order], labels[order]) == base
