"""Tests for the fitting objective."""

import math

import numpy as np
import pytest

from posevo import objective as obj
from posevo import skeleton as sk
from posevo.errors import BatchEvaluationError, EmptyCloudError


def test_sigma_is_std_of_centroid_distances():
    points = np.array([[1.0, 0, 0], [-1.0, 0, 0], [0, 3.0, 0], [0, -3.0, 0]])
    # centroid at origin, distances 1, 1, 3, 3
    assert obj.compute_sigma(points) == pytest.approx(1.0)


def test_sigma_floor_for_single_point():
    cloud = obj.PointCloud([[0.1, 0.2, 0.3]])
    assert cloud.sigma == obj.SIGMA_FLOOR


def test_empty_cloud_rejected():
    with pytest.raises(EmptyCloudError):
        obj.PointCloud(np.zeros((0, 3)))


def test_non_finite_cloud_rejected():
    with pytest.raises(ValueError, match="non-finite"):
        obj.PointCloud([[0.0, np.inf, 0.0]])


def test_with_sigma_overrides(planar4_cloud):
    assert planar4_cloud.with_sigma(0.5).sigma == 0.5
    assert len(planar4_cloud.with_sigma(0.5)) == len(planar4_cloud)


def test_true_pose_scores_near_zero(planar4, planar4_truth, planar4_cloud):
    value = obj.evaluate(planar4, planar4_truth, planar4_cloud)
    assert value.value < 1e-9
    assert value.evaluations == len(planar4_cloud)


def test_objective_is_mean_log_distance(chain2):
    """Test the value on hand-placed points."""
    pose = sk.PoseParams.neutral(chain2)
    # links lie on the x axis from 0 to 0.2 with radius 0.01
    points = np.array([[0.05, 0.11, 0.0], [0.15, 0.0, 0.21], [0.1, 0.0, 0.0]])
    cloud = obj.PointCloud(points, sigma=0.1)
    expected = (math.log1p(1.0) + math.log1p(2.0) + 0.0) / 3
    assert obj.evaluate(chain2, pose, cloud).value == pytest.approx(expected)


def test_point_at_sigma_scores_log_two(chain2):
    pose = sk.PoseParams.neutral(chain2)
    cloud = obj.PointCloud([[0.1, 0.26, 0.0]], sigma=0.25)
    assert obj.evaluate(chain2, pose, cloud).value == pytest.approx(math.log(2.0), abs=1e-9)


def test_objective_is_scale_invariant(rng):
    """Test scaling skeleton, pose and cloud together leaves the value unchanged."""
    import json

    from conftest import chain_document

    small = sk.parse_skeleton(json.dumps(chain_document(3, length=0.1, radius=0.01)))
    large = sk.parse_skeleton(json.dumps(chain_document(3, length=0.2, radius=0.02)))
    for _ in range(10):
        pose = sk.random_pose(small, rng, sk.SceneBox.cube(0.1))
        points = rng.uniform(-0.3, 0.3, (40, 3))
        theta = pose.theta.copy()
        theta[sk.ROOT_POSITION] *= 2
        value = obj.evaluate(small, pose, obj.PointCloud(points)).value
        scaled = obj.evaluate(large, sk.PoseParams(theta), obj.PointCloud(2 * points)).value
        assert scaled == pytest.approx(value, abs=1e-12)


def test_far_pose_scores_worse(planar4, planar4_truth, planar4_cloud):
    theta = planar4_truth.theta.copy()
    theta[sk.ROOT_POSITION] += [0.5, 0.0, 0.0]
    moved = obj.evaluate(planar4, sk.PoseParams(theta), planar4_cloud)
    assert moved.value > obj.evaluate(planar4, planar4_truth, planar4_cloud).value + 0.1


def test_evaluation_is_reproducible(spider, rng):
    cloud = obj.PointCloud(rng.uniform(-0.1, 0.1, (200, 3)))
    pose = sk.random_pose(spider, rng, sk.SceneBox.cube(0.05))
    assert obj.evaluate(spider, pose, cloud) == obj.evaluate(spider, pose, cloud)


@pytest.mark.parametrize("workers", [1, 4])
def test_batch_matches_single_evaluations(spider, rng, workers):
    cloud = obj.PointCloud(rng.uniform(-0.1, 0.1, (100, 3)))
    poses = [sk.random_pose(spider, rng, sk.SceneBox.cube(0.05)) for _ in range(64)]
    batch = obj.evaluate_batch(spider, poses, cloud, workers=workers)
    assert batch == [obj.evaluate(spider, pose, cloud) for pose in poses]


def test_batch_reports_failing_index(chain2, spider):
    cloud = obj.PointCloud([[0.0, 0.0, 0.0], [0.1, 0.0, 0.0]])
    poses = [sk.PoseParams.neutral(chain2), sk.PoseParams.neutral(spider)]
    with pytest.raises(BatchEvaluationError) as exc_info:
        obj.evaluate_batch(chain2, poses, cloud)
    assert exc_info.value.index == 1
