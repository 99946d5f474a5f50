"""Robust mean-log fitting objective of a posed skeleton against a point cloud.

For a cloud of N points and per-point model distances d_n::

    value = (1/N) * sum(ln(1 + d_n / sigma))

where sigma is the population standard deviation of the points' distances
to the cloud centroid. The logarithm makes far outliers cost little more
than moderately distant points.
"""

import dataclasses
import logging
import typing as _t
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import arrays as _arrays
from . import errors as _errors
from . import geometry as _geometry
from . import skeleton as _skeleton

logger = logging.getLogger(__name__)

SIGMA_FLOOR = 1e-6


class ObjectiveValue(_t.NamedTuple):
    """Result of one objective evaluation.

    Attributes:
        value: Mean log-distance loss in nats, non-negative
        evaluations: Number of point-to-model distance queries performed
    """

    value: float
    evaluations: int


def compute_sigma(points: _arrays.PointLike) -> float:
    """Population std of the points' distances to their centroid, floored at 1e-6 m.

    Raises:
        EmptyCloudError: If there are no points
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(points) == 0:
        raise _errors.EmptyCloudError("cannot compute sigma of an empty cloud")
    offsets = points - points.mean(axis=0)
    distances = np.sqrt(_arrays.dot3(offsets, offsets))
    return max(float(np.std(distances)), SIGMA_FLOOR)


@dataclasses.dataclass(frozen=True, eq=False)
class PointCloud:
    """Observed 3D points in meters with their cached sigma statistic.

    Attributes:
        points: Array of shape (N, 3), N >= 1, all finite
        sigma: Normalizing scale in meters; computed from the points if omitted
    """

    points: _arrays.Points
    sigma: float = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        points = np.array(self.points, dtype=np.float64)
        if points.size == 0:
            raise _errors.EmptyCloudError("a point cloud needs at least one point")
        points = _arrays.as_points(points)
        if not np.all(np.isfinite(points)):
            raise ValueError("point cloud contains non-finite coordinates")
        object.__setattr__(self, "points", _arrays.frozen(points))
        if self.sigma is None:
            object.__setattr__(self, "sigma", compute_sigma(points))
        elif not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        else:
            object.__setattr__(self, "sigma", max(float(self.sigma), SIGMA_FLOOR))

    def __len__(self) -> int:
        return len(self.points)

    def __repr__(self) -> str:
        return f"PointCloud(n={len(self.points)}, sigma={self.sigma:.6g})"

    def with_sigma(self, sigma: float) -> "PointCloud":
        """Same points with sigma overridden."""
        return PointCloud(self.points, sigma)

    def bounding_box(self, padding: float = 0.0) -> _skeleton.SceneBox:
        return _skeleton.SceneBox.around(self.points, padding)


def point_losses(
    skeleton: _skeleton.Skeleton, pose: _skeleton.PoseParams, cloud: PointCloud
) -> _arrays.FloatArray:
    """Per-point terms ln(1 + d_n / sigma), in cloud order."""
    model = _skeleton.forward_kinematics(skeleton, pose)
    distances, _ = _geometry.point_model_distances(cloud.points, model)
    return np.log1p(distances / cloud.sigma)


def evaluate(
    skeleton: _skeleton.Skeleton, pose: _skeleton.PoseParams, cloud: PointCloud
) -> ObjectiveValue:
    """Evaluate the fitting objective of one pose.

    Forward kinematics runs once; the terms are summed in a fixed order so
    the result is reproducible bit for bit.

    Args:
        skeleton: Skeleton being fitted
        pose: Candidate pose
        cloud: Observed points

    Returns:
        ObjectiveValue with the loss and the number of point queries

    Raises:
        PoseError: If the pose does not match the skeleton or is not finite
    """
    losses = point_losses(skeleton, pose, cloud)
    return ObjectiveValue(float(np.mean(losses)), len(losses))


def evaluate_batch(
    skeleton: _skeleton.Skeleton,
    poses: _t.Sequence[_skeleton.PoseParams],
    cloud: PointCloud,
    *,
    workers: int = 1,
) -> list[ObjectiveValue]:
    """Evaluate many poses; element i equals evaluate(skeleton, poses[i], cloud).

    Args:
        skeleton: Skeleton being fitted
        poses: Candidate poses
        cloud: Observed points
        workers: Threads to spread the poses over (1 runs sequentially)

    Returns:
        One ObjectiveValue per pose, in input order

    Raises:
        BatchEvaluationError: If a pose fails, carrying its index
    """

    def run(index: int) -> ObjectiveValue:
        try:
            return evaluate(skeleton, poses[index], cloud)
        except _errors.PosevoError as e:
            raise _errors.BatchEvaluationError(index, e) from e

    if workers <= 1 or len(poses) <= 1:
        return [run(i) for i in range(len(poses))]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, range(len(poses))))
