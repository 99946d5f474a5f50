"""Export run artifacts: pose files, convergence CSVs and PLY point sets."""

import csv
import logging
import typing
from pathlib import Path

import numpy as np
import pydantic

from . import objective as _objective
from . import result as _result
from . import skeleton as _skeleton
from . import stats as _stats

try:
    import open3d  # type: ignore[import-untyped]

    OPEN3D_AVAILABLE = True
except ImportError:
    OPEN3D_AVAILABLE = False

logger = logging.getLogger(__name__)

STATS_COLUMNS = ("generation", "best", "mean", "evals")


class LinkEndpoints(pydantic.BaseModel):
    """World endpoints of one posed link."""

    model_config = pydantic.ConfigDict(frozen=True, extra="forbid")

    link_id: int
    start: tuple[float, float, float]
    end: tuple[float, float, float]


class PoseFile(pydantic.BaseModel):
    """Machine-readable result of a pose estimate (or a ground-truth pose).

    Attributes:
        skeleton: Name of the skeleton the pose belongs to
        theta: Flat pose vector
        endpoints: Forward-kinematics endpoints per link
        objective: Objective value of the pose on its cloud
        seed: Seed of the run (or of the benchmark that produced the truth)
        evaluations: Objective evaluations used, 0 for ground truth
        point_queries: Point-to-model queries used, 0 for ground truth
        optimizer: Optimizer that produced the pose, None for ground truth
    """

    model_config = pydantic.ConfigDict(extra="forbid")

    skeleton: str
    theta: list[float]
    endpoints: list[LinkEndpoints]
    objective: float
    seed: int
    evaluations: int = 0
    point_queries: int = 0
    optimizer: str | None = None

    def pose(self) -> _skeleton.PoseParams:
        return _skeleton.PoseParams(np.array(self.theta))

    def check_against(self, skeleton: _skeleton.Skeleton, tolerance: float = 1e-9) -> None:
        """Verify the file belongs to skeleton and its endpoints match forward kinematics.

        Raises:
            ValueError: On a name, dimension or endpoint mismatch
        """
        if self.skeleton != skeleton.name:
            raise ValueError(
                f"pose file is for skeleton {self.skeleton!r}, not {skeleton.name!r}"
            )
        if len(self.theta) != skeleton.layout.dof:
            raise ValueError(
                f"theta has {len(self.theta)} entries, skeleton needs {skeleton.layout.dof}"
            )
        model = _skeleton.forward_kinematics(skeleton, self.pose())
        starts = np.array([e.start for e in self.endpoints])
        ends = np.array([e.end for e in self.endpoints])
        if (
            starts.shape != model.starts.shape
            or not np.allclose(starts, model.starts, rtol=0, atol=tolerance)
            or not np.allclose(ends, model.ends, rtol=0, atol=tolerance)
        ):
            raise ValueError("endpoints do not match forward kinematics of theta")


def pose_file_for(
    skeleton: _skeleton.Skeleton,
    pose: _skeleton.PoseParams,
    cloud: _objective.PointCloud,
    *,
    seed: int,
    stats: _stats.RunStats | None = None,
) -> PoseFile:
    """Build a PoseFile, computing endpoints and the objective on cloud."""
    model = _skeleton.forward_kinematics(skeleton, pose)
    return PoseFile(
        skeleton=skeleton.name,
        theta=[float(v) for v in pose.theta],
        endpoints=[
            LinkEndpoints(
                link_id=segment.link_id,
                start=tuple(float(v) for v in segment.start),
                end=tuple(float(v) for v in segment.end),
            )
            for segment in model.segments
        ],
        objective=_objective.evaluate(skeleton, pose, cloud).value,
        seed=seed,
        evaluations=stats.evaluations if stats else 0,
        point_queries=stats.point_queries if stats else 0,
        optimizer=stats.optimizer if stats else None,
    )


def pose_file_from_result(
    skeleton: _skeleton.Skeleton,
    result: _result.OptimizationResult,
    cloud: _objective.PointCloud,
    seed: int,
) -> PoseFile:
    return pose_file_for(skeleton, result.best, cloud, seed=seed, stats=result.stats)


def write_pose_file(pose_file: PoseFile, path: str | Path) -> None:
    Path(path).write_text(pose_file.model_dump_json(indent=2) + "\n", encoding="utf-8")
    logger.debug("wrote pose file %s", path)


def read_pose_file(path: str | Path) -> PoseFile:
    """Parse a pose file.

    Raises:
        pydantic.ValidationError: If the file is not a valid pose file
    """
    return PoseFile.model_validate_json(Path(path).read_text(encoding="utf-8"))


def write_stats_csv(stats: _stats.RunStats, path: str | Path) -> None:
    """Write the per-generation log as CSV: generation, best, mean, evals."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(STATS_COLUMNS)
        for row in stats.generations:
            writer.writerow([row.generation, repr(row.best), repr(row.mean), row.evaluations])
    logger.debug("wrote %d generation rows to %s", len(stats.generations), path)


def read_stats_csv(path: str | Path) -> list[_stats.GenerationRecord]:
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        return [
            _stats.GenerationRecord(
                generation=int(row["generation"]),
                best=float(row["best"]),
                mean=float(row["mean"]),
                evaluations=int(row["evals"]),
            )
            for row in reader
        ]


def sample_model_surface(
    model: _skeleton.PosedModel, points_per_link: int = 400, seed: int = 0
) -> np.ndarray:
    """Points spread over every capsule's surface, for visualization."""
    rng = np.random.default_rng(seed)
    samples = []
    for segment in model.segments:
        axis = segment.end - segment.start
        directions = rng.standard_normal((points_per_link, 3))
        directions /= np.linalg.norm(directions, axis=1)[:, None]
        t = rng.uniform(0.0, 1.0, points_per_link)[:, None]
        # project onto the plane normal to the axis for body points
        length = np.linalg.norm(axis)
        if length > 0:
            unit = axis / length
            radial = directions - (directions @ unit)[:, None] * unit
            norms = np.linalg.norm(radial, axis=1)[:, None]
            radial = np.divide(radial, norms, out=directions.copy(), where=norms > 0)
        else:
            radial = directions
        samples.append(segment.start + t * axis + segment.radius * radial)
    return np.concatenate(samples)


def export_ply(
    path: str | Path,
    cloud: _objective.PointCloud,
    model: _skeleton.PosedModel,
    *,
    cloud_color: typing.Sequence[float] = (0.6, 0.6, 0.6),
    model_color: typing.Sequence[float] = (0.9, 0.2, 0.1),
) -> None:
    """Write the cloud and the posed model's surface as one colored PLY point set.

    Raises:
        ImportError: If open3d is not installed
    """
    if not OPEN3D_AVAILABLE:
        raise ImportError(
            "PLY export requires 'open3d'. Install with: pip install posevo[viz]"
        )
    surface = sample_model_surface(model)
    points = np.concatenate([cloud.points, surface])
    colors = np.concatenate(
        [
            np.tile(np.asarray(cloud_color, dtype=np.float64), (len(cloud), 1)),
            np.tile(np.asarray(model_color, dtype=np.float64), (len(surface), 1)),
        ]
    )
    pcd = open3d.geometry.PointCloud()
    pcd.points = open3d.utility.Vector3dVector(points)
    pcd.colors = open3d.utility.Vector3dVector(colors)
    if not open3d.io.write_point_cloud(str(path), pcd, write_ascii=True):
        raise OSError(f"open3d could not write {path}")
    logger.info("exported %d points to %s", len(points), path)
