"""Fit kinematic skeletons to single depth images.

Estimates the pose of an arbitrary articulated object from one depth image
by evolving skeleton poses whose capsule geometry best explains the observed
point cloud. No training data is required: a skeleton spec file describes
the object.
"""

__version__ = "0.1.0"

from posevo.skeleton import (
    JointSpec,
    LinkSpec,
    Skeleton,
    PoseParams,
    PosedModel,
    SceneBox,
    parse_skeleton,
    load_skeleton,
    builtin_skeleton,
    dof_count,
    forward_kinematics,
    random_pose,
    clamp_pose,
)
from posevo.geometry import Capsule, distance_to_capsule, distance_to_model
from posevo.objective import PointCloud, ObjectiveValue, evaluate, evaluate_batch
from posevo.config import EAConfig, load_config
from posevo.options import Optimizer, AccuracyMode
from posevo.hooks import RunHooks
from posevo.stats import RunStats, GenerationRecord
from posevo.result import Individual, OptimizationResult
from posevo.evolution import evolve, hill_climb, optimize
from posevo.errors import (
    PosevoError,
    SkeletonError,
    ConfigError,
    GeometryError,
    EmptyCloudError,
)

__all__ = [
    "JointSpec",
    "LinkSpec",
    "Skeleton",
    "PoseParams",
    "PosedModel",
    "SceneBox",
    "parse_skeleton",
    "load_skeleton",
    "builtin_skeleton",
    "dof_count",
    "forward_kinematics",
    "random_pose",
    "clamp_pose",
    "Capsule",
    "distance_to_capsule",
    "distance_to_model",
    "PointCloud",
    "ObjectiveValue",
    "evaluate",
    "evaluate_batch",
    "EAConfig",
    "load_config",
    "Optimizer",
    "AccuracyMode",
    "RunHooks",
    "RunStats",
    "GenerationRecord",
    "Individual",
    "OptimizationResult",
    "evolve",
    "hill_climb",
    "optimize",
    "PosevoError",
    "SkeletonError",
    "ConfigError",
    "GeometryError",
    "EmptyCloudError",
]
