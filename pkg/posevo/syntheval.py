"""Synthetic depth renders of posed skeletons and link-placement scoring.

Rendering casts one pinhole ray per pixel against every capsule and keeps
the nearest hit, so self-occlusion falls out of the z-buffer. Depths are
quantized to whole millimeters exactly like a depth file on disk.
"""

import dataclasses
import logging
import math
import typing as _t
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import arrays as _arrays
from . import depthio as _depthio
from . import errors as _errors
from . import export as _export
from . import geometry as _geometry
from . import objective as _objective
from . import options as _options
from . import skeleton as _skeleton

logger = logging.getLogger(__name__)

MAX_ELEVATION_DEG = 60.0
DEFAULT_THRESHOLD_FRACTION = 0.25
# Kinect depth intrinsics scaled to 160 x 120
DEFAULT_INTRINSICS = _depthio.Intrinsics(fx=131.25, fy=131.25, cx=79.5, cy=59.5)
DEFAULT_RESOLUTION = (160, 120)


@dataclasses.dataclass(frozen=True, eq=False)
class CameraSpec:
    """Pinhole camera with a world-to-camera rigid transform.

    Camera frame: +z along the optical axis, +x right, +y down.

    Attributes:
        intrinsics: Focal lengths and principal point in pixels
        width: Image width in pixels
        height: Image height in pixels
        rotation: 3x3 world-to-camera rotation
        translation: World-to-camera translation in meters
    """

    intrinsics: _depthio.Intrinsics
    width: int
    height: int
    rotation: _arrays.FloatArray = dataclasses.field(default_factory=lambda: np.eye(3))
    translation: _arrays.Point3 = dataclasses.field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"resolution must be positive, got {self.width}x{self.height}")
        rotation = np.array(self.rotation, dtype=np.float64).reshape(3, 3)
        translation = np.array(self.translation, dtype=np.float64).reshape(3)
        object.__setattr__(self, "rotation", _arrays.frozen(rotation))
        object.__setattr__(self, "translation", _arrays.frozen(translation))

    @classmethod
    def looking_at(
        cls,
        target: _arrays.PointLike,
        distance: float,
        elevation_deg: float,
        azimuth_deg: float = 0.0,
        *,
        intrinsics: _depthio.Intrinsics = DEFAULT_INTRINSICS,
        resolution: tuple[int, int] = DEFAULT_RESOLUTION,
    ) -> "CameraSpec":
        """Camera on a sphere around target, world +z up, aimed at target."""
        target = np.asarray(target, dtype=np.float64)
        elevation = math.radians(elevation_deg)
        azimuth = math.radians(azimuth_deg)
        offset = distance * np.array(
            [
                math.cos(elevation) * math.cos(azimuth),
                math.cos(elevation) * math.sin(azimuth),
                math.sin(elevation),
            ]
        )
        eye = target + offset
        forward = -offset / np.linalg.norm(offset)
        right = np.cross(forward, [0.0, 0.0, 1.0])
        right /= np.linalg.norm(right)
        down = np.cross(forward, right)
        rotation = np.stack([right, down, forward])
        return cls(
            intrinsics,
            resolution[0],
            resolution[1],
            rotation=rotation,
            translation=-rotation @ eye,
        )

    def to_camera(self, points: _arrays.PointLike) -> _arrays.Points:
        return _arrays.as_points(points) @ self.rotation.T + self.translation


def render_depth(model_in_camera: _skeleton.PosedModel, camera: CameraSpec) -> np.ndarray:
    """Millimeter depth map of a camera-frame model; 0 where no capsule is hit."""
    rays = camera.intrinsics.rays(camera.width, camera.height)
    norms = np.sqrt(_arrays.dot3(rays, rays))
    directions = rays / norms[:, None]
    nearest = np.full(len(rays), np.inf)
    for capsule in _geometry.model_capsules(model_in_camera):
        nearest = np.minimum(nearest, _geometry.ray_capsule_intersections(directions, capsule))
    hit = np.isfinite(nearest)
    # depth along the optical axis: t * (unit ray z) = t / |ray|
    z_mm = np.zeros(len(rays))
    z_mm[hit] = np.rint(nearest[hit] / norms[hit] * 1000.0)
    too_far = z_mm > _depthio.PGM_MAXVAL
    if np.any(too_far):
        logger.warning("%d pixels beyond the 16-bit depth range dropped", int(too_far.sum()))
        z_mm[too_far] = 0
    return z_mm.reshape(camera.height, camera.width).astype(np.uint16)


def render_cloud(
    skeleton: _skeleton.Skeleton,
    pose: _skeleton.PoseParams,
    camera: CameraSpec,
) -> tuple[_depthio.DepthImage, _objective.PointCloud]:
    """Render a posed skeleton to a depth image and its back-projected cloud.

    The pose is given in the world frame; the cloud is in the camera frame.

    Raises:
        RenderError: If no pixel sees the model (e.g. it is behind the camera)
    """
    model = _skeleton.forward_kinematics(skeleton, pose).transformed(
        camera.rotation, camera.translation
    )
    image = _depthio.DepthImage(render_depth(model, camera), camera.intrinsics)
    mask = image.depth > 0
    if not mask.any():
        raise _errors.RenderError("the model is not visible from the camera")
    return image, _depthio.to_point_cloud(image, mask)


def add_noise(
    cloud: _objective.PointCloud, depth_sigma_mm: float, rng: np.random.Generator
) -> _objective.PointCloud:
    """Displace every point along its viewing ray by Gaussian noise.

    Args:
        cloud: Camera-frame cloud
        depth_sigma_mm: Noise standard deviation in millimeters, >= 0
        rng: Random generator

    Returns:
        Noisy cloud with sigma recomputed; the input itself when depth_sigma_mm is 0
    """
    if depth_sigma_mm < 0:
        raise ValueError(f"depth_sigma_mm must be non-negative, got {depth_sigma_mm}")
    if depth_sigma_mm == 0:
        return cloud
    points = cloud.points
    directions = points / np.sqrt(_arrays.dot3(points, points))[:, None]
    shift = rng.normal(0.0, depth_sigma_mm / 1000.0, size=len(points))
    return _objective.PointCloud(points + shift[:, None] * directions)


@dataclasses.dataclass(frozen=True)
class AccuracyReport:
    """Link-placement accuracy of an estimate against ground truth.

    Attributes:
        endpoint_errors: Shape (links, 2), start and end errors in meters
        correct: Per-link flag, both endpoint errors within threshold
        fraction_correct: Share of correct links in [0, 1]
        threshold: Threshold in meters
        mode: How estimated links were matched to true links
        matching: For each true link position, the estimated link position used
    """

    endpoint_errors: np.ndarray
    correct: np.ndarray
    fraction_correct: float
    threshold: float
    mode: _options.AccuracyMode = _options.AccuracyMode.STRICT
    matching: tuple[int, ...] = ()


def default_threshold(truth: _skeleton.PosedModel, fraction: float = DEFAULT_THRESHOLD_FRACTION) -> float:
    """fraction x mean link length of the true model."""
    return float(fraction * np.mean(truth.lengths))


def _endpoint_errors(
    estimated: _skeleton.PosedModel, truth: _skeleton.PosedModel, matching: np.ndarray
) -> np.ndarray:
    start = estimated.starts[matching] - truth.starts
    end = estimated.ends[matching] - truth.ends
    return np.stack(
        [np.sqrt(_arrays.dot3(start, start)), np.sqrt(_arrays.dot3(end, end))], axis=1
    )


def _best_matching(
    estimated: _skeleton.PosedModel,
    truth: _skeleton.PosedModel,
    threshold: float,
    symmetry_groups: _t.Sequence[_t.Sequence[_t.Sequence[int]]],
) -> np.ndarray:
    positions = {link_id: i for i, link_id in enumerate(truth.link_ids)}
    matching = np.arange(len(truth))
    identity = np.arange(len(truth))
    for group in symmetry_groups:
        chains = [np.array([positions[i] for i in chain]) for chain in group]
        # score[i, j]: correct links when true chain i is matched by estimated chain j
        score = np.zeros((len(chains), len(chains)))
        for i, true_chain in enumerate(chains):
            for j, est_chain in enumerate(chains):
                trial = identity.copy()
                trial[true_chain] = est_chain
                errors = _endpoint_errors(estimated, truth, trial)[true_chain]
                score[i, j] = np.sum(np.all(errors <= threshold, axis=1))
        rows, cols = linear_sum_assignment(score, maximize=True)
        for i, j in zip(rows, cols):
            matching[chains[i]] = chains[j]
    return matching


def link_accuracy(
    estimated: _skeleton.PosedModel,
    truth: _skeleton.PosedModel,
    threshold: float,
    *,
    symmetry_groups: _t.Sequence[_t.Sequence[_t.Sequence[int]]] = (),
) -> AccuracyReport:
    """Fraction of links whose two endpoints both lie within threshold of the truth.

    Args:
        estimated: Estimated posed model
        truth: Ground-truth posed model of the same skeleton
        threshold: Distance in meters, > 0
        symmetry_groups: Interchangeable chains; when given, each group's
            chains are matched to maximize correct links

    Raises:
        ModelMismatchError: If the models have different link counts
    """
    if len(estimated) != len(truth):
        raise _errors.ModelMismatchError(
            f"estimated model has {len(estimated)} links, truth has {len(truth)}"
        )
    if not threshold > 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    if symmetry_groups:
        matching = _best_matching(estimated, truth, threshold, symmetry_groups)
        mode = _options.AccuracyMode.BEST_PERMUTATION
    else:
        matching = np.arange(len(truth))
        mode = _options.AccuracyMode.STRICT
    errors = _endpoint_errors(estimated, truth, matching)
    correct = np.all(errors <= threshold, axis=1)
    return AccuracyReport(
        endpoint_errors=errors,
        correct=correct,
        fraction_correct=float(np.mean(correct)),
        threshold=float(threshold),
        mode=mode,
        matching=tuple(int(i) for i in matching),
    )


@dataclasses.dataclass(frozen=True)
class BenchmarkCase:
    """One rendered view: cloud file, ground-truth pose file and intrinsics file."""

    cloud: Path
    truth: Path
    intrinsics: Path

    @property
    def name(self) -> str:
        return self.cloud.stem


@dataclasses.dataclass(frozen=True)
class BenchmarkManifest:
    """Ordered list of benchmark cases; paths are relative to the manifest's folder."""

    cases: tuple[BenchmarkCase, ...]

    def __len__(self) -> int:
        return len(self.cases)

    def __iter__(self) -> _t.Iterator[BenchmarkCase]:
        return iter(self.cases)


def write_manifest(manifest: BenchmarkManifest, path: str | Path) -> None:
    path = Path(path)
    lines = []
    for case in manifest.cases:
        fields = [case.cloud, case.truth, case.intrinsics]
        lines.append(" ".join(_relative(p, path.parent) for p in fields))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _relative(path: Path, base: Path) -> str:
    try:
        return path.relative_to(base).as_posix()
    except ValueError:
        return path.as_posix()


def read_manifest(path: str | Path) -> BenchmarkManifest:
    """Read a manifest; each line is `<cloud.xyz> <truth_pose.json> <camera.intr>`.

    Raises:
        ValueError: On a line without exactly three fields
    """
    path = Path(path)
    cases = []
    for number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        fields = text.split()
        if len(fields) != 3:
            raise ValueError(f"{path}:{number}: expected 3 fields, got {len(fields)}")
        cloud, truth, intrinsics = (path.parent / field for field in fields)
        cases.append(BenchmarkCase(cloud, truth, intrinsics))
    return BenchmarkManifest(tuple(cases))


def skeleton_reach(skeleton: _skeleton.Skeleton) -> float:
    """Longest root-to-leaf chain of maximal link lengths, plus radii, in meters."""
    layout = skeleton.layout
    maximal = layout.default_lengths.copy()
    for i, index in enumerate(layout.length_indices):
        if index is not None:
            maximal[i] = layout.upper[index]
    reach = np.zeros(len(skeleton.links))
    for i in range(len(skeleton.links)):
        parent = layout.parents[i]
        reach[i] = maximal[i] + (reach[parent] if parent >= 0 else 0.0)
    return float(reach.max() + 2 * layout.radii.max())


def view_elevations(n_views: int) -> list[float]:
    """Evenly spaced elevation angles over [0, 60] degrees."""
    if n_views == 1:
        return [0.0]
    return [MAX_ELEVATION_DEG * k / (n_views - 1) for k in range(n_views)]


def make_benchmark(
    skeleton: _skeleton.Skeleton,
    n_poses: int,
    n_views: int,
    seed: int,
    outdir: str | Path,
    *,
    noise_mm: float = 0.0,
    distance: float | None = None,
    intrinsics: _depthio.Intrinsics = DEFAULT_INTRINSICS,
    resolution: tuple[int, int] = DEFAULT_RESOLUTION,
) -> BenchmarkManifest:
    """Render n_poses random poses from n_views inclinations and write a manifest.

    For each case the folder receives ``case_PPP_VV.xyz`` (cloud),
    ``case_PPP_VV.pgm`` with its ``.intr`` sidecar (depth image) and
    ``case_PPP_VV_truth.json`` (ground-truth pose in the camera frame),
    plus ``manifest.txt`` listing all cases.

    Args:
        skeleton: Skeleton to pose
        n_poses: Number of random poses, > 0
        n_views: Views per pose at evenly spaced elevations in [0, 60] degrees, > 0
        seed: Seed of the only random generator
        outdir: Output folder, created if missing
        noise_mm: Optional depth noise along viewing rays
        distance: Camera distance in meters (derived from the skeleton's reach if None)
        intrinsics: Camera intrinsics
        resolution: (width, height) in pixels

    Returns:
        The written BenchmarkManifest
    """
    if n_poses <= 0 or n_views <= 0:
        raise ValueError("n_poses and n_views must be positive")
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    reach = skeleton_reach(skeleton)
    distance = distance if distance is not None else 0.5 + 2.0 * reach
    root_box = _skeleton.SceneBox.cube(0.05 * reach)
    cases = []
    for p in range(n_poses):
        pose = _skeleton.random_pose(skeleton, rng, root_box)
        azimuth = float(rng.uniform(0.0, 360.0))
        for v, elevation in enumerate(view_elevations(n_views)):
            camera = CameraSpec.looking_at(
                np.zeros(3), distance, elevation, azimuth,
                intrinsics=intrinsics, resolution=resolution,
            )
            image, cloud = render_cloud(skeleton, pose, camera)
            cloud = add_noise(cloud, noise_mm, rng)
            truth = _skeleton.transform_pose(pose, camera.rotation, camera.translation)
            stem = f"case_{p:03d}_{v:02d}"
            case = BenchmarkCase(
                outdir / f"{stem}.xyz", outdir / f"{stem}_truth.json", outdir / f"{stem}.intr"
            )
            _depthio.save_xyz(cloud, case.cloud)
            _depthio.save_depth(image, outdir / f"{stem}.pgm")
            _export.write_pose_file(
                _export.pose_file_for(skeleton, truth, cloud, seed=seed), case.truth
            )
            cases.append(case)
            logger.debug("rendered %s: %d points", stem, len(cloud))
    manifest = BenchmarkManifest(tuple(cases))
    write_manifest(manifest, outdir / "manifest.txt")
    logger.info("wrote %d benchmark cases to %s", len(manifest), outdir)
    return manifest
