"""Depth image and point cloud file formats.

Depth images are 16-bit binary PGM files (P5, maxval 65535, big-endian
samples) holding millimeters, 0 meaning no reading. Camera intrinsics live
in a sidecar ``<name>.intr`` holding ``fx fy cx cy``. Clouds are plain
``.xyz`` text with one ``x y z`` triple per line, in meters.
"""

import dataclasses
import logging
import math
import re
from pathlib import Path

import cv2
import numpy as np

from . import arrays as _arrays
from . import errors as _errors
from . import objective as _objective

logger = logging.getLogger(__name__)

PGM_MAXVAL = 65535
_PGM_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")
_PGM_HEADER_PEEK = 4096


@dataclasses.dataclass(frozen=True)
class Intrinsics:
    """Pinhole camera intrinsics in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self) -> None:
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx} fy={self.fy}")
        if not all(np.isfinite([self.fx, self.fy, self.cx, self.cy])):
            raise ValueError("intrinsics must be finite")

    def rays(self, width: int, height: int) -> _arrays.Points:
        """Unnormalized pixel rays (x, y, 1), row-major, shape (height * width, 3)."""
        v, u = np.mgrid[0:height, 0:width]
        rays = np.empty((height, width, 3))
        rays[..., 0] = (u - self.cx) / self.fx
        rays[..., 1] = (v - self.cy) / self.fy
        rays[..., 2] = 1.0
        return rays.reshape(-1, 3)

    def to_text(self) -> str:
        return f"{self.fx!r} {self.fy!r} {self.cx!r} {self.cy!r}\n"


@dataclasses.dataclass(frozen=True, eq=False)
class DepthImage:
    """Depth map in millimeters with the intrinsics of the camera that took it.

    Attributes:
        depth: uint16 array of shape (height, width), 0 where invalid
        intrinsics: Pinhole intrinsics
    """

    depth: np.ndarray
    intrinsics: Intrinsics

    def __post_init__(self) -> None:
        depth = np.asarray(self.depth)
        if depth.ndim != 2:
            raise ValueError(f"depth must be 2-D, got shape {depth.shape}")
        if depth.dtype != np.uint16:
            if depth.size and (np.min(depth) < 0 or np.max(depth) > PGM_MAXVAL):
                raise ValueError("depth values must lie in [0, 65535]")
            depth = depth.astype(np.uint16)
        object.__setattr__(self, "depth", depth)

    @property
    def width(self) -> int:
        return int(self.depth.shape[1])

    @property
    def height(self) -> int:
        return int(self.depth.shape[0])


def intrinsics_path(path: str | Path) -> Path:
    """Sidecar path of a depth image: same name with the .intr suffix."""
    return Path(path).with_suffix(".intr")


def load_intrinsics(path: str | Path) -> Intrinsics:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise _errors.DepthFormatError(f"missing intrinsics sidecar {path}") from None
    tokens = text.split()
    if len(tokens) != 4:
        raise _errors.DepthFormatError(
            f"{path}: expected 4 numbers 'fx fy cx cy', found {len(tokens)}"
        )
    try:
        return Intrinsics(*(float(token) for token in tokens))
    except ValueError as e:
        raise _errors.DepthFormatError(f"{path}: {e}") from e


def save_intrinsics(intrinsics: Intrinsics, path: str | Path) -> None:
    Path(path).write_text(intrinsics.to_text(), encoding="utf-8")


def _check_pgm_header(path: Path) -> tuple[int, int]:
    """Validate the PGM header and payload size; return (width, height)."""
    with path.open("rb") as handle:
        head = handle.read(_PGM_HEADER_PEEK)
    position = 0
    header = []
    for _ in range(4):
        match = _PGM_TOKEN.match(head, position)
        if match is None:
            raise _errors.DepthFormatError(f"{path}: truncated PGM header")
        header.append(match.group(1))
        position = match.end()
    magic, *numbers = header
    if magic != b"P5":
        raise _errors.DepthFormatError(f"{path}: bad magic {magic!r}, expected b'P5'")
    try:
        width, height, maxval = (int(n) for n in numbers)
    except ValueError:
        raise _errors.DepthFormatError(f"{path}: malformed PGM header") from None
    if maxval != PGM_MAXVAL:
        raise _errors.DepthFormatError(
            f"{path}: maxval {maxval} unsupported, expected {PGM_MAXVAL}"
        )
    if width <= 0 or height <= 0:
        raise _errors.DepthFormatError(f"{path}: invalid size {width}x{height}")
    # one whitespace byte separates the header from the samples
    expected = width * height * 2
    available = path.stat().st_size - (position + 1)
    if available < expected:
        raise _errors.DepthFormatError(
            f"{path}: truncated payload, expected {expected} bytes, got {max(available, 0)}"
        )
    return width, height


def load_depth(path: str | Path) -> DepthImage:
    """Read a 16-bit PGM depth image and its intrinsics sidecar.

    Raises:
        DepthFormatError: On bad magic, maxval other than 65535, truncated
            payload, an undecodable image or a missing/invalid sidecar
    """
    path = Path(path)
    width, height = _check_pgm_header(path)
    depth = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if depth is None or depth.dtype != np.uint16:
        raise _errors.DepthFormatError(f"{path}: not a 16-bit depth image")
    if depth.shape != (height, width):
        raise _errors.DepthFormatError(
            f"{path}: decoded shape {depth.shape} does not match header {width}x{height}"
        )
    intrinsics = load_intrinsics(intrinsics_path(path))
    logger.debug("loaded %dx%d depth image from %s", width, height, path)
    return DepthImage(depth, intrinsics)


def save_depth(image: DepthImage, path: str | Path) -> None:
    """Write a depth image as 16-bit PGM plus its intrinsics sidecar."""
    path = Path(path)
    ok, encoded = cv2.imencode(".pgm", image.depth, [cv2.IMWRITE_PXM_BINARY, 1])
    if not ok:
        raise OSError(f"could not encode depth image {path}")
    path.write_bytes(encoded.tobytes())
    save_intrinsics(image.intrinsics, intrinsics_path(path))
    logger.debug("wrote depth image %s", path)


def background_subtract(image: DepthImage, far_mm: float) -> np.ndarray:
    """Foreground mask: valid pixels closer than the far plane.

    Args:
        image: Depth image
        far_mm: Far-plane threshold in millimeters, > 0

    Returns:
        Boolean array shaped like the image
    """
    if not far_mm > 0:
        raise ValueError(f"far_mm must be positive, got {far_mm}")
    return (image.depth > 0) & (image.depth < far_mm)


def back_project(
    pixels_uv: _arrays.FloatArray, depth_m: _arrays.FloatArray, intrinsics: Intrinsics
) -> _arrays.Points:
    """Pinhole back-projection of pixel coordinates with metric depth."""
    pixels_uv = np.asarray(pixels_uv, dtype=np.float64).reshape(-1, 2)
    z = np.asarray(depth_m, dtype=np.float64).reshape(-1)
    points = np.empty((len(z), 3))
    points[:, 0] = z * ((pixels_uv[:, 0] - intrinsics.cx) / intrinsics.fx)
    points[:, 1] = z * ((pixels_uv[:, 1] - intrinsics.cy) / intrinsics.fy)
    points[:, 2] = z
    return points


def project_points(points: _arrays.PointLike, intrinsics: Intrinsics) -> _arrays.FloatArray:
    """Pixel coordinates (u, v) of camera-frame points."""
    points = _arrays.as_points(points)
    u = intrinsics.fx * points[:, 0] / points[:, 2] + intrinsics.cx
    v = intrinsics.fy * points[:, 1] / points[:, 2] + intrinsics.cy
    return np.stack([u, v], axis=1)


def to_point_cloud(
    image: DepthImage, mask: np.ndarray, *, sigma: float | None = None
) -> _objective.PointCloud:
    """Back-project the masked pixels into a metric point cloud (+z into the scene).

    Raises:
        EmptyCloudError: If no valid pixel is selected
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != image.depth.shape:
        raise ValueError(
            f"mask shape {mask.shape} does not match image shape {image.depth.shape}"
        )
    mask = mask & (image.depth > 0)
    v, u = np.nonzero(mask)
    if len(u) == 0:
        raise _errors.EmptyCloudError("no foreground pixels to back-project")
    depth_m = image.depth[v, u].astype(np.float64) / 1000.0
    points = back_project(np.stack([u, v], axis=1), depth_m, image.intrinsics)
    return _objective.PointCloud(points, sigma)


def load_xyz(path: str | Path) -> _objective.PointCloud:
    """Read a cloud from `x y z` lines; blank lines and '#' comments are skipped.

    Raises:
        CloudFormatError: On a malformed line, with its line number
        EmptyCloudError: If the file holds no points
    """
    path = Path(path)
    rows = []
    with path.open(encoding="utf-8") as handle:
        for number, line in enumerate(handle, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            tokens = text.split()
            if len(tokens) != 3:
                raise _errors.CloudFormatError(
                    f"expected 3 coordinates, got {len(tokens)}", number
                )
            try:
                row = [float(token) for token in tokens]
            except ValueError:
                bad = next(t for t in tokens if not _is_number(t))
                raise _errors.CloudFormatError(
                    f"non-numeric token {bad!r}", number
                ) from None
            if not all(math.isfinite(value) for value in row):
                bad = next(t for t, value in zip(tokens, row) if not math.isfinite(value))
                raise _errors.CloudFormatError(f"non-finite coordinate {bad!r}", number)
            rows.append(row)
    if not rows:
        raise _errors.EmptyCloudError(f"{path} holds no points")
    logger.debug("loaded %d points from %s", len(rows), path)
    return _objective.PointCloud(np.array(rows))


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def save_xyz(cloud: _objective.PointCloud, path: str | Path) -> None:
    """Write a cloud as `x y z` lines with 9 significant digits."""
    np.savetxt(Path(path), cloud.points, fmt="%.9g", delimiter=" ", newline="\n")
    logger.debug("wrote %d points to %s", len(cloud), path)
