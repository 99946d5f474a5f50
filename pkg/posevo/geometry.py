"""Analytic distance and ray queries against capsules.

The single-point functions and the vectorized ``point_model_distances`` share
the same arithmetic, so the batch path reproduces the per-point scan bit for
bit.
"""

import dataclasses
import typing as _t

import numpy as np

from . import arrays as _arrays
from . import errors as _errors
from . import skeleton as _skeleton


@dataclasses.dataclass(frozen=True)
class Capsule:
    """Points within radius of the segment a-b; a sphere when a == b."""

    a: _arrays.Point3
    b: _arrays.Point3
    radius: float

    def __post_init__(self) -> None:
        if not self.radius > 0:
            raise _errors.GeometryError(f"capsule radius must be positive, got {self.radius}")
        object.__setattr__(self, "a", _arrays.frozen(np.array(self.a, dtype=np.float64)))
        object.__setattr__(self, "b", _arrays.frozen(np.array(self.b, dtype=np.float64)))

    @classmethod
    def of_segment(cls, segment: _skeleton.Segment) -> "Capsule":
        return cls(segment.start, segment.end, segment.radius)


def _segment_parameter(
    p: _arrays.FloatArray, a: _arrays.FloatArray, b: _arrays.FloatArray
) -> tuple[_arrays.FloatArray, _arrays.FloatArray]:
    ab = b - a
    denom = _arrays.dot3(ab, ab)
    numer = _arrays.dot3(p - a, ab)
    shape = np.broadcast(numer, denom).shape
    t = np.divide(
        numer,
        denom,
        out=np.zeros(shape),
        where=np.broadcast_to(denom > 0, shape),
    )
    return np.clip(t, 0.0, 1.0), ab


def _closest_points(
    p: _arrays.FloatArray, a: _arrays.FloatArray, b: _arrays.FloatArray
) -> _arrays.FloatArray:
    t, ab = _segment_parameter(p, a, b)
    return a + t[..., None] * ab


def _capsule_distances(
    p: _arrays.FloatArray,
    a: _arrays.FloatArray,
    b: _arrays.FloatArray,
    radius: _arrays.FloatArray,
) -> _arrays.FloatArray:
    diff = p - _closest_points(p, a, b)
    return np.maximum(0.0, np.sqrt(_arrays.dot3(diff, diff)) - radius)


def closest_point_on_segment(
    p: _arrays.PointLike, a: _arrays.PointLike, b: _arrays.PointLike
) -> _arrays.Point3:
    """Point of segment a-b nearest to p (a itself for a degenerate segment)."""
    return _closest_points(
        np.asarray(p, dtype=np.float64),
        np.asarray(a, dtype=np.float64),
        np.asarray(b, dtype=np.float64),
    )


def distance_to_capsule(p: _arrays.PointLike, capsule: Capsule) -> float:
    """Distance from p to the capsule surface; 0 on or inside the capsule."""
    return float(
        _capsule_distances(
            np.asarray(p, dtype=np.float64), capsule.a, capsule.b, capsule.radius
        )
    )


def _id_order(model: _skeleton.PosedModel) -> np.ndarray:
    if len(model) == 0:
        raise _errors.GeometryError("cannot query distances against an empty model")
    return np.argsort(np.asarray(model.link_ids), kind="stable")


def distance_to_model(
    p: _arrays.PointLike, model: _skeleton.PosedModel
) -> tuple[float, int]:
    """Smallest capsule distance over all links of a posed model.

    Returns:
        Tuple of (distance, link id); ties go to the smallest link id

    Raises:
        GeometryError: If the model has no links
    """
    order = _id_order(model)
    p = np.asarray(p, dtype=np.float64)
    best, best_id = np.inf, -1
    for i in order:
        d = float(_capsule_distances(p, model.starts[i], model.ends[i], model.radii[i]))
        if d < best:
            best, best_id = d, model.link_ids[i]
    return best, best_id


def point_model_distances(
    points: _arrays.PointLike, model: _skeleton.PosedModel
) -> tuple[_arrays.FloatArray, np.ndarray]:
    """Vectorized distance_to_model over a stack of points.

    Returns:
        Tuple of (distances shape (N,), link ids shape (N,))
    """
    order = _id_order(model)
    points = _arrays.as_points(points)
    starts = model.starts[order]
    ends = model.ends[order]
    radii = model.radii[order]
    distances = _capsule_distances(
        points[:, None, :], starts[None, :, :], ends[None, :, :], radii[None, :]
    )
    nearest = np.argmin(distances, axis=1)
    ids = np.asarray(model.link_ids)[order][nearest]
    return distances[np.arange(len(points)), nearest], ids


def _sphere_hits(
    directions: _arrays.Points, center: _arrays.Point3, radius: float
) -> _arrays.FloatArray:
    # ray origin is 0, so oc = -center
    oc = -center
    half_b = _arrays.dot3(directions, oc)
    c = _arrays.dot3(oc, oc) - radius * radius
    disc = half_b * half_b - c
    with np.errstate(invalid="ignore"):
        t = -half_b - np.sqrt(disc)
    return np.where((disc >= 0) & (t > 0), t, np.inf)


def ray_capsule_intersections(
    directions: _arrays.PointLike, capsule: Capsule
) -> _arrays.FloatArray:
    """First-hit distance along unit rays cast from the origin.

    The capsule is the union of a finite cylinder and two end spheres, so
    the first hit is the nearest positive entry into any of the three.

    Args:
        directions: Unit ray directions, shape (N, 3)
        capsule: Capsule in the ray frame

    Returns:
        Distances along each ray, inf where the ray misses
    """
    directions = _arrays.as_points(directions)
    a, b, r = capsule.a, capsule.b, capsule.radius
    ba = b - a
    oa = -a
    baba = float(_arrays.dot3(ba, ba))
    bard = _arrays.dot3(directions, ba)
    baoa = float(_arrays.dot3(ba, oa))
    rdoa = _arrays.dot3(directions, oa)
    oaoa = float(_arrays.dot3(oa, oa))

    k2 = baba - bard * bard
    k1 = baba * rdoa - baoa * bard
    k0 = baba * oaoa - baoa * baoa - r * r * baba
    disc = k1 * k1 - k2 * k0
    valid = (k2 > 1e-12 * baba) & (disc >= 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(valid, (-k1 - np.sqrt(np.where(valid, disc, 0.0))) / k2, np.inf)
    y = baoa + t * bard
    body = np.where(valid & (t > 0) & (y > 0) & (y < baba), t, np.inf)
    return np.minimum(body, np.minimum(_sphere_hits(directions, a, r), _sphere_hits(directions, b, r)))


def model_capsules(model: _skeleton.PosedModel) -> _t.Iterator[Capsule]:
    for segment in model.segments:
        yield Capsule.of_segment(segment)
