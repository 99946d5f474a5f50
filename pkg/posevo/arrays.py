"""Array type aliases used throughout posevo."""

import numpy as np
import numpy.typing as npt


FloatArray = npt.NDArray[np.float64]
"""Type alias for a float64 array of any shape."""

Point3 = FloatArray
"""Type alias for a single 3D point, shape (3,), in meters."""

Points = FloatArray
"""Type alias for a stack of 3D points, shape (N, 3), in meters."""

PointLike = npt.ArrayLike
"""Anything numpy can turn into a point or a stack of points."""


def dot3(u: FloatArray, v: FloatArray) -> FloatArray:
    """Dot product over the last axis of length 3.

    Written out term by term so that a single query and a broadcast batch of
    queries perform exactly the same floating-point operations.
    """
    return u[..., 0] * v[..., 0] + u[..., 1] * v[..., 1] + u[..., 2] * v[..., 2]


def as_points(value: PointLike) -> Points:
    """Convert input to a contiguous (N, 3) float64 array."""
    points = np.ascontiguousarray(value, dtype=np.float64)
    if points.ndim == 1:
        points = points.reshape(1, -1)
    if points.ndim != 2 or points.shape[1] != 3:
        raise ValueError(f"expected points of shape (N, 3), got {points.shape}")
    return points


def frozen(array: FloatArray) -> FloatArray:
    """Return the array with its writeable flag cleared."""
    array.flags.writeable = False
    return array
