"""Shared pytest fixtures for posevo tests."""

import json
import typing

import numpy as np
import pytest

from posevo import skeleton as sk
from posevo.objective import PointCloud


def chain_document(
    n_links: int = 2, *, length: float = 0.1, radius: float = 0.01
) -> dict[str, typing.Any]:
    """Planar chain: every link turns about z, fixed lengths."""
    links = []
    for i in range(n_links):
        links.append(
            {
                "id": i,
                "parent": None if i == 0 else i - 1,
                "axes": [[0, 0, 1]],
                "angle_limits": [[-1.5, 1.5]],
                "default_length": length,
                "radius": radius,
            }
        )
    return {"name": f"chain{n_links}", "links": links}


def surface_cloud(
    model: sk.PosedModel, points_per_link: int = 60, seed: int = 0
) -> PointCloud:
    """Points lying exactly on the capsules' cylindrical surfaces."""
    rng = np.random.default_rng(seed)
    samples = []
    for segment in model.segments:
        axis = segment.end - segment.start
        unit = axis / np.linalg.norm(axis)
        helper = np.array([0.0, 0.0, 1.0]) if abs(unit[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
        u = np.cross(unit, helper)
        u /= np.linalg.norm(u)
        w = np.cross(unit, u)
        angles = rng.uniform(0.0, 2 * np.pi, points_per_link)
        t = rng.uniform(0.05, 0.95, points_per_link)
        radial = np.cos(angles)[:, None] * u + np.sin(angles)[:, None] * w
        samples.append(segment.start + t[:, None] * axis + segment.radius * radial)
    return PointCloud(np.concatenate(samples))


@pytest.fixture
def chain2() -> sk.Skeleton:
    """Fixture providing a two-link planar chain."""
    return sk.parse_skeleton(json.dumps(chain_document(2)))


@pytest.fixture
def planar4() -> sk.Skeleton:
    return sk.builtin_skeleton("planar4")


@pytest.fixture
def spider() -> sk.Skeleton:
    return sk.builtin_skeleton("spider")


@pytest.fixture
def humanoid() -> sk.Skeleton:
    return sk.builtin_skeleton("humanoid")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def planar4_truth(planar4: sk.Skeleton) -> sk.PoseParams:
    """A bent planar4 pose near the origin."""
    theta = sk.PoseParams.neutral(planar4).theta.copy()
    theta[planar4.layout.bounded] = [0.3, 0.5, -0.4, 0.6]
    return sk.PoseParams(theta)


@pytest.fixture
def planar4_cloud(planar4: sk.Skeleton, planar4_truth: sk.PoseParams) -> PointCloud:
    """Surface samples of planar4 in its truth pose."""
    return surface_cloud(sk.forward_kinematics(planar4, planar4_truth))
