"""Kinematic skeleton model, pose parameter layout and forward kinematics.

A skeleton is a rooted tree of links. Every link owns a joint with up to
``MAX_JOINT_AXES`` rotational axes and an optional free length. The pose
vector ``theta`` is laid out as::

    [root position (3), root quaternion w, x, y, z (4),
     then for each link in topological order: joint angles, free length]

Links extend along their local +x axis; a child starts at its parent's end.
"""

import dataclasses
import functools
import json
import logging
import math
import typing as _t
from collections import deque
from importlib import resources
from pathlib import Path

import numpy as np
import pydantic as _pydantic
from scipy.spatial.transform import Rotation

from . import arrays as _arrays
from . import errors as _errors

logger = logging.getLogger(__name__)

MAX_JOINT_AXES = 4
AXIS_TOLERANCE = 1e-9
QUATERNION_TOLERANCE = 1e-12
ROOT_DOF = 7
ROOT_POSITION = slice(0, 3)
ROOT_QUATERNION = slice(3, 7)
IDENTITY_QUATERNION = (1.0, 0.0, 0.0, 0.0)

Vec3 = tuple[float, float, float]
Interval = tuple[float, float]

# document key -> JointSpec field
_JOINT_KEYS = {
    "axes": "rotational_axes",
    "angle_limits": "angle_limits",
    "length_free": "length_free",
    "length_limits": "length_limits",
}
_DOCUMENT_KEYS = {"name", "links", "symmetry_groups"}


class JointSpec(_pydantic.BaseModel):
    """Rotational axes, angle limits and optional free length of a joint.

    Attributes:
        rotational_axes: Unit axes in the parent-link frame, applied in order
        angle_limits: Closed interval in radians per axis, [-pi, pi] if omitted
        length_free: Whether the link length is an optimized parameter
        length_limits: Closed interval in meters, required when length_free
    """

    model_config = _pydantic.ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    rotational_axes: tuple[Vec3, ...] = ()
    angle_limits: tuple[Interval, ...] = _pydantic.Field(
        default=None, validate_default=True
    )
    length_free: bool = False
    length_limits: Interval | None = _pydantic.Field(
        default=None, validate_default=True
    )

    @_pydantic.field_validator("rotational_axes")
    @classmethod
    def _check_axes(cls, axes: tuple[Vec3, ...]) -> tuple[Vec3, ...]:
        if len(axes) > MAX_JOINT_AXES:
            raise ValueError(
                f"at most {MAX_JOINT_AXES} axes allowed, got {len(axes)}"
            )
        vectors = np.asarray(axes, dtype=np.float64).reshape(-1, 3)
        for i, vector in enumerate(vectors):
            if not np.all(np.isfinite(vector)):
                raise ValueError(f"axis {i} is not finite")
            if abs(float(np.linalg.norm(vector)) - 1.0) > AXIS_TOLERANCE:
                raise ValueError(f"axis {i} is not unit length")
            for j in range(i):
                if np.allclose(vector, vectors[j], rtol=0.0, atol=AXIS_TOLERANCE):
                    raise ValueError(f"axes {j} and {i} are identical")
        return axes

    @_pydantic.field_validator("angle_limits", mode="before")
    @classmethod
    def _default_angle_limits(
        cls, limits: _t.Any, info: _pydantic.ValidationInfo
    ) -> _t.Any:
        if limits is None:
            count = len(info.data.get("rotational_axes", ()))
            return tuple((-math.pi, math.pi) for _ in range(count))
        return limits

    @_pydantic.field_validator("angle_limits")
    @classmethod
    def _check_angle_limits(
        cls, limits: tuple[Interval, ...], info: _pydantic.ValidationInfo
    ) -> tuple[Interval, ...]:
        axes = info.data.get("rotational_axes")
        if axes is not None and len(limits) != len(axes):
            raise ValueError(
                f"expected {len(axes)} angle intervals, got {len(limits)}"
            )
        for i, (lower, upper) in enumerate(limits):
            if not lower <= upper:
                raise ValueError(f"interval {i} is inverted ({lower} > {upper})")
        return limits

    @_pydantic.field_validator("length_limits")
    @classmethod
    def _check_length_limits(
        cls, limits: Interval | None, info: _pydantic.ValidationInfo
    ) -> Interval | None:
        if limits is None:
            if info.data.get("length_free"):
                raise ValueError("required when length_free is true")
            return None
        lower, upper = limits
        if not lower <= upper:
            raise ValueError(f"interval is inverted ({lower} > {upper})")
        if lower <= 0:
            raise ValueError("lengths must be positive")
        return limits

    @property
    def parameter_count(self) -> int:
        """Number of pose parameters this joint contributes."""
        return len(self.rotational_axes) + (1 if self.length_free else 0)


class LinkSpec(_pydantic.BaseModel):
    """One rigid link of a skeleton, rendered as a capsule.

    Attributes:
        id: Non-negative identifier, unique within the skeleton
        parent: Id of the parent link, None for the root
        joint: Joint connecting this link to its parent's end
        default_length: Length in meters when the length is not free
        radius: Capsule radius in meters
    """

    model_config = _pydantic.ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    id: _pydantic.NonNegativeInt
    parent: int | None = None
    joint: JointSpec = JointSpec()
    default_length: _pydantic.PositiveFloat
    radius: _pydantic.PositiveFloat

    @_pydantic.field_validator("default_length")
    @classmethod
    def _check_default_length(
        cls, length: float, info: _pydantic.ValidationInfo
    ) -> float:
        joint = info.data.get("joint")
        if joint is not None and joint.length_free:
            lower, upper = joint.length_limits
            if not lower <= length <= upper:
                raise ValueError(f"{length} is outside length_limits [{lower}, {upper}]")
        return length


@dataclasses.dataclass(frozen=True)
class SceneBox:
    """Axis-aligned box bounding the root position, in meters."""

    lower: _arrays.Point3
    upper: _arrays.Point3

    def __post_init__(self) -> None:
        lower = np.array(self.lower, dtype=np.float64).reshape(3)
        upper = np.array(self.upper, dtype=np.float64).reshape(3)
        if not np.all(lower <= upper):
            raise ValueError(f"inverted scene box: {lower} > {upper}")
        object.__setattr__(self, "lower", _arrays.frozen(lower))
        object.__setattr__(self, "upper", _arrays.frozen(upper))

    @property
    def width(self) -> _arrays.Point3:
        return self.upper - self.lower

    @classmethod
    def around(cls, points: _arrays.PointLike, padding: float = 0.0) -> "SceneBox":
        """Bounding box of points, grown by padding on every side."""
        points = _arrays.as_points(points)
        return cls(points.min(axis=0) - padding, points.max(axis=0) + padding)

    @classmethod
    def cube(cls, half_width: float = 1.0) -> "SceneBox":
        return cls(np.full(3, -half_width), np.full(3, half_width))


@dataclasses.dataclass(frozen=True, eq=False)
class ParameterLayout:
    """Where every link's parameters live inside theta, and their bounds.

    Root position and quaternion entries carry infinite bounds; they are
    handled separately by the scene box and quaternion normalization.
    """

    dof: int
    link_ids: tuple[int, ...]
    parents: tuple[int, ...]
    angle_slices: tuple[slice, ...]
    length_indices: tuple[int | None, ...]
    axes: tuple[_arrays.FloatArray, ...]
    default_lengths: _arrays.FloatArray
    radii: _arrays.FloatArray
    lower: _arrays.FloatArray
    upper: _arrays.FloatArray
    link_blocks: tuple[np.ndarray, ...]
    subtree_blocks: tuple[np.ndarray, ...]
    _positions: dict[int, int] = dataclasses.field(repr=False)

    @classmethod
    def from_links(cls, links: _t.Sequence[LinkSpec]) -> "ParameterLayout":
        positions = {link.id: i for i, link in enumerate(links)}
        lower: list[float] = [-math.inf] * ROOT_DOF
        upper: list[float] = [math.inf] * ROOT_DOF
        angle_slices, length_indices, axes, blocks = [], [], [], []
        offset = ROOT_DOF
        for link in links:
            joint = link.joint
            count = len(joint.rotational_axes)
            angle_slices.append(slice(offset, offset + count))
            for lo, hi in joint.angle_limits:
                lower.append(lo)
                upper.append(hi)
            if joint.length_free:
                length_indices.append(offset + count)
                lower.append(joint.length_limits[0])
                upper.append(joint.length_limits[1])
            else:
                length_indices.append(None)
            axes.append(
                _arrays.frozen(
                    np.asarray(joint.rotational_axes, dtype=np.float64).reshape(-1, 3)
                )
            )
            blocks.append(np.arange(offset, offset + joint.parameter_count))
            offset += joint.parameter_count

        parents = tuple(
            -1 if link.parent is None else positions[link.parent] for link in links
        )
        subtree: list[list[np.ndarray]] = [[block] for block in blocks]
        for i in range(len(links) - 1, 0, -1):
            subtree[parents[i]].extend(subtree[i])
        subtree_blocks = tuple(
            _arrays.frozen(np.sort(np.concatenate(parts)).astype(np.intp))
            for parts in subtree
        )
        return cls(
            dof=offset,
            link_ids=tuple(link.id for link in links),
            parents=parents,
            angle_slices=tuple(angle_slices),
            length_indices=tuple(length_indices),
            axes=tuple(axes),
            default_lengths=_arrays.frozen(
                np.array([link.default_length for link in links])
            ),
            radii=_arrays.frozen(np.array([link.radius for link in links])),
            lower=_arrays.frozen(np.array(lower)),
            upper=_arrays.frozen(np.array(upper)),
            link_blocks=tuple(blocks),
            subtree_blocks=subtree_blocks,
            _positions=positions,
        )

    def index_of(self, link_id: int) -> int:
        """Topological position of a link id."""
        try:
            return self._positions[link_id]
        except KeyError:
            raise KeyError(f"unknown link id {link_id}") from None

    @property
    def bounded(self) -> slice:
        """Slice of theta covering joint angles and free lengths."""
        return slice(ROOT_DOF, self.dof)

    def decode(self, theta: _arrays.FloatArray) -> "PoseComponents":
        """Split a flat pose vector into its structured parts."""
        theta = np.asarray(theta, dtype=np.float64)
        lengths = {}
        for link_id, index in zip(self.link_ids, self.length_indices):
            if index is not None:
                lengths[link_id] = float(theta[index])
        return PoseComponents(
            root_position=tuple(float(v) for v in theta[ROOT_POSITION]),
            root_quaternion=tuple(float(v) for v in theta[ROOT_QUATERNION]),
            angles={
                link_id: tuple(float(v) for v in theta[block])
                for link_id, block in zip(self.link_ids, self.angle_slices)
            },
            lengths=lengths,
        )

    def encode(self, components: "PoseComponents") -> _arrays.FloatArray:
        """Inverse of decode."""
        theta = np.empty(self.dof, dtype=np.float64)
        theta[ROOT_POSITION] = components.root_position
        theta[ROOT_QUATERNION] = components.root_quaternion
        for link_id, block, index in zip(
            self.link_ids, self.angle_slices, self.length_indices
        ):
            theta[block] = components.angles.get(link_id, ())
            if index is not None:
                theta[index] = components.lengths[link_id]
        return theta


@dataclasses.dataclass(frozen=True)
class PoseComponents:
    """Structured view of a pose vector.

    Attributes:
        root_position: Root link start in meters
        root_quaternion: Root orientation as (w, x, y, z)
        angles: Joint angles in radians keyed by link id
        lengths: Free link lengths in meters keyed by link id
    """

    root_position: tuple[float, ...]
    root_quaternion: tuple[float, ...]
    angles: dict[int, tuple[float, ...]]
    lengths: dict[int, float]


@dataclasses.dataclass(frozen=True)
class Skeleton:
    """Immutable rooted tree of links in topological order."""

    name: str
    links: tuple[LinkSpec, ...]
    symmetry_groups: tuple[tuple[tuple[int, ...], ...], ...] = ()
    layout: ParameterLayout = dataclasses.field(
        init=False, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        links = tuple(self.links)
        groups = tuple(
            tuple(tuple(int(i) for i in chain) for chain in group)
            for group in self.symmetry_groups
        )
        issues = _tree_issues(links)
        if not issues:
            issues = _order_issues(links) + _symmetry_issues(links, groups)
        if issues:
            raise _errors.SkeletonError(issues)
        object.__setattr__(self, "links", links)
        object.__setattr__(self, "symmetry_groups", groups)
        object.__setattr__(self, "layout", ParameterLayout.from_links(links))

    def __len__(self) -> int:
        return len(self.links)

    def link(self, link_id: int) -> LinkSpec:
        return self.links[self.layout.index_of(link_id)]

    def children(self, link_id: int) -> list[int]:
        return [link.id for link in self.links if link.parent == link_id]

    def to_document(self) -> dict[str, _t.Any]:
        """Skeleton as a JSON-serializable spec document."""
        links = []
        for link in self.links:
            entry: dict[str, _t.Any] = {
                "id": link.id,
                "parent": link.parent,
                "axes": [list(axis) for axis in link.joint.rotational_axes],
                "angle_limits": [list(lim) for lim in link.joint.angle_limits],
                "length_free": link.joint.length_free,
                "default_length": link.default_length,
                "radius": link.radius,
            }
            if link.joint.length_limits is not None:
                entry["length_limits"] = list(link.joint.length_limits)
            links.append(entry)
        document: dict[str, _t.Any] = {"name": self.name, "links": links}
        if self.symmetry_groups:
            document["symmetry_groups"] = [
                [list(chain) for chain in group] for group in self.symmetry_groups
            ]
        return document


def _tree_issues(links: _t.Sequence[LinkSpec]) -> list[dict[str, _t.Any]]:
    issues: list[dict[str, _t.Any]] = []
    if not links:
        return [{"link_id": None, "field": "links", "message": "no links"}]
    ids = [link.id for link in links]
    seen: set[int] = set()
    for link_id in ids:
        if link_id in seen:
            issues.append(
                {"link_id": link_id, "field": "id", "message": "duplicate id"}
            )
        seen.add(link_id)
    roots = [link.id for link in links if link.parent is None]
    if len(roots) != 1:
        issues.append(
            {
                "link_id": None,
                "field": "parent",
                "message": f"expected exactly one root, found {len(roots)} {roots}",
            }
        )
    for link in links:
        if link.parent is None:
            continue
        if link.parent == link.id:
            issues.append(
                {"link_id": link.id, "field": "parent", "message": "cycle: link is its own parent"}
            )
        elif link.parent not in seen:
            issues.append(
                {
                    "link_id": link.id,
                    "field": "parent",
                    "message": f"parent {link.parent} does not exist",
                }
            )
    if issues:
        return issues
    reached = set(link_id for link_id, _ in _breadth_first(links))
    for link in links:
        if link.id not in reached:
            issues.append(
                {
                    "link_id": link.id,
                    "field": "parent",
                    "message": "cycle: link is not connected to the root",
                }
            )
    return issues


def _breadth_first(links: _t.Sequence[LinkSpec]) -> _t.Iterator[tuple[int, int]]:
    """Yield (link id, document position) from the root, children in document order."""
    children: dict[int, list[int]] = {}
    root = None
    for position, link in enumerate(links):
        if link.parent is None:
            root = position
        else:
            children.setdefault(link.parent, []).append(position)
    if root is None:
        return
    queue = deque([root])
    visited: set[int] = set()
    while queue:
        position = queue.popleft()
        link_id = links[position].id
        if link_id in visited:
            continue
        visited.add(link_id)
        yield link_id, position
        queue.extend(children.get(link_id, ()))


def _order_issues(links: _t.Sequence[LinkSpec]) -> list[dict[str, _t.Any]]:
    placed: set[int] = set()
    issues = []
    for link in links:
        if link.parent is not None and link.parent not in placed:
            issues.append(
                {
                    "link_id": link.id,
                    "field": "parent",
                    "message": "links are not in topological order",
                }
            )
        placed.add(link.id)
    return issues


def _symmetry_issues(
    links: _t.Sequence[LinkSpec],
    groups: tuple[tuple[tuple[int, ...], ...], ...],
) -> list[dict[str, _t.Any]]:
    ids = {link.id for link in links}
    used: set[int] = set()
    issues = []
    for g, group in enumerate(groups):
        field = f"symmetry_groups[{g}]"
        if len({len(chain) for chain in group}) > 1:
            issues.append(
                {"link_id": None, "field": field, "message": "chains differ in length"}
            )
        for chain in group:
            for link_id in chain:
                if link_id not in ids:
                    issues.append(
                        {"link_id": None, "field": field, "message": f"unknown link id {link_id}"}
                    )
                elif link_id in used:
                    issues.append(
                        {"link_id": None, "field": field, "message": f"link id {link_id} listed twice"}
                    )
                used.add(link_id)
    return issues


def _link_issues(
    position: int, entry: _t.Any
) -> tuple[LinkSpec | None, list[dict[str, _t.Any]]]:
    if not isinstance(entry, dict):
        return None, [
            {"link_id": None, "field": f"links[{position}]", "message": "expected an object"}
        ]
    link_id = entry.get("id", f"#{position}")
    joint = {_JOINT_KEYS[k]: v for k, v in entry.items() if k in _JOINT_KEYS}
    fields = {k: v for k, v in entry.items() if k not in _JOINT_KEYS}
    fields["joint"] = joint
    try:
        return LinkSpec.model_validate(fields), []
    except _pydantic.ValidationError as e:
        issues = []
        reverse = {v: k for k, v in _JOINT_KEYS.items()}
        for err in e.errors():
            loc = err.get("loc", ())
            if loc and loc[0] == "joint" and len(loc) > 1:
                field = reverse.get(str(loc[1]), str(loc[1]))
            elif loc:
                field = str(loc[0])
            else:
                field = "link"
            message = (
                "unknown key" if err.get("type") == "extra_forbidden" else err["msg"]
            )
            issues.append({"link_id": link_id, "field": field, "message": message})
        return None, issues


def parse_skeleton(text: str | bytes) -> Skeleton:
    """Parse and validate a skeleton spec document.

    Links may appear in any order; they are stored in breadth-first
    topological order starting at the root, siblings in document order.

    Args:
        text: JSON skeleton document

    Returns:
        Validated Skeleton

    Raises:
        SkeletonError: If the document is malformed or violates a skeleton invariant
    """
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise _errors.SkeletonError(
            [{"link_id": None, "field": "document", "message": f"malformed JSON: {e}"}]
        ) from e
    if not isinstance(document, dict):
        raise _errors.SkeletonError(
            [{"link_id": None, "field": "document", "message": "expected a JSON object"}]
        )
    issues: list[dict[str, _t.Any]] = [
        {"link_id": None, "field": key, "message": "unknown key"}
        for key in document
        if key not in _DOCUMENT_KEYS
    ]
    name = document.get("name")
    if not isinstance(name, str):
        issues.append({"link_id": None, "field": "name", "message": "expected a string"})
    entries = document.get("links")
    if not isinstance(entries, list) or not entries:
        issues.append(
            {"link_id": None, "field": "links", "message": "expected a non-empty list"}
        )
        raise _errors.SkeletonError(issues)

    links = []
    for position, entry in enumerate(entries):
        link, link_issues = _link_issues(position, entry)
        issues.extend(link_issues)
        if link is not None:
            links.append(link)
    if issues:
        raise _errors.SkeletonError(issues)

    tree_issues = _tree_issues(links)
    if tree_issues:
        raise _errors.SkeletonError(tree_issues)
    ordered = tuple(links[position] for _, position in _breadth_first(links))

    groups = document.get("symmetry_groups", [])
    try:
        groups = tuple(tuple(tuple(chain) for chain in group) for group in groups)
    except TypeError:
        raise _errors.SkeletonError(
            [{"link_id": None, "field": "symmetry_groups", "message": "expected a list of lists of chains"}]
        ) from None
    return Skeleton(name=name, links=ordered, symmetry_groups=groups)


def load_skeleton(path: str | Path) -> Skeleton:
    """Read and parse a skeleton spec file."""
    path = Path(path)
    skeleton = parse_skeleton(path.read_text(encoding="utf-8"))
    logger.debug("loaded skeleton %r (%d links) from %s", skeleton.name, len(skeleton), path)
    return skeleton


def builtin_skeleton_names() -> list[str]:
    """Names of the skeleton documents shipped with the package."""
    folder = resources.files("posevo").joinpath("skeletons")
    return sorted(
        entry.name[: -len(".skel")]
        for entry in folder.iterdir()
        if entry.name.endswith(".skel")
    )


@functools.lru_cache(maxsize=None)
def builtin_skeleton(name: str) -> Skeleton:
    """Load one of the packaged skeletons (e.g. 'spider', 'humanoid')."""
    resource = resources.files("posevo").joinpath("skeletons", f"{name}.skel")
    if not resource.is_file():
        raise KeyError(
            f"no builtin skeleton {name!r}; available: {builtin_skeleton_names()}"
        )
    return parse_skeleton(resource.read_text(encoding="utf-8"))


def dump_skeleton(skeleton: Skeleton) -> str:
    """Serialize a skeleton to its spec document."""
    return json.dumps(skeleton.to_document(), indent=2)


def dof_count(skeleton: Skeleton) -> int:
    """Number of stored pose parameters.

    The root contributes 7 (position plus a 4-component quaternion for its
    3 rotational degrees of freedom), each link its joint's parameter count.
    """
    return skeleton.layout.dof


@dataclasses.dataclass(frozen=True, eq=False)
class PoseParams:
    """Flat pose vector theta; see the module docstring for the layout."""

    theta: _arrays.FloatArray

    def __post_init__(self) -> None:
        theta = np.array(self.theta, dtype=np.float64)
        if theta.ndim != 1 or theta.size < ROOT_DOF:
            raise _errors.PoseError(
                f"theta must be a vector of at least {ROOT_DOF} entries, got shape {theta.shape}"
            )
        object.__setattr__(self, "theta", _arrays.frozen(theta))

    def __len__(self) -> int:
        return self.theta.size

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PoseParams):
            return NotImplemented
        return np.array_equal(self.theta, other.theta)

    def __repr__(self) -> str:
        return f"PoseParams(dof={self.theta.size})"

    @property
    def root_position(self) -> _arrays.Point3:
        return self.theta[ROOT_POSITION]

    @property
    def root_quaternion(self) -> _arrays.FloatArray:
        return self.theta[ROOT_QUATERNION]

    def components(self, skeleton: Skeleton) -> PoseComponents:
        _check_dimension(skeleton, self)
        return skeleton.layout.decode(self.theta)

    @classmethod
    def from_components(
        cls, skeleton: Skeleton, components: PoseComponents
    ) -> "PoseParams":
        return cls(skeleton.layout.encode(components))

    @classmethod
    def neutral(cls, skeleton: Skeleton) -> "PoseParams":
        """Pose at the origin, identity orientation, zero angles, default lengths."""
        layout = skeleton.layout
        theta = np.zeros(layout.dof)
        theta[ROOT_QUATERNION] = IDENTITY_QUATERNION
        for i, index in enumerate(layout.length_indices):
            if index is not None:
                theta[index] = layout.default_lengths[i]
        theta[layout.bounded] = np.clip(
            theta[layout.bounded], layout.lower[layout.bounded], layout.upper[layout.bounded]
        )
        return cls(theta)


class Segment(_t.NamedTuple):
    """World-space capsule of one posed link."""

    link_id: int
    start: _arrays.Point3
    end: _arrays.Point3
    radius: float


@dataclasses.dataclass(frozen=True, eq=False)
class PosedModel:
    """World-space capsules produced by forward kinematics, in topological order."""

    link_ids: tuple[int, ...]
    starts: _arrays.Points
    ends: _arrays.Points
    radii: _arrays.FloatArray

    def __post_init__(self) -> None:
        starts = _arrays.frozen(np.array(self.starts, dtype=np.float64).reshape(-1, 3))
        ends = _arrays.frozen(np.array(self.ends, dtype=np.float64).reshape(-1, 3))
        radii = _arrays.frozen(np.array(self.radii, dtype=np.float64).reshape(-1))
        if not len(self.link_ids) == len(starts) == len(ends) == len(radii):
            raise ValueError("link_ids, starts, ends and radii differ in length")
        object.__setattr__(self, "link_ids", tuple(int(i) for i in self.link_ids))
        object.__setattr__(self, "starts", starts)
        object.__setattr__(self, "ends", ends)
        object.__setattr__(self, "radii", radii)

    def __len__(self) -> int:
        return len(self.link_ids)

    @property
    def segments(self) -> list[Segment]:
        return [
            Segment(link_id, self.starts[i], self.ends[i], float(self.radii[i]))
            for i, link_id in enumerate(self.link_ids)
        ]

    @property
    def lengths(self) -> _arrays.FloatArray:
        return np.sqrt(_arrays.dot3(self.ends - self.starts, self.ends - self.starts))

    def transformed(
        self, rotation: _arrays.FloatArray, translation: _arrays.Point3
    ) -> "PosedModel":
        """Model after the rigid motion p -> rotation @ p + translation."""
        rotation = np.asarray(rotation, dtype=np.float64)
        translation = np.asarray(translation, dtype=np.float64)
        return PosedModel(
            self.link_ids,
            self.starts @ rotation.T + translation,
            self.ends @ rotation.T + translation,
            self.radii,
        )


def quaternion_to_rotation(quaternion: _arrays.FloatArray) -> Rotation:
    """Rotation for a (w, x, y, z) quaternion."""
    w, x, y, z = quaternion
    return Rotation.from_quat([x, y, z, w])


def rotation_to_quaternion(rotation: Rotation) -> _arrays.FloatArray:
    """(w, x, y, z) quaternion of a rotation."""
    x, y, z, w = rotation.as_quat()
    return np.array([w, x, y, z])


def joint_rotation(axes: _arrays.FloatArray, angles: _arrays.FloatArray) -> _arrays.FloatArray:
    """Rotation matrix of successive rotations about axes, in declared order."""
    if len(axes) == 0:
        return np.eye(3)
    matrices = Rotation.from_rotvec(axes * np.asarray(angles)[:, None]).as_matrix()
    return functools.reduce(np.matmul, matrices)


def _check_dimension(skeleton: Skeleton, pose: PoseParams) -> None:
    if pose.theta.size != skeleton.layout.dof:
        raise _errors.PoseError(
            f"pose has {pose.theta.size} parameters, skeleton {skeleton.name!r} "
            f"needs {skeleton.layout.dof}"
        )


def _check_finite(pose: PoseParams) -> None:
    if not np.all(np.isfinite(pose.theta)):
        bad = np.flatnonzero(~np.isfinite(pose.theta))
        raise _errors.PoseError(f"non-finite pose parameters at indices {bad.tolist()}")


def forward_kinematics(skeleton: Skeleton, pose: PoseParams) -> PosedModel:
    """Place every link of the skeleton in the world frame.

    The root segment starts at the root position with the quaternion's
    orientation; every other segment starts at its parent's end. A link's
    frame is its parent's frame followed by the rotations about its joint
    axes, and the link extends along that frame's +x axis.

    Args:
        skeleton: Skeleton to pose
        pose: Pose parameters matching the skeleton's layout

    Returns:
        PosedModel with one capsule per link

    Raises:
        PoseError: If the pose has the wrong dimension or non-finite entries
    """
    _check_dimension(skeleton, pose)
    _check_finite(pose)
    layout = skeleton.layout
    theta = pose.theta
    count = len(skeleton.links)
    frames = np.empty((count, 3, 3))
    starts = np.empty((count, 3))
    ends = np.empty((count, 3))
    root_frame = quaternion_to_rotation(theta[ROOT_QUATERNION]).as_matrix()
    for i in range(count):
        parent = layout.parents[i]
        if parent < 0:
            frame, start = root_frame, theta[ROOT_POSITION]
        else:
            frame, start = frames[parent], ends[parent]
        frame = frame @ joint_rotation(layout.axes[i], theta[layout.angle_slices[i]])
        index = layout.length_indices[i]
        length = theta[index] if index is not None else layout.default_lengths[i]
        frames[i] = frame
        starts[i] = start
        ends[i] = start + length * frame[:, 0]
    return PosedModel(layout.link_ids, starts, ends, layout.radii)


def random_pose(
    skeleton: Skeleton,
    rng: np.random.Generator,
    box: SceneBox | None = None,
) -> PoseParams:
    """Sample a pose uniformly over the skeleton's parameter bounds.

    Args:
        skeleton: Skeleton to sample for
        rng: Seeded generator; the only source of randomness
        box: Region for the root position (unit cube around the origin if None)

    Returns:
        Feasible PoseParams with a uniformly distributed root orientation
    """
    box = box or SceneBox.cube()
    layout = skeleton.layout
    theta = np.empty(layout.dof)
    theta[ROOT_POSITION] = rng.uniform(box.lower, box.upper)
    theta[ROOT_QUATERNION] = rotation_to_quaternion(Rotation.random(None, rng))
    theta[layout.bounded] = rng.uniform(
        layout.lower[layout.bounded], layout.upper[layout.bounded]
    )
    return PoseParams(theta)


def clamp_pose(
    skeleton: Skeleton, pose: PoseParams, box: SceneBox | None = None
) -> PoseParams:
    """Project a pose onto the feasible set.

    Bounded entries are clipped to their limits, the root position is clipped
    into the box when one is given and the quaternion is rescaled to unit
    norm. Entries already feasible keep their exact values.

    Raises:
        PoseError: If the pose has the wrong dimension or non-finite entries
    """
    _check_dimension(skeleton, pose)
    _check_finite(pose)
    layout = skeleton.layout
    theta = pose.theta.copy()
    theta[layout.bounded] = np.clip(
        theta[layout.bounded], layout.lower[layout.bounded], layout.upper[layout.bounded]
    )
    if box is not None:
        theta[ROOT_POSITION] = np.clip(theta[ROOT_POSITION], box.lower, box.upper)
    quaternion = theta[ROOT_QUATERNION]
    norm = float(np.linalg.norm(quaternion))
    if norm == 0.0:
        theta[ROOT_QUATERNION] = IDENTITY_QUATERNION
    elif abs(norm - 1.0) > QUATERNION_TOLERANCE:
        theta[ROOT_QUATERNION] = quaternion / norm
    return PoseParams(theta)


def is_feasible(
    skeleton: Skeleton, pose: PoseParams, box: SceneBox | None = None
) -> bool:
    """Whether a pose satisfies every PoseParams invariant."""
    layout = skeleton.layout
    theta = pose.theta
    if theta.size != layout.dof or not np.all(np.isfinite(theta)):
        return False
    if abs(float(np.linalg.norm(theta[ROOT_QUATERNION])) - 1.0) > AXIS_TOLERANCE:
        return False
    inner = theta[layout.bounded]
    if np.any(inner < layout.lower[layout.bounded]) or np.any(
        inner > layout.upper[layout.bounded]
    ):
        return False
    if box is not None:
        position = theta[ROOT_POSITION]
        return bool(np.all(position >= box.lower) and np.all(position <= box.upper))
    return True


def transform_pose(
    pose: PoseParams, rotation: _arrays.FloatArray, translation: _arrays.Point3
) -> PoseParams:
    """Express a pose in another frame related by p -> rotation @ p + translation."""
    rotation = np.asarray(rotation, dtype=np.float64)
    theta = pose.theta.copy()
    theta[ROOT_POSITION] = rotation @ pose.root_position + np.asarray(translation)
    root = quaternion_to_rotation(pose.root_quaternion)
    theta[ROOT_QUATERNION] = rotation_to_quaternion(Rotation.from_matrix(rotation) * root)
    return PoseParams(theta)
