"""Domain types and the canonical tabletop scene.

Coordinate frame: right-handed, x rightward, y away from the user, z up,
table top at z = 0. Gaze is a ray from the scene viewpoint; frames store
only its unit direction.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from .geom import IDENTITY_QUAT, look_rotation, quat_rotate, unit

DEFAULT_RATE_HZ = 120.0

CYLINDER_RADIUS = 0.05
CYLINDER_HEIGHT = 0.20
COASTER_RADIUS = 0.06
GRIPPER_EXTENTS = (0.08, 0.08, 0.12)

# Vertical clearance between a held cylinder's top and the holding hand.
GRIP_CLEARANCE = 0.02

NEAR_ROW_Y = 0.30
FAR_ROW_Y = 0.40
COLUMN_X = (-0.15, 0.0, 0.15)
COASTER_COLUMN_X = 0.33
COASTER_ROW_Y = (0.10, 0.30, 0.50)

LEFT_HAND_ID = "handL"
RIGHT_HAND_ID = "handR"
HAND_REST = {
    LEFT_HAND_ID: np.array([-0.28, 0.08, 0.10]),
    RIGHT_HAND_ID: np.array([0.28, 0.08, 0.10]),
}

# Default eye placement: distance d to the near cylinder row and height
# h = d + cylinder_height make the sight line over a near-row top cross
# the far row exactly at half cylinder height, so the far row is visible
# only from its upper half.
DEFAULT_EYE = np.array([0.0, -0.05, 0.55])
DEFAULT_LOOK_AT = np.array([0.0, 0.35, 0.0])


class ObjectKind(enum.Enum):
    CYLINDER = "cylinder"
    COASTER = "coaster"
    GRIPPER = "gripper"


class Hand(enum.Enum):
    LEFT = "left"
    RIGHT = "right"

    @property
    def object_id(self) -> str:
        return LEFT_HAND_ID if self is Hand.LEFT else RIGHT_HAND_ID

    @property
    def other(self) -> "Hand":
        return Hand.RIGHT if self is Hand.LEFT else Hand.LEFT


class Action(enum.Enum):
    PICK = "pick"
    PLACE = "place"


@dataclass(frozen=True)
class CylinderGeom:
    radius: float
    height: float


@dataclass(frozen=True)
class DiscGeom:
    radius: float


@dataclass(frozen=True)
class BoxGeom:
    extents: tuple[float, float, float]  # full extents along local x, y, z


Geometry = Union[CylinderGeom, DiscGeom, BoxGeom]


def _as_array(v, n: int) -> np.ndarray:
    a = np.asarray(v, dtype=float).reshape(n)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Pose:
    position: np.ndarray
    orientation: np.ndarray = field(default_factory=lambda: IDENTITY_QUAT.copy())

    def __post_init__(self):
        object.__setattr__(self, "position", _as_array(self.position, 3))
        q = _as_array(self.orientation, 4)
        if abs(np.linalg.norm(q) - 1.0) > 1e-9:
            raise ValueError("orientation quaternion must be unit norm")
        object.__setattr__(self, "orientation", q)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Pose)
            and np.array_equal(self.position, other.position)
            and np.array_equal(self.orientation, other.orientation)
        )


@dataclass(frozen=True)
class SceneObject:
    id: str
    kind: ObjectKind
    pose: Pose
    geometry: Geometry

    def __post_init__(self):
        if isinstance(self.geometry, CylinderGeom):
            if self.geometry.radius <= 0 or self.geometry.height <= 0:
                raise ValueError(f"{self.id}: cylinder radius/height must be positive")
        elif isinstance(self.geometry, DiscGeom):
            if self.geometry.radius <= 0:
                raise ValueError(f"{self.id}: disc radius must be positive")

    @property
    def center(self) -> np.ndarray:
        """Volumetric center. Cylinder poses sit at the base center."""
        if isinstance(self.geometry, CylinderGeom):
            return self.pose.position + np.array([0.0, 0.0, self.geometry.height / 2.0])
        return self.pose.position

    @property
    def top(self) -> np.ndarray:
        """Highest point on the object's vertical axis."""
        if isinstance(self.geometry, CylinderGeom):
            return self.pose.position + np.array([0.0, 0.0, self.geometry.height])
        if isinstance(self.geometry, BoxGeom):
            return self.pose.position + np.array([0.0, 0.0, self.geometry.extents[2] / 2.0])
        return self.pose.position


@dataclass(frozen=True)
class Scene:
    objects: tuple[SceneObject, ...]
    viewpoint: Pose
    table_height: float = 0.0

    def __post_init__(self):
        ids = [o.id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise ValueError("object ids must be unique within a scene")
        if set(self.pick_ids) & set(self.place_ids):
            raise ValueError("pick and place id sets must be disjoint")

    @property
    def pick_ids(self) -> tuple[str, ...]:
        return tuple(o.id for o in self.objects if o.kind is ObjectKind.CYLINDER)

    @property
    def place_ids(self) -> tuple[str, ...]:
        return tuple(o.id for o in self.objects if o.kind is ObjectKind.COASTER)

    @property
    def gripper_ids(self) -> tuple[str, ...]:
        return tuple(o.id for o in self.objects if o.kind is ObjectKind.GRIPPER)

    def object(self, object_id: str) -> SceneObject:
        for o in self.objects:
            if o.id == object_id:
                return o
        raise KeyError(object_id)

    def with_poses(self, poses: dict[str, Pose]) -> "Scene":
        objs = tuple(
            replace(o, pose=poses[o.id]) if o.id in poses else o for o in self.objects
        )
        return replace(self, objects=objs)


@dataclass(frozen=True, eq=False)
class HandState:
    position: np.ndarray
    velocity: np.ndarray
    orientation: np.ndarray = field(default_factory=lambda: IDENTITY_QUAT.copy())
    trigger: bool = False
    held_object: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "position", _as_array(self.position, 3))
        object.__setattr__(self, "velocity", _as_array(self.velocity, 3))
        object.__setattr__(self, "orientation", _as_array(self.orientation, 4))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, HandState)
            and np.array_equal(self.position, other.position)
            and np.array_equal(self.velocity, other.velocity)
            and np.array_equal(self.orientation, other.orientation)
            and self.trigger == other.trigger
            and self.held_object == other.held_object
        )


@dataclass(frozen=True, eq=False)
class Frame:
    t: float
    gaze_dir: np.ndarray
    left: HandState
    right: HandState

    def __post_init__(self):
        object.__setattr__(self, "gaze_dir", _as_array(self.gaze_dir, 3))

    def hand(self, hand: Hand) -> HandState:
        return self.left if hand is Hand.LEFT else self.right

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Frame)
            and self.t == other.t
            and np.array_equal(self.gaze_dir, other.gaze_dir)
            and self.left == other.left
            and self.right == other.right
        )


@dataclass(frozen=True)
class IntentLabel:
    action: Action
    target: str
    hand: Hand


@dataclass(frozen=True)
class PhaseSegment:
    """Half-open frame range [start, end) with its ground-truth role."""

    name: str  # "pick" | "transfer" | "place"
    hand: Hand
    label: Optional[IntentLabel]
    start: int
    end: int


@dataclass(frozen=True, eq=False)
class Sequence:
    frames: tuple[Frame, ...]
    label: IntentLabel
    user_id: int = 0
    block: str = ""
    trial: int = 0
    phases: tuple[PhaseSegment, ...] = ()

    @property
    def times(self) -> np.ndarray:
        return np.array([f.t for f in self.frames])

    def slice(self, start: int, end: int, label: Optional[IntentLabel] = None) -> "Sequence":
        return Sequence(
            frames=self.frames[start:end],
            label=label or self.label,
            user_id=self.user_id,
            block=self.block,
            trial=self.trial,
            phases=(),
        )

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Sequence)
            and self.frames == other.frames
            and self.label == other.label
            and self.user_id == other.user_id
            and self.block == other.block
            and self.trial == other.trial
            and self.phases == other.phases
        )


def build_tabletop_scene(
    eye: np.ndarray | tuple = DEFAULT_EYE,
    look_at: np.ndarray | tuple = DEFAULT_LOOK_AT,
    table_height: float = 0.0,
) -> Scene:
    """The canonical 6-cylinder / 6-coaster / two-gripper table.

    Cylinders (0.20 m tall, 0.05 m radius) stand in two rows 0.10 m apart
    with 0.15 m between columns; even ids fill the far row, odd ids the
    near row. Coasters run along the table's left and right edges, 0.66 m
    apart across and 0.20 m apart within each column. From the default
    viewpoint the near row hides the lower half of the far row.
    """
    objs: list[SceneObject] = []
    z = table_height
    for i in range(6):
        col = COLUMN_X[i // 2]
        row_y = FAR_ROW_Y if i % 2 == 0 else NEAR_ROW_Y
        objs.append(
            SceneObject(
                id=f"a{i}",
                kind=ObjectKind.CYLINDER,
                pose=Pose(position=(col, row_y, z)),
                geometry=CylinderGeom(CYLINDER_RADIUS, CYLINDER_HEIGHT),
            )
        )
    for j in range(6):
        x = -COASTER_COLUMN_X if j < 3 else COASTER_COLUMN_X
        y = COASTER_ROW_Y[j % 3]
        objs.append(
            SceneObject(
                id=f"b{j}",
                kind=ObjectKind.COASTER,
                pose=Pose(position=(x, y, z)),
                geometry=DiscGeom(COASTER_RADIUS),
            )
        )
    for hand_id, rest in HAND_REST.items():
        objs.append(
            SceneObject(
                id=hand_id,
                kind=ObjectKind.GRIPPER,
                pose=Pose(position=rest + np.array([0.0, 0.0, z])),
                geometry=BoxGeom(GRIPPER_EXTENTS),
            )
        )
    eye = np.asarray(eye, dtype=float) + np.array([0.0, 0.0, table_height])
    forward = np.asarray(look_at, dtype=float) - eye
    viewpoint = Pose(position=eye, orientation=look_rotation(forward))
    return Scene(objects=tuple(objs), viewpoint=viewpoint, table_height=table_height)


def held_object_pose(obj: SceneObject, hand: HandState) -> Pose:
    """Pose of a held object attached below the holding hand (top grasp)."""
    if isinstance(obj.geometry, CylinderGeom):
        drop = obj.geometry.height + GRIP_CLEARANCE
    elif isinstance(obj.geometry, BoxGeom):
        drop = obj.geometry.extents[2] / 2.0 + GRIP_CLEARANCE
    else:
        drop = GRIP_CLEARANCE
    return Pose(position=hand.position - np.array([0.0, 0.0, drop]), orientation=hand.orientation)


def holding_order(frame: Frame) -> tuple[Hand, ...]:
    """Attachment priority when both hands hold the same object: the
    lower hand supports it (a handover's receiver grips the body while
    the giver still pinches the top). Stateless and hand-symmetric."""
    if frame.left.position[2] <= frame.right.position[2]:
        return (Hand.RIGHT, Hand.LEFT)
    return (Hand.LEFT, Hand.RIGHT)


def scene_for_frame(scene: Scene, frame: Frame) -> Scene:
    """Scene with grippers tracking the hands and held objects attached."""
    poses: dict[str, Pose] = {}
    for hand in (Hand.LEFT, Hand.RIGHT):
        state = frame.hand(hand)
        poses[hand.object_id] = Pose(position=state.position, orientation=state.orientation)
    for hand in holding_order(frame):  # later write wins shared holds
        state = frame.hand(hand)
        if state.held_object is not None:
            try:
                obj = scene.object(state.held_object)
            except KeyError:
                continue
            poses[state.held_object] = held_object_pose(obj, state)
    return scene.with_poses(poses)


def validate_sequence(seq: Sequence, rate_hz: float = DEFAULT_RATE_HZ) -> list[str]:
    """All Frame/Sequence invariant violations, empty when well formed."""
    violations: list[str] = []
    if len(seq.frames) < 2:
        violations.append("sequence must contain at least 2 frames")
        return violations
    lo, hi = 1.0 / (rate_hz * 1.2), 1.0 / (rate_hz * 0.8)
    prev_t = None
    for k, f in enumerate(seq.frames):
        if prev_t is not None:
            if f.t <= prev_t:
                violations.append(f"t not increasing at index {k}")
            else:
                dt = f.t - prev_t
                if not (lo <= dt <= hi):
                    violations.append(
                        f"frame spacing {dt:.5f}s at index {k} outside {rate_hz} Hz +-20%"
                    )
        prev_t = f.t
        if abs(np.linalg.norm(f.gaze_dir) - 1.0) > 1e-9:
            violations.append(f"gaze_dir not unit norm at index {k}")
        for hand in (Hand.LEFT, Hand.RIGHT):
            s = f.hand(hand)
            if s.trigger != (s.held_object is not None):
                violations.append(
                    f"{hand.value} hand at index {k}: held_object must be set iff trigger"
                )
    if seq.label.action is Action.PICK and not seq.label.target.startswith("a"):
        violations.append("pick label must target a pick object")
    if seq.label.action is Action.PLACE and not (
        seq.label.target.startswith("b") or seq.label.target in (LEFT_HAND_ID, RIGHT_HAND_ID)
    ):
        violations.append("place label must target a coaster or a hand")
    return violations
