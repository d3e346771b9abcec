"""Simulated tabletop world with waypoint-teleport semantics.

The simulator validates sequencing and outcomes, not kinematics: the
effector jumps between waypoints, grasping attaches the nearest graspable
object within tolerance, and releasing drops the held object onto the
table plane under the effector.
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from . import schema
from .errors import UnknownLabel
from .geometry import Pose6D
from .tasklib import Command, CommandBatch

# Grasp tolerances, generous relative to the default 0.02 m grasp descent.
GRASP_HORIZONTAL_TOL = 0.03
GRASP_VERTICAL_TOL = 0.05

# A gripper value at or above this counts as closed.
CLOSED_THRESHOLD = 0.5

ProgressFn = Callable[[int, int], None]


@dataclass
class SimObject:
    label: str
    pose: Pose6D
    graspable: bool = True
    attached: bool = False


@dataclass
class ContainerRegion:
    label: str
    center: Pose6D
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("container radius must be positive")


@dataclass
class WorldState:
    effector_pose: Pose6D
    gripper: float
    objects: list[SimObject]
    containers: list[ContainerRegion]
    initial_pose: Pose6D
    table_height: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.gripper <= 1.0:
            raise ValueError("gripper must lie in [0, 1]")
        if sum(1 for obj in self.objects if obj.attached) > 1:
            raise ValueError("at most one object may be attached")

    def copy(self) -> "WorldState":
        return WorldState(
            effector_pose=self.effector_pose,
            gripper=self.gripper,
            objects=[copy.copy(obj) for obj in self.objects],
            containers=list(self.containers),
            initial_pose=self.initial_pose,
            table_height=self.table_height,
        )

    def attached_object(self) -> SimObject | None:
        for obj in self.objects:
            if obj.attached:
                return obj
        return None

    def find_object(self, label: str) -> SimObject:
        for obj in self.objects:
            if obj.label == label:
                return obj
        raise UnknownLabel(f"no object labeled {label!r}")

    def find_container(self, label: str) -> ContainerRegion:
        for container in self.containers:
            if container.label == label:
                return container
        raise UnknownLabel(f"no container labeled {label!r}")

    def digest(self) -> str:
        """Stable 16-hex-char fingerprint of the observable state."""
        def rounded(pose: Pose6D) -> list[float]:
            return [round(v, 9) for v in (pose.x, pose.y, pose.z, pose.roll, pose.pitch, pose.yaw)]

        payload = {
            "effector": rounded(self.effector_pose),
            "gripper": round(self.gripper, 9),
            "objects": [
                [obj.label, rounded(obj.pose), obj.graspable, obj.attached] for obj in self.objects
            ],
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def _pose_from(obj: dict, key: str, path: str) -> Pose6D:
    data = schema.expect_object(obj[key], f"{path}.{key}", {"x", "y", "z", "roll", "pitch", "yaw"})
    return Pose6D.from_dict(data)


def load_world(path: str | Path) -> WorldState:
    """Load a world file: initial pose, table height, objects, containers."""
    document = json.loads(Path(path).read_text(encoding="utf-8"))
    root = schema.expect_object(
        document, "$", {"initial_pose", "objects", "containers"}, {"table_height"}
    )
    initial_pose = _pose_from(root, "initial_pose", "$")
    objects = []
    for i, raw in enumerate(schema.expect_list(root, "objects", "$")):
        obj = schema.expect_object(raw, f"$.objects[{i}]", {"label", "pose"}, {"graspable"})
        objects.append(
            SimObject(
                label=schema.expect_str(obj, "label", f"$.objects[{i}]"),
                pose=_pose_from(obj, "pose", f"$.objects[{i}]"),
                graspable=obj.get("graspable", True),
            )
        )
    containers = []
    for i, raw in enumerate(schema.expect_list(root, "containers", "$")):
        container = schema.expect_object(raw, f"$.containers[{i}]", {"label", "center", "radius"})
        containers.append(
            ContainerRegion(
                label=schema.expect_str(container, "label", f"$.containers[{i}]"),
                center=_pose_from(container, "center", f"$.containers[{i}]"),
                radius=schema.expect_number(container, "radius", f"$.containers[{i}]"),
            )
        )
    table_height = float(root.get("table_height", 0.0))
    return WorldState(
        effector_pose=initial_pose,
        gripper=0.0,
        objects=objects,
        containers=containers,
        initial_pose=initial_pose,
        table_height=table_height,
    )


def _horizontal_distance(a: Pose6D, b: Pose6D) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


def _nearest_graspable(world: WorldState, pose: Pose6D) -> SimObject | None:
    best: SimObject | None = None
    best_distance = float("inf")
    for obj in world.objects:
        if not obj.graspable or obj.attached:
            continue
        horizontal = _horizontal_distance(obj.pose, pose)
        vertical = abs(obj.pose.z - pose.z)
        if horizontal <= GRASP_HORIZONTAL_TOL and vertical <= GRASP_VERTICAL_TOL:
            if horizontal < best_distance:
                best, best_distance = obj, horizontal
    return best


def apply_command(world: WorldState, cmd: Command) -> WorldState:
    """One simulation step: teleport, move any held object, then grip transitions.

    Closing attaches the nearest graspable object within tolerance of the
    new pose, if any; opening drops a held object onto the table plane at
    the effector's x, y. Unreachable poses do not exist here.
    """
    new = world.copy()
    was_closed = new.gripper >= CLOSED_THRESHOLD
    now_closed = cmd.gripper >= CLOSED_THRESHOLD
    new.effector_pose = cmd.pose
    new.gripper = float(cmd.gripper)
    held = new.attached_object()
    if held is not None:
        held.pose = cmd.pose
    if now_closed and not was_closed and held is None:
        target = _nearest_graspable(new, cmd.pose)
        if target is not None:
            target.attached = True
            target.pose = cmd.pose
    elif was_closed and not now_closed and held is not None:
        held.attached = False
        held.pose = Pose6D(cmd.pose.x, cmd.pose.y, new.table_height, 0.0, 0.0, 0.0)
    return new


def containment_check(world: WorldState, object_label: str, container_label: str) -> bool:
    """True iff the object sits within the container's horizontal radius."""
    obj = world.find_object(object_label)
    container = world.find_container(container_label)
    return _horizontal_distance(obj.pose, container.center) <= container.radius


@dataclass(frozen=True)
class CommandReport:
    index: int
    pose: Pose6D
    gripper: float
    event: str  # "moved" | "grasped <label>" | "released <label>"


@dataclass(frozen=True)
class BatchReport:
    task_name: str
    commands: tuple[CommandReport, ...]
    world_digest: str


@dataclass(frozen=True)
class RequestReport:
    batches: tuple[BatchReport, ...]
    final_pose: Pose6D
    total_commands: int  # includes the implicit return move
    ok: bool = True


def _event_for(before: WorldState, after: WorldState) -> str:
    held_before = before.attached_object()
    held_after = after.attached_object()
    if held_before is None and held_after is not None:
        return f"grasped {held_after.label}"
    if held_before is not None and held_after is None:
        return f"released {held_before.label}"
    return "moved"


def execute_batch(
    world: WorldState,
    batch: CommandBatch,
    on_command: Callable[[int], None] | None = None,
) -> tuple[WorldState, BatchReport]:
    """Apply every command in order, reporting a per-command outcome."""
    reports = []
    for index, cmd in enumerate(batch.commands):
        after = apply_command(world, cmd)
        reports.append(CommandReport(index, cmd.pose, cmd.gripper, _event_for(world, after)))
        world = after
        assert sum(1 for obj in world.objects if obj.attached) <= 1
        if on_command is not None:
            on_command(index)
    return world, BatchReport(batch.task_name, tuple(reports), world.digest())


def execute_request(
    world: WorldState,
    batches: Sequence[CommandBatch],
    on_progress: ProgressFn | None = None,
) -> tuple[WorldState, RequestReport]:
    """Execute all batches of one request, then return the robot home.

    One progress event fires per command, plus one for the implicit return
    move (reported as batch index len(batches), command 0).
    """
    reports = []
    total = 0
    for batch_index, batch in enumerate(batches):
        def forward(command_index: int, _batch_index: int = batch_index) -> None:
            if on_progress is not None:
                on_progress(_batch_index, command_index)

        world, report = execute_batch(world, batch, forward)
        reports.append(report)
        total += len(batch.commands)
    world = apply_command(world, Command(world.initial_pose, world.gripper))
    total += 1
    if on_progress is not None:
        on_progress(len(batches), 0)
    return world, RequestReport(tuple(reports), world.effector_pose, total)
