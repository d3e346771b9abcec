"""Pre-programmed parametric task programs.

Each program expands a resolved action into an ordered batch of
(end-effector pose, gripper value) commands. Programs are pure functions of
their context and parameters; the controller owns the return-to-home move.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

from .errors import SameObject, UnknownProgramId
from .geometry import Pose6D
from .perception import SceneObject

GRIPPER_OPEN = 0.0
GRIPPER_CLOSED = 1.0

DEFAULT_HOVER_HEIGHT = 0.20
DEFAULT_GRASP_DESCENT = 0.02


@dataclass(frozen=True)
class Command:
    """One controller step: a pose to reach and a gripper value (0 open, 1 closed)."""

    pose: Pose6D
    gripper: float

    def __post_init__(self):
        if not 0.0 <= self.gripper <= 1.0:
            raise ValueError(f"gripper value must lie in [0, 1], got {self.gripper}")


@dataclass(frozen=True)
class CommandBatch:
    commands: tuple[Command, ...]
    task_name: str
    params: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.commands:
            raise ValueError("a command batch must contain at least one command")
        object.__setattr__(self, "commands", tuple(self.commands))
        object.__setattr__(self, "params", tuple(self.params))

    @property
    def final_pose(self) -> Pose6D:
        return self.commands[-1].pose

    @property
    def final_gripper(self) -> float:
        return self.commands[-1].gripper


@dataclass(frozen=True)
class MotionSettings:
    hover_height: float = DEFAULT_HOVER_HEIGHT
    grasp_descent: float = DEFAULT_GRASP_DESCENT

    def __post_init__(self):
        if self.hover_height <= 0:
            raise ValueError("hover_height must be positive")


@dataclass(frozen=True)
class TaskContext:
    """Kinematic state threaded between consecutive programs."""

    start_pose: Pose6D
    initial_pose: Pose6D
    gripper_state: float = GRIPPER_OPEN
    hover_height: float = DEFAULT_HOVER_HEIGHT
    grasp_descent: float = DEFAULT_GRASP_DESCENT

    def __post_init__(self):
        if self.hover_height <= 0:
            raise ValueError("hover_height must be positive")


def _hover(pose: Pose6D, height: float) -> Pose6D:
    return pose.with_z(pose.z + height)


def program_open_gripper(ctx: TaskContext) -> CommandBatch:
    return CommandBatch((Command(ctx.start_pose, GRIPPER_OPEN),), "open_gripper")


def program_close_gripper(ctx: TaskContext) -> CommandBatch:
    return CommandBatch((Command(ctx.start_pose, GRIPPER_CLOSED),), "close_gripper")


def program_move_to(ctx: TaskContext, target: SceneObject) -> CommandBatch:
    """Move above the target, keeping whatever grip state the plan left us in."""
    pose = _hover(target.world_pose, ctx.hover_height)
    return CommandBatch((Command(pose, ctx.gripper_state),), "move_to", (target.label,))


def program_pick_and_place(ctx: TaskContext, source: SceneObject, destination: SceneObject) -> CommandBatch:
    """Eight-step ladder: hover, descend, close, lift, hover, descend, open, lift.

    The gripper toggles as separate commands at unchanged poses so grasp
    events are unambiguous to the controller.
    """
    if source.label == destination.label:
        raise SameObject(f"source and destination are both {source.label!r}")
    src, dst = source.world_pose, destination.world_pose
    src_hover = _hover(src, ctx.hover_height)
    src_grasp = src.with_z(src.z + ctx.grasp_descent)
    dst_hover = _hover(dst, ctx.hover_height)
    dst_drop = dst.with_z(dst.z + ctx.grasp_descent)
    commands = (
        Command(src_hover, GRIPPER_OPEN),
        Command(src_grasp, GRIPPER_OPEN),
        Command(src_grasp, GRIPPER_CLOSED),
        Command(src_hover, GRIPPER_CLOSED),
        Command(dst_hover, GRIPPER_CLOSED),
        Command(dst_drop, GRIPPER_CLOSED),
        Command(dst_drop, GRIPPER_OPEN),
        Command(dst_hover, GRIPPER_OPEN),
    )
    return CommandBatch(commands, "pick_and_place", (source.label, destination.label))


@dataclass(frozen=True)
class TaskProgram:
    program_id: str
    object_params: int
    expand: Callable[..., CommandBatch] = field(repr=False)


PROGRAMS: dict[str, TaskProgram] = {
    "open_gripper": TaskProgram("open_gripper", 0, program_open_gripper),
    "close_gripper": TaskProgram("close_gripper", 0, program_close_gripper),
    "move_to": TaskProgram("move_to", 1, program_move_to),
    "pick_and_place": TaskProgram("pick_and_place", 2, program_pick_and_place),
}


def run_program(
    program_id: str,
    ctx: TaskContext,
    objects: Sequence[SceneObject] = (),
    task_name: str | None = None,
) -> CommandBatch:
    """Expand a registered program, optionally relabeling the batch with the robot task name."""
    try:
        program = PROGRAMS[program_id]
    except KeyError:
        raise UnknownProgramId(f"no program registered under {program_id!r}") from None
    if len(objects) != program.object_params:
        raise ValueError(
            f"program {program_id!r} takes {program.object_params} object(s), got {len(objects)}"
        )
    batch = program.expand(ctx, *objects)
    if task_name is not None:
        batch = replace(batch, task_name=task_name)
    return batch
