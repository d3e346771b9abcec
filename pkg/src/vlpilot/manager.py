"""Action manager: binds parsed calls to tasks and scene objects, expands
them into command batches, and dispatches to the controller.

Resolution is all-or-nothing: one unresolvable name or arity mismatch
rejects the whole plan, so nothing half-executes.
"""
from __future__ import annotations

import uuid
from dataclasses import dataclass, field, replace
from typing import Sequence

from .errors import ArityMismatch
from .geometry import Pose6D
from .matcher import Embedder, MatchResult, best_match
from .perception import SceneObject
from .planning import ActionCall
from .robot import RobotInfo, TaskSpec
from .tasklib import CommandBatch, MotionSettings, TaskContext, run_program
from .wire import ControllerClient, ProgressFn, pose_from_wire

DEFAULT_ACTION_THRESHOLD = 0.5
DEFAULT_PARAM_THRESHOLD = 0.35


@dataclass(frozen=True)
class MatchThresholds:
    """Action names are short and formulaic; object descriptions vary more."""

    action: float = DEFAULT_ACTION_THRESHOLD
    param: float = DEFAULT_PARAM_THRESHOLD


@dataclass(frozen=True)
class ResolvedAction:
    task: TaskSpec
    bound_params: tuple[SceneObject, ...]
    match_scores: tuple[MatchResult, ...]  # action name first, then one per bound param

    def __post_init__(self):
        if len(self.bound_params) != self.task.object_ref_count:
            raise ValueError(
                f"task {self.task.name!r} binds {self.task.object_ref_count} object(s), "
                f"got {len(self.bound_params)}"
            )


@dataclass(frozen=True)
class ControllerOutcome:
    ok: bool
    final_pose: Pose6D | None = None
    progress_events: int = 0
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "final_pose": self.final_pose.to_dict() if self.final_pose else None,
            "progress_events": self.progress_events,
            "error": self.error,
        }


@dataclass
class ExecutionReport:
    """End-to-end audit record of one pipeline run."""

    instruction: str
    scene: list[SceneObject] = field(default_factory=list)
    plan: list[ActionCall] = field(default_factory=list)
    resolved: list[ResolvedAction] = field(default_factory=list)
    batches: list[CommandBatch] = field(default_factory=list)
    controller_outcome: ControllerOutcome | None = None
    warnings: list[str] = field(default_factory=list)


def resolve(
    calls: Sequence[ActionCall],
    robot: RobotInfo,
    scene: Sequence[SceneObject],
    thresholds: MatchThresholds = MatchThresholds(),
    embedder: Embedder | None = None,
) -> list[ResolvedAction]:
    """Bind every call's action name to a task and its params to scene objects.

    Action names only ever match task names and parameters only ever match
    scene labels; the two candidate sets never mix. Raises NoMatch or
    ArityMismatch on the first failure, rejecting the whole plan.
    """
    task_names = robot.task_names()
    scene_labels = [obj.label for obj in scene]
    resolved: list[ResolvedAction] = []
    for call in calls:
        action_match = best_match(call.raw_action, task_names, thresholds.action, embedder)
        task = robot.tasks[action_match.candidate_index]
        if len(call.raw_params) != len(task.param_specs):
            raise ArityMismatch(task.name, len(task.param_specs), len(call.raw_params))
        scores = [action_match]
        bound: list[SceneObject] = []
        for spec, raw_param in zip(task.param_specs, call.raw_params):
            if spec.kind != "object-ref":
                continue
            param_match = best_match(raw_param, scene_labels, thresholds.param, embedder)
            bound.append(scene[param_match.candidate_index])
            scores.append(param_match)
        resolved.append(ResolvedAction(task, tuple(bound), tuple(scores)))
    return resolved


def expand(
    resolved: Sequence[ResolvedAction],
    robot: RobotInfo,
    motion: MotionSettings = MotionSettings(),
) -> list[CommandBatch]:
    """Run each task program, threading kinematic state between batches.

    Batch i+1 starts exactly where batch i ended, with the gripper state it
    left behind; the first batch starts from the robot's home pose with the
    gripper open.
    """
    batches: list[CommandBatch] = []
    start_pose = robot.initial_pose
    gripper = 0.0
    for action in resolved:
        ctx = TaskContext(
            start_pose=start_pose,
            initial_pose=robot.initial_pose,
            gripper_state=gripper,
            hover_height=motion.hover_height,
            grasp_descent=motion.grasp_descent,
        )
        assert not batches or ctx.start_pose == batches[-1].final_pose
        batch = run_program(action.task.program_id, ctx, action.bound_params, task_name=action.task.name)
        batch = replace(batch, params=tuple(obj.label for obj in action.bound_params))
        batches.append(batch)
        start_pose = batch.final_pose
        gripper = batch.final_gripper
    return batches


def dispatch(
    batches: Sequence[CommandBatch],
    endpoint: tuple[str, int],
    robot_name: str,
    on_progress: ProgressFn | None = None,
    timeout: float = 30.0,
) -> ControllerOutcome:
    """Send all batches as one execute request and stream its progress."""
    progress_count = 0

    def count_progress(batch_index: int, command_index: int) -> None:
        nonlocal progress_count
        progress_count += 1
        if on_progress is not None:
            on_progress(batch_index, command_index)

    with ControllerClient(endpoint[0], endpoint[1], timeout=timeout) as client:
        client.connect(robot_name)
        done = client.execute(batches, request_id=uuid.uuid4().hex, on_progress=count_progress)
    final_pose = pose_from_wire(done["final_pose"]) if done.get("final_pose") else None
    return ControllerOutcome(ok=bool(done["ok"]), final_pose=final_pose, progress_events=progress_count)
