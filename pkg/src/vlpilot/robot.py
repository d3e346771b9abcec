"""Robot description registry.

Loads the robot-info JSON document, validates it against the task library,
and renders the capability text that goes into the planner's prompt. The
loaded RobotInfo is immutable and safe to share across threads.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

from . import schema
from .errors import DuplicateTaskName, SchemaError, TaskNotFound, UnknownProgramId
from .geometry import Pose6D, RigidTransform
from .matcher import normalize_label
from .tasklib import PROGRAMS

PARAM_KINDS = ("object-ref", "none")


@dataclass(frozen=True)
class ParamSpec:
    name: str
    kind: str = "object-ref"


@dataclass(frozen=True)
class TaskSpec:
    name: str
    description: str
    program_id: str
    param_specs: tuple[ParamSpec, ...] = ()

    @property
    def object_ref_count(self) -> int:
        return sum(1 for p in self.param_specs if p.kind == "object-ref")


@dataclass(frozen=True)
class RobotInfo:
    name: str
    description: str
    initial_pose: Pose6D
    camera_mount: RigidTransform
    tasks: tuple[TaskSpec, ...]

    def task_names(self) -> list[str]:
        return [task.name for task in self.tasks]


def _parse_pose(data: dict, path: str) -> Pose6D:
    obj = schema.expect_object(data, path, {"x", "y", "z", "roll", "pitch", "yaw"})
    return Pose6D(**{key: schema.expect_number(obj, key, path) for key in obj})


def _parse_mount(data: dict, path: str) -> RigidTransform:
    obj = schema.expect_object(data, path, {"translation", "rotation"})
    translation = schema.expect_number_list(obj, "translation", path, 3)
    rotation = schema.expect_number_list(obj, "rotation", path, 9)
    try:
        return RigidTransform.from_dict({"translation": translation, "rotation": rotation})
    except ValueError as exc:
        raise SchemaError(f"{path}.rotation", str(exc)) from None


def _parse_task(data: dict, path: str) -> TaskSpec:
    obj = schema.expect_object(data, path, {"name", "description", "program_id", "params"})
    params = []
    for i, raw in enumerate(schema.expect_list(obj, "params", path)):
        param_path = f"{path}.params[{i}]"
        param = schema.expect_object(raw, param_path, {"name", "kind"})
        kind = schema.expect_str(param, "kind", param_path)
        if kind not in PARAM_KINDS:
            raise SchemaError(f"{param_path}.kind", f"must be one of {PARAM_KINDS}, got {kind!r}")
        params.append(ParamSpec(schema.expect_str(param, "name", param_path), kind))
    return TaskSpec(
        name=schema.expect_str(obj, "name", path),
        description=schema.expect_str(obj, "description", path),
        program_id=schema.expect_str(obj, "program_id", path),
        param_specs=tuple(params),
    )


def load_robot_info(source: str) -> RobotInfo:
    """Parse and validate a robot-info JSON document.

    Every program_id must resolve against the task library and carry the
    arity the program expects; task names must stay distinct even after
    matcher normalization, or fuzzy action resolution would be ambiguous.
    """
    try:
        document = json.loads(source)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"not valid JSON: {exc}") from None
    root = schema.expect_object(
        document, "$", {"name", "description", "initial_pose", "camera_mount", "tasks"}
    )
    tasks = [
        _parse_task(raw, f"$.tasks[{i}]") for i, raw in enumerate(schema.expect_list(root, "tasks", "$"))
    ]
    if not tasks:
        raise SchemaError("$.tasks", "a robot needs at least one task")

    seen: dict[str, str] = {}
    for i, task in enumerate(tasks):
        normalized = normalize_label(task.name)
        if not normalized:
            raise SchemaError(f"$.tasks[{i}].name", f"{task.name!r} normalizes to nothing")
        if normalized in seen:
            raise DuplicateTaskName(
                f"task names {seen[normalized]!r} and {task.name!r} both normalize to {normalized!r}"
            )
        seen[normalized] = task.name
        if task.program_id not in PROGRAMS:
            raise UnknownProgramId(f"task {task.name!r} references unknown program {task.program_id!r}")
        expected = PROGRAMS[task.program_id].object_params
        if task.object_ref_count != expected:
            raise SchemaError(
                f"$.tasks[{i}].params",
                f"program {task.program_id!r} takes {expected} object-ref parameter(s), "
                f"task declares {task.object_ref_count}",
            )

    return RobotInfo(
        name=schema.expect_str(root, "name", "$"),
        description=schema.expect_str(root, "description", "$"),
        initial_pose=_parse_pose(root["initial_pose"], "$.initial_pose"),
        camera_mount=_parse_mount(root["camera_mount"], "$.camera_mount"),
        tasks=tuple(tasks),
    )


def load_robot_info_file(path) -> RobotInfo:
    with open(path, "r", encoding="utf-8") as handle:
        return load_robot_info(handle.read())


def robot_info_to_dict(info: RobotInfo) -> dict:
    """Serialize back to the on-disk schema (reload yields an equal RobotInfo)."""
    return {
        "name": info.name,
        "description": info.description,
        "initial_pose": info.initial_pose.to_dict(),
        "camera_mount": info.camera_mount.to_dict(),
        "tasks": [
            {
                "name": task.name,
                "description": task.description,
                "program_id": task.program_id,
                "params": [{"name": p.name, "kind": p.kind} for p in task.param_specs],
            }
            for task in info.tasks
        ],
    }


def describe_for_prompt(info: RobotInfo) -> str:
    """Deterministic capability text: robot name, description, one line per task."""
    lines = [f"Robot: {info.name}", f"Description: {info.description}", "Tasks:"]
    for task in info.tasks:
        params = ", ".join(p.name for p in task.param_specs) if task.param_specs else "(none)"
        lines.append(f"- {task.name}: {task.description} Parameters: {params}")
    return "\n".join(lines)


def lookup_task(info: RobotInfo, task_name: str) -> TaskSpec:
    """Exact-name lookup; fuzzy resolution belongs to the matcher."""
    for task in info.tasks:
        if task.name == task_name:
            return task
    raise TaskNotFound(f"robot {info.name!r} has no task named {task_name!r}")
