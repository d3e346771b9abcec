"""Command-line entry points.

Exit codes: 0 on success, 1 on a failed/rejected run, 2 on usage or
configuration errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import AppConfig, config_path_from_env, load_app_config
from .errors import PilotError
from .geometry import Pose6D
from .imaging import ImageFrame
from .manager import resolve
from .perception import SceneObject
from .pipeline import Pipeline, RunRecord
from .planning import build_prompt, parse_plan
from .service import serve_api
from .simserver import ControllerServer
from .simworld import load_world


def _load_config(args: argparse.Namespace) -> AppConfig:
    return load_app_config(config_path_from_env(args.config))


def _print_json(data: dict) -> None:
    print(json.dumps(data, indent=2))


def _stdin_approval(record: RunRecord) -> bool:
    """Interactive approval gate for `run` when require_approval is set."""
    print("plan awaiting approval:", file=sys.stderr)
    for action in record.report.resolved:
        params = ", ".join(obj.label for obj in action.bound_params)
        print(f"  - {action.task.name}: [{params}]", file=sys.stderr)
    try:
        answer = input("approve? [y/N] ")
    except EOFError:
        answer = ""
    return answer.strip().lower() in ("y", "yes")


def _cmd_run(args: argparse.Namespace) -> int:
    config = _load_config(args)
    image = ImageFrame.from_file(args.image)
    pipeline = Pipeline(config)
    record = pipeline.run(image, args.instruction, approval=_stdin_approval)
    _print_json(record.to_dict(canonical=args.canonical))
    return 0 if record.status == "done" else 1


def _cmd_perceive(args: argparse.Namespace) -> int:
    config = _load_config(args)
    image = ImageFrame.from_file(args.image)
    pipeline = Pipeline(config)
    warnings: list[str] = []
    try:
        scene = pipeline.perceive(image, on_warning=warnings.append)
    except PilotError as exc:
        print(f"perception failed: {exc}", file=sys.stderr)
        return 1
    _print_json({"objects": [obj.to_dict() for obj in scene], "warnings": warnings})
    return 0


def _scene_from_env_file(path: str) -> list[SceneObject]:
    """Accepts either `perceive` output, a list of SceneObject dicts, or a
    bare list of labels (bound at the origin, useful for plan-only runs)."""
    with open(path, "r", encoding="utf-8") as handle:
        document = json.load(handle)
    if isinstance(document, dict) and "objects" in document:
        document = document["objects"]
    if not isinstance(document, list):
        raise ValueError("environment file must hold a list of labels or scene objects")
    scene = []
    for entry in document:
        if isinstance(entry, str):
            scene.append(
                SceneObject(
                    label=entry,
                    pixel_centroid=(0.0, 0.0),
                    world_pose=Pose6D(0.0, 0.0, 0.0),
                    region_area=0,
                    region_median_intensity=0.0,
                )
            )
        else:
            scene.append(SceneObject.from_dict(entry))
    return scene


def _cmd_plan(args: argparse.Namespace) -> int:
    config = _load_config(args)
    pipeline = Pipeline(config)
    try:
        scene = _scene_from_env_file(args.env_json)
        prompt = build_prompt(
            pipeline.template, [obj.label for obj in scene], pipeline.robot_text, args.instruction
        )
        completion = pipeline.gateway.complete(prompt)
        calls = parse_plan(completion)
        resolved = resolve(calls, pipeline.robot, scene, config.thresholds, pipeline.gateway)
    except (PilotError, ValueError) as exc:
        print(f"planning failed: {exc}", file=sys.stderr)
        return 1
    _print_json(
        {
            "completion": completion,
            "plan": [
                {"raw_action": c.raw_action, "raw_params": list(c.raw_params), "source_line": c.source_line}
                for c in calls
            ],
            "resolved": [
                {
                    "task": action.task.name,
                    "params": [obj.label for obj in action.bound_params],
                    "scores": [m.score for m in action.match_scores],
                }
                for action in resolved
            ],
        }
    )
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    config = _load_config(args)
    serve_api(config, console_dir=args.console, with_sim=args.with_sim)
    return 0


def _cmd_sim(args: argparse.Namespace) -> int:
    config = _load_config(args)
    if config.controller.world is None:
        print("config has no controller.world file", file=sys.stderr)
        return 2
    world = load_world(config.controller.world)
    server = ControllerServer(world, config.controller.host, config.controller.port)
    print(f"controller simulator on {config.controller.host}:{config.controller.port}", file=sys.stderr)
    server.serve_forever()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vlpilot", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="full pipeline: image + instruction -> execution report")
    run.add_argument("--image", required=True)
    run.add_argument("--instruction", required=True)
    run.add_argument("--config", help="config file (or set SVLR_CONFIG)")
    run.add_argument("--canonical", action="store_true", help="omit run_id/timestamps from the report")
    run.set_defaults(handler=_cmd_run)

    perceive = sub.add_parser("perceive", help="perception only: print detected objects")
    perceive.add_argument("--image", required=True)
    perceive.add_argument("--config", help="config file (or set SVLR_CONFIG)")
    perceive.set_defaults(handler=_cmd_perceive)

    plan = sub.add_parser("plan", help="prompt + complete + parse + resolve, no dispatch")
    plan.add_argument("--env-json", required=True, help="labels or perceive output")
    plan.add_argument("--instruction", required=True)
    plan.add_argument("--config", help="config file (or set SVLR_CONFIG)")
    plan.set_defaults(handler=_cmd_plan)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--config", help="config file (or set SVLR_CONFIG)")
    serve.add_argument("--console", help="static console directory to serve at /")
    serve.add_argument("--with-sim", action="store_true", help="embed a controller simulator")
    serve.set_defaults(handler=_cmd_serve)

    sim = sub.add_parser("sim", help="run the controller simulator")
    sim.add_argument("--config", help="config file (or set SVLR_CONFIG)")
    sim.set_defaults(handler=_cmd_sim)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO)
    try:
        return args.handler(args)
    except PilotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
