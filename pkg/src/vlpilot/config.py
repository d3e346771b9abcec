"""Application configuration: one JSON document wires the whole pipeline.

Relative paths inside the file resolve against the file's own directory,
and every referenced path must exist at load time, so misconfigurations
surface at startup instead of mid-run.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

from . import schema
from .errors import SchemaError
from .gateway import BackendConfig
from .manager import MatchThresholds
from .perception import BlurSettings, CameraIntrinsics, PerceptionConfig
from .tasklib import MotionSettings

CONFIG_ENV_VAR = "SVLR_CONFIG"

BACKEND_ROLES = ("vlm", "segmenter", "llm", "embedder")


@dataclass(frozen=True)
class ControllerSettings:
    host: str = "127.0.0.1"
    port: int = 8765
    world: Path | None = None
    timeout: float = 30.0

    @property
    def endpoint(self) -> tuple[str, int]:
        return self.host, self.port


@dataclass(frozen=True)
class ServiceSettings:
    host: str = "127.0.0.1"
    port: int = 8080


@dataclass(frozen=True)
class AppConfig:
    robot_info: Path
    prompt_templates: Path
    perception: PerceptionConfig
    backends: dict[str, BackendConfig]
    thresholds: MatchThresholds = MatchThresholds()
    motion: MotionSettings = MotionSettings()
    require_approval: bool = False
    controller: ControllerSettings = ControllerSettings()
    service: ServiceSettings = ServiceSettings()


def _parse_perception(data: dict, path: str) -> PerceptionConfig:
    obj = schema.expect_object(
        data,
        path,
        {"intrinsics", "default_depth"},
        {"depth_overrides", "blur", "threshold_fraction", "connectivity", "min_region_area"},
    )
    intr = schema.expect_object(obj["intrinsics"], f"{path}.intrinsics", {"fx", "fy", "cx", "cy"})
    intrinsics = CameraIntrinsics(
        **{key: schema.expect_number(intr, key, f"{path}.intrinsics") for key in intr}
    )
    blur = BlurSettings()
    if "blur" in obj:
        blur_obj = schema.expect_object(obj["blur"], f"{path}.blur", set(), {"kernel", "sigma"})
        blur = BlurSettings(
            kernel=schema.expect_int(blur_obj, "kernel", f"{path}.blur") if "kernel" in blur_obj else 5,
            sigma=schema.expect_number(blur_obj, "sigma", f"{path}.blur") if "sigma" in blur_obj else 1.0,
        )
    overrides = {}
    if "depth_overrides" in obj:
        raw = obj["depth_overrides"]
        if not isinstance(raw, dict):
            raise SchemaError(f"{path}.depth_overrides", "expected an object of label -> meters")
        for label, depth in raw.items():
            if isinstance(depth, bool) or not isinstance(depth, (int, float)):
                raise SchemaError(f"{path}.depth_overrides.{label}", "expected a number")
            overrides[label] = float(depth)
    try:
        return PerceptionConfig(
            intrinsics=intrinsics,
            default_depth=schema.expect_number(obj, "default_depth", path),
            depth_overrides=overrides,
            blur=blur,
            threshold_fraction=(
                schema.expect_number(obj, "threshold_fraction", path) if "threshold_fraction" in obj else 0.5
            ),
            connectivity=schema.expect_int(obj, "connectivity", path) if "connectivity" in obj else 8,
            min_region_area=(
                schema.expect_int(obj, "min_region_area", path) if "min_region_area" in obj else 25
            ),
        )
    except ValueError as exc:
        raise SchemaError(path, str(exc)) from None


def _require_exists(path: Path, field_path: str) -> Path:
    if not path.exists():
        raise SchemaError(field_path, f"path does not exist: {path}")
    return path


def load_app_config(path: str | Path) -> AppConfig:
    path = Path(path)
    base = path.parent
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise SchemaError("$", f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"not valid JSON: {exc}") from None
    root = schema.expect_object(
        document,
        "$",
        {"robot_info", "prompt_templates", "perception", "backends"},
        {"thresholds", "motion", "require_approval", "controller", "service"},
    )

    def resolve(raw: str) -> Path:
        candidate = Path(raw)
        return candidate if candidate.is_absolute() else base / raw

    robot_info = _require_exists(resolve(schema.expect_str(root, "robot_info", "$")), "$.robot_info")
    templates = _require_exists(resolve(schema.expect_str(root, "prompt_templates", "$")), "$.prompt_templates")

    backends_obj = schema.expect_object(root["backends"], "$.backends", set(BACKEND_ROLES))
    backends = {}
    for role in BACKEND_ROLES:
        config = BackendConfig.from_dict(backends_obj[role], f"$.backends.{role}", base)
        if config.script is not None:
            _require_exists(config.script, f"$.backends.{role}.script")
        backends[role] = config

    thresholds = MatchThresholds()
    if "thresholds" in root:
        t = schema.expect_object(root["thresholds"], "$.thresholds", set(), {"action", "param"})
        thresholds = MatchThresholds(
            action=schema.expect_number(t, "action", "$.thresholds") if "action" in t else thresholds.action,
            param=schema.expect_number(t, "param", "$.thresholds") if "param" in t else thresholds.param,
        )

    motion = MotionSettings()
    if "motion" in root:
        m = schema.expect_object(root["motion"], "$.motion", set(), {"hover_height", "grasp_descent"})
        try:
            motion = MotionSettings(
                hover_height=(
                    schema.expect_number(m, "hover_height", "$.motion") if "hover_height" in m else 0.20
                ),
                grasp_descent=(
                    schema.expect_number(m, "grasp_descent", "$.motion") if "grasp_descent" in m else 0.02
                ),
            )
        except ValueError as exc:
            raise SchemaError("$.motion", str(exc)) from None

    controller = ControllerSettings()
    if "controller" in root:
        c = schema.expect_object(root["controller"], "$.controller", set(), {"host", "port", "world", "timeout"})
        world = None
        if "world" in c:
            world = _require_exists(resolve(schema.expect_str(c, "world", "$.controller")), "$.controller.world")
        controller = ControllerSettings(
            host=schema.expect_str(c, "host", "$.controller") if "host" in c else "127.0.0.1",
            port=schema.expect_int(c, "port", "$.controller") if "port" in c else 8765,
            world=world,
            timeout=schema.expect_number(c, "timeout", "$.controller") if "timeout" in c else 30.0,
        )

    service = ServiceSettings()
    if "service" in root:
        s = schema.expect_object(root["service"], "$.service", set(), {"host", "port"})
        service = ServiceSettings(
            host=schema.expect_str(s, "host", "$.service") if "host" in s else "127.0.0.1",
            port=schema.expect_int(s, "port", "$.service") if "port" in s else 8080,
        )

    require_approval = schema.expect_bool(root, "require_approval", "$") if "require_approval" in root else False

    return AppConfig(
        robot_info=robot_info,
        prompt_templates=templates,
        perception=_parse_perception(root["perception"], "$.perception"),
        backends=backends,
        thresholds=thresholds,
        motion=motion,
        require_approval=require_approval,
        controller=controller,
        service=service,
    )


def config_path_from_env(explicit: str | None) -> Path:
    """CLI --config wins; the environment variable is the fallback."""
    if explicit:
        return Path(explicit)
    from_env = os.environ.get(CONFIG_ENV_VAR)
    if not from_env:
        raise SchemaError("$", f"no config file given and {CONFIG_ENV_VAR} is not set")
    return Path(from_env)
