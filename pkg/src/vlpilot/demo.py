"""Self-contained demo scenes for offline runs.

Builds everything a scripted end-to-end run needs: a synthetic tabletop
image, per-label segmentation masks with known blob centers (plus a dim
distractor blob so region selection actually has to choose), scripted
vision/LLM fixtures, a matching simulator world, and a ready-to-use config.

Run `python -m vlpilot.demo <dir>` to materialize the sample tree.
"""
from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .gateway import slug
from .imaging import ImageFrame, Mask

IMAGE_WIDTH = 160
IMAGE_HEIGHT = 120

FX = FY = 120.0
CX, CY = 80.0, 60.0

# Camera looks straight down from the home pose; depth equals the height
# above the table, so detected objects land on the table plane (z = 0).
CAPTURE_HEIGHT = 0.8
DEPTH = 0.8

CONTAINER_RADIUS = 0.08

DISTRACTOR_SIZE = 10
DISTRACTOR_LEVEL = 140  # of 255; survives a 0.5-relative threshold, loses the median contest


@dataclass(frozen=True)
class Blob:
    label: str
    cols: tuple[int, int]  # inclusive pixel range
    rows: tuple[int, int]
    color: tuple[int, int, int]
    graspable: bool = False
    container: bool = False
    distractor: tuple[int, int] | None = None  # (row, col) corner of the dim decoy blob

    @property
    def center(self) -> tuple[float, float]:
        return (self.cols[0] + self.cols[1]) / 2.0, (self.rows[0] + self.rows[1]) / 2.0


@dataclass(frozen=True)
class Scenario:
    name: str
    blobs: tuple[Blob, ...]
    vlm_text: str
    instruction: str
    completion: str


@dataclass(frozen=True)
class ScenarioPaths:
    root: Path
    config: Path
    image: Path
    world: Path
    fixtures: Path
    instruction: str
    labels: tuple[str, ...]
    blob_centers: dict[str, tuple[float, float]]
    world_positions: dict[str, tuple[float, float, float]]


CLEAN_BOTTLE = Scenario(
    name="clean_bottle",
    blobs=(
        Blob("Trash can", (33, 47), (38, 52), (90, 110, 120), container=True, distractor=(100, 140)),
        Blob("Bottle", (103, 117), (64, 76), (60, 160, 60), graspable=True, distractor=(8, 8)),
    ),
    vlm_text="1. Trash can\n2. Bottle",
    instruction="Clean the bottle",
    completion="pick_and_place: [bottle, trash can]",
)

TWO_BOXES = Scenario(
    name="two_boxes",
    blobs=(
        Blob("Can", (24, 36), (24, 36), (180, 60, 60), graspable=True, distractor=(100, 60)),
        Blob("Green box", (124, 136), (24, 36), (40, 150, 40), container=True, distractor=(100, 8)),
        Blob("Bottle", (24, 36), (84, 96), (60, 160, 60), graspable=True, distractor=(8, 60)),
        Blob("Red box", (124, 136), (84, 96), (170, 40, 40), container=True, distractor=(8, 100)),
    ),
    vlm_text="1. Can\n2. Green box\n3. Bottle\n4. Red box",
    instruction="Put the can into the green box and the bottle into the red box",
    completion="pick_and_place: [can, green box]\npick_and_place: [bottle, red box]",
)


def world_position(u: float, v: float) -> tuple[float, float, float]:
    """Where a pixel lands in the robot base frame for the demo camera setup.

    The home pose carries roll=pi (top-down camera), so camera x maps to
    world +x and camera y to world -y.
    """
    return (
        0.5 + (u - CX) / FX * DEPTH,
        -((v - CY) / FY * DEPTH),
        CAPTURE_HEIGHT - DEPTH,
    )


def ur10_info_dict() -> dict:
    return {
        "name": "UR10",
        "description": "Six-axis arm with a two-finger gripper and a wrist-mounted camera.",
        "initial_pose": {"x": 0.5, "y": 0.0, "z": CAPTURE_HEIGHT, "roll": math.pi, "pitch": 0.0, "yaw": 0.0},
        "camera_mount": {
            "translation": [0.0, 0.0, 0.0],
            "rotation": [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        },
        "tasks": [
            {
                "name": "open the gripper",
                "description": "Release by opening the fingers fully.",
                "program_id": "open_gripper",
                "params": [],
            },
            {
                "name": "close the gripper",
                "description": "Clamp the fingers shut.",
                "program_id": "close_gripper",
                "params": [],
            },
            {
                "name": "move to",
                "description": "Hover the end effector above a given object.",
                "program_id": "move_to",
                "params": [{"name": "target_object", "kind": "object-ref"}],
            },
            {
                "name": "pick and place",
                "description": "Grasp the first object and drop it at the second.",
                "program_id": "pick_and_place",
                "params": [
                    {"name": "source_object", "kind": "object-ref"},
                    {"name": "destination_object", "kind": "object-ref"},
                ],
            },
        ],
    }


def default_prompt_templates() -> list[dict]:
    return [
        {
            "llm_id": "default",
            "system_text": (
                "You control a robot arm through a fixed task set.\n"
                "\n"
                "Objects detected in the scene:\n"
                "{environment}\n"
                "\n"
                "{robot}\n"
                "\n"
                "Respond with one task per line, formatted exactly as:\n"
                "action_name: [param_1, param_2]\n"
                "Use only the listed task and object names. Output the task lines and nothing else.\n"
                "\n"
                "Instruction: {instruction}\n"
            ),
        }
    ]


def _render_image(scenario: Scenario) -> ImageFrame:
    array = np.full((IMAGE_HEIGHT, IMAGE_WIDTH, 3), 200, dtype=np.uint8)
    for blob in scenario.blobs:
        array[blob.rows[0] : blob.rows[1] + 1, blob.cols[0] : blob.cols[1] + 1] = blob.color
    return ImageFrame.from_array(array)


def _render_mask(blob: Blob) -> Mask:
    array = np.zeros((IMAGE_HEIGHT, IMAGE_WIDTH), dtype=float)
    array[blob.rows[0] : blob.rows[1] + 1, blob.cols[0] : blob.cols[1] + 1] = 1.0
    if blob.distractor is not None:
        row, col = blob.distractor
        array[row : row + DISTRACTOR_SIZE, col : col + DISTRACTOR_SIZE] = DISTRACTOR_LEVEL / 255.0
    return Mask(array)


def _world_dict(scenario: Scenario) -> dict:
    def pose(position: tuple[float, float, float]) -> dict:
        return {"x": position[0], "y": position[1], "z": position[2], "roll": 0.0, "pitch": 0.0, "yaw": 0.0}

    objects = []
    containers = []
    for blob in scenario.blobs:
        position = world_position(*blob.center)
        if blob.container:
            containers.append(
                {"label": blob.label.lower(), "center": pose(position), "radius": CONTAINER_RADIUS}
            )
        else:
            objects.append(
                {"label": blob.label.lower(), "pose": pose(position), "graspable": blob.graspable}
            )
    initial = ur10_info_dict()["initial_pose"]
    return {"initial_pose": initial, "table_height": 0.0, "objects": objects, "containers": containers}


def _config_dict(
    controller_port: int,
    service_port: int,
    require_approval: bool,
    controller_host: str = "127.0.0.1",
) -> dict:
    return {
        "robot_info": "../ur10.json",
        "prompt_templates": "../prompts.json",
        "perception": {
            "intrinsics": {"fx": FX, "fy": FY, "cx": CX, "cy": CY},
            "default_depth": DEPTH,
            "blur": {"kernel": 5, "sigma": 1.0},
            "threshold_fraction": 0.5,
            "connectivity": 8,
            "min_region_area": 25,
        },
        "backends": {
            "vlm": {"kind": "scripted", "script": "fixtures"},
            "segmenter": {"kind": "scripted", "script": "fixtures"},
            "llm": {"kind": "scripted", "script": "fixtures"},
            "embedder": {"kind": "builtin-trigram"},
        },
        "thresholds": {"action": 0.5, "param": 0.35},
        "motion": {"hover_height": 0.20, "grasp_descent": 0.02},
        "require_approval": require_approval,
        "controller": {"host": controller_host, "port": controller_port, "world": "world.json"},
        "service": {"host": "127.0.0.1", "port": service_port},
    }


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")


def write_shared_files(root: Path) -> None:
    root.mkdir(parents=True, exist_ok=True)
    _write_json(root / "ur10.json", ur10_info_dict())
    _write_json(root / "prompts.json", default_prompt_templates())


def write_scenario(
    scenario: Scenario,
    root: Path,
    controller_port: int = 8765,
    service_port: int = 8080,
    require_approval: bool = False,
) -> ScenarioPaths:
    """Materialize one scenario under root/<name>/; shared files go to root/."""
    write_shared_files(root)
    scenario_dir = root / scenario.name
    fixtures = scenario_dir / "fixtures"
    for sub in ("vlm", "llm", "seg"):
        (fixtures / sub).mkdir(parents=True, exist_ok=True)

    image = _render_image(scenario)
    image_path = scenario_dir / "image.png"
    image.save(image_path)
    (fixtures / "vlm" / f"{image.digest()}.txt").write_text(scenario.vlm_text, encoding="utf-8")
    (fixtures / "llm" / f"{slug(scenario.instruction)}.txt").write_text(scenario.completion, encoding="utf-8")
    for blob in scenario.blobs:
        _render_mask(blob).save(fixtures / "seg" / f"{slug(blob.label)}.png")

    world_path = scenario_dir / "world.json"
    _write_json(world_path, _world_dict(scenario))
    config_path = scenario_dir / "config.json"
    _write_json(config_path, _config_dict(controller_port, service_port, require_approval))

    return ScenarioPaths(
        root=scenario_dir,
        config=config_path,
        image=image_path,
        world=world_path,
        fixtures=fixtures,
        instruction=scenario.instruction,
        labels=tuple(blob.label for blob in scenario.blobs),
        blob_centers={blob.label: blob.center for blob in scenario.blobs},
        world_positions={blob.label: world_position(*blob.center) for blob in scenario.blobs},
    )


def write_samples(root: Path) -> None:
    """The shipped sample tree: both scenarios plus a console-oriented config."""
    write_scenario(CLEAN_BOTTLE, root)
    write_scenario(TWO_BOXES, root)
    console_config = _config_dict(18765, 18080, require_approval=True)
    _write_json(root / "clean_bottle" / "config_console.json", console_config)


if __name__ == "__main__":
    target = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("samples")
    write_samples(target)
    print(f"sample tree written to {target}")
