from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

from vlpilot.config import AppConfig, load_app_config
from vlpilot.demo import CLEAN_BOTTLE, Scenario, ScenarioPaths, ur10_info_dict, write_scenario
from vlpilot.errors import BackendRejected
from vlpilot.gateway import ModelGateway
from vlpilot.geometry import Pose6D
from vlpilot.imaging import Mask
from vlpilot.matcher import TrigramEmbedder
from vlpilot.perception import SceneObject
from vlpilot.robot import RobotInfo, load_robot_info
from vlpilot.simserver import ControllerServer
from vlpilot.simworld import load_world


class FakeVlm:
    def __init__(self, text: str):
        self.text = text

    def describe(self, image, prompt):
        return self.text


class FakeSegmenter:
    def __init__(self, masks: dict[str, Mask]):
        self.masks = masks
        self.requested: list[str] = []

    def segment(self, image, label):
        self.requested.append(label)
        if label not in self.masks:
            raise BackendRejected(f"fake segmenter: no mask for {label!r}")
        return self.masks[label]


class FakeLlm:
    def __init__(self, text: str):
        self.text = text

    def complete(self, prompt):
        return self.text


def make_gateway(vlm_text: str = "", masks: dict[str, Mask] | None = None, llm_text: str = "") -> ModelGateway:
    return ModelGateway(
        vlm=FakeVlm(vlm_text),
        segmenter=FakeSegmenter(masks or {}),
        llm=FakeLlm(llm_text),
        embedder=TrigramEmbedder(),
    )


def blob_mask(height: int, width: int, rows: tuple[int, int], cols: tuple[int, int], value: float = 1.0) -> Mask:
    data = np.zeros((height, width))
    data[rows[0] : rows[1] + 1, cols[0] : cols[1] + 1] = value
    return Mask(data)


def scene_object(label: str, x: float = 0.0, y: float = 0.0, z: float = 0.0) -> SceneObject:
    return SceneObject(
        label=label,
        pixel_centroid=(10.0, 10.0),
        world_pose=Pose6D(x, y, z, np.pi, 0.0, 0.0),
        region_area=100,
        region_median_intensity=1.0,
    )


@pytest.fixture
def ur10_text() -> str:
    return json.dumps(ur10_info_dict())


@pytest.fixture
def ur10(ur10_text) -> RobotInfo:
    return load_robot_info(ur10_text)


@dataclass
class LiveScenario:
    """A demo scenario on disk plus a running controller simulator wired to it."""

    paths: ScenarioPaths
    server: ControllerServer
    config: AppConfig

    @property
    def config_path(self) -> Path:
        return self.paths.config


def start_scenario(
    tmp_path: Path,
    scenario: Scenario = CLEAN_BOTTLE,
    require_approval: bool = False,
) -> LiveScenario:
    """Write scenario fixtures, boot a simulator on an ephemeral port, and
    point the scenario's config at it."""
    paths = write_scenario(scenario, tmp_path, require_approval=require_approval)
    server = ControllerServer(load_world(paths.world))
    host, port = server.start()
    document = json.loads(paths.config.read_text())
    document["controller"]["host"] = host
    document["controller"]["port"] = port
    paths.config.write_text(json.dumps(document, indent=2))
    return LiveScenario(paths, server, load_app_config(paths.config))


@pytest.fixture
def clean_bottle(tmp_path):
    live = start_scenario(tmp_path)
    yield live
    live.server.stop()


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call":
        marker = item.get_closest_marker("criterion")
        if marker is not None:
            verdict = "PASS" if report.passed else "FAIL"
            print(f"\n[{marker.args[0]}] {verdict} - {marker.args[1]}")
