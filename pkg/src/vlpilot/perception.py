"""Scene understanding: from (image, vision-model text) to named world-space objects.

The geometry chain per detected label: segment -> Gaussian blur -> relative
threshold -> connected components -> highest-median region -> centroid ->
pinhole back-projection into the robot's base frame.
"""
from __future__ import annotations

import logging
import math
import re
from collections import deque
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import AllSegmentationsFailed, EmptyEnvironment, NoRegion
from .geometry import Pose6D, RigidTransform
from .imaging import ImageFrame, Mask
from .matcher import strip_enum_prefix

if TYPE_CHECKING:
    from .gateway import ModelGateway

logger = logging.getLogger(__name__)

# Kept as short as the job allows; one object per line is what the list parser expects.
DEFAULT_VLM_PROMPT = "List the objects, with only one object per line."

# Objects are approached straight down; orientation planning is out of scope.
GRASP_ROLL = math.pi
GRASP_PITCH = 0.0
GRASP_YAW = 0.0

_DUP_SUFFIX = re.compile(r" #\d+$")


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole parameters, all in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if self.cx < 0 or self.cy < 0:
            raise ValueError("principal point must be non-negative")


@dataclass(frozen=True)
class BlurSettings:
    kernel: int = 5
    sigma: float = 1.0

    def __post_init__(self):
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ValueError("blur kernel must be odd and >= 1")
        if self.sigma <= 0:
            raise ValueError("blur sigma must be positive")


@dataclass(frozen=True)
class PerceptionConfig:
    intrinsics: CameraIntrinsics
    default_depth: float
    depth_overrides: dict[str, float] = field(default_factory=dict)
    blur: BlurSettings = BlurSettings()
    threshold_fraction: float = 0.5
    connectivity: int = 8
    min_region_area: int = 25

    def __post_init__(self):
        if self.default_depth <= 0:
            raise ValueError("default_depth must be positive")
        for label, depth in self.depth_overrides.items():
            if depth <= 0:
                raise ValueError(f"depth override for {label!r} must be positive")
        if not 0.0 < self.threshold_fraction < 1.0:
            raise ValueError("threshold_fraction must lie in (0, 1)")
        if self.connectivity not in (4, 8):
            raise ValueError("connectivity must be 4 or 8")

    def depth_for(self, label: str) -> float:
        if label in self.depth_overrides:
            return self.depth_overrides[label]
        base = _DUP_SUFFIX.sub("", label)
        return self.depth_overrides.get(base, self.default_depth)


@dataclass(frozen=True)
class SceneObject:
    """A detected object: exact label, subpixel centroid, world pose."""

    label: str
    pixel_centroid: tuple[float, float]
    world_pose: Pose6D
    region_area: int
    region_median_intensity: float

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "pixel_centroid": {"u": self.pixel_centroid[0], "v": self.pixel_centroid[1]},
            "world_pose": self.world_pose.to_dict(),
            "region_area": self.region_area,
            "region_median_intensity": self.region_median_intensity,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SceneObject":
        return cls(
            label=data["label"],
            pixel_centroid=(float(data["pixel_centroid"]["u"]), float(data["pixel_centroid"]["v"])),
            world_pose=Pose6D.from_dict(data["world_pose"]),
            region_area=int(data["region_area"]),
            region_median_intensity=float(data["region_median_intensity"]),
        )


def parse_object_list(vlm_text: str) -> list[str]:
    """Turn the vision model's free text into one label per detected line.

    Enumeration markers and surrounding whitespace are stripped, empty lines
    dropped. Duplicate labels stay in the list but get " #2", " #3", ...
    suffixes so downstream matching can bind each one uniquely.
    """
    labels: list[str] = []
    counts: dict[str, int] = {}
    for raw_line in vlm_text.splitlines():
        label = strip_enum_prefix(raw_line.strip()).strip()
        if not label:
            continue
        seen = counts.get(label, 0)
        counts[label] = seen + 1
        labels.append(label if seen == 0 else f"{label} #{seen + 1}")
    if not labels:
        raise EmptyEnvironment("the vision model reported no objects")
    return labels


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    radius = size // 2
    offsets = np.arange(-radius, radius + 1, dtype=float)
    weights = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    return weights / weights.sum()


def gaussian_blur(mask: Mask, kernel: int = 5, sigma: float = 1.0) -> Mask:
    """Separable Gaussian blur with edge-clamp borders."""
    if kernel < 1 or kernel % 2 == 0:
        raise ValueError("kernel must be odd and >= 1")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if kernel == 1:
        return Mask(mask.data.copy())
    weights = _gaussian_kernel(kernel, sigma)
    radius = kernel // 2
    data = mask.data
    padded = np.pad(data, ((radius, radius), (0, 0)), mode="edge")
    data = sliding_window_view(padded, kernel, axis=0) @ weights
    padded = np.pad(data, ((0, 0), (radius, radius)), mode="edge")
    data = sliding_window_view(padded, kernel, axis=1) @ weights
    return Mask(np.clip(data, 0.0, 1.0))


def threshold(mask: Mask, fraction: float) -> Mask:
    """Binary mask: 1 where intensity >= fraction * max(mask), else 0.

    An all-zero input stays all-zero rather than lighting up everywhere.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie in (0, 1)")
    peak = float(mask.data.max())
    if peak <= 0.0:
        return Mask(np.zeros_like(mask.data))
    return Mask((mask.data >= fraction * peak).astype(float))


@dataclass(frozen=True, eq=False)
class Region:
    """A connected foreground region; pixels are (row, col) pairs."""

    pixels: np.ndarray

    @property
    def area(self) -> int:
        return len(self.pixels)

    def centroid(self) -> tuple[float, float]:
        return centroid(self)

    def bbox(self) -> tuple[int, int, int, int]:
        rows = self.pixels[:, 0]
        cols = self.pixels[:, 1]
        return int(rows.min()), int(cols.min()), int(rows.max()), int(cols.max())


_NEIGHBORS_4 = ((-1, 0), (1, 0), (0, -1), (0, 1))
_NEIGHBORS_8 = _NEIGHBORS_4 + ((-1, -1), (-1, 1), (1, -1), (1, 1))


def connected_components(binary: Mask, connectivity: int = 8) -> list[Region]:
    """Maximal connected foreground regions, ordered by first pixel in scan order."""
    if connectivity not in (4, 8):
        raise ValueError("connectivity must be 4 or 8")
    data = binary.data
    if not np.isin(data, (0.0, 1.0)).all():
        raise ValueError("connected_components expects a binary mask")
    neighbors = _NEIGHBORS_4 if connectivity == 4 else _NEIGHBORS_8
    height, width = data.shape
    foreground = data > 0.5
    visited = np.zeros_like(foreground, dtype=bool)
    regions: list[Region] = []
    for row in range(height):
        for col in range(width):
            if not foreground[row, col] or visited[row, col]:
                continue
            queue = deque([(row, col)])
            visited[row, col] = True
            pixels = []
            while queue:
                r, c = queue.popleft()
                pixels.append((r, c))
                for dr, dc in neighbors:
                    nr, nc = r + dr, c + dc
                    if 0 <= nr < height and 0 <= nc < width and foreground[nr, nc] and not visited[nr, nc]:
                        visited[nr, nc] = True
                        queue.append((nr, nc))
            regions.append(Region(np.array(pixels, dtype=int)))
    return regions


def region_median(region: Region, intensities: Mask) -> float:
    return float(np.median(intensities.data[region.pixels[:, 0], region.pixels[:, 1]]))


def select_region(regions: list[Region], blurred: Mask, min_area: int) -> Region:
    """Pick the region with the highest median blurred intensity.

    Regions below `min_area` are ignored. Median ties (within 1e-12) break
    toward the larger area, then toward scan order.
    """
    best: Region | None = None
    best_median = float("-inf")
    for region in regions:
        if region.area < min_area:
            continue
        median = region_median(region, blurred)
        if best is None or median > best_median + 1e-12:
            best, best_median = region, median
        elif abs(median - best_median) <= 1e-12 and region.area > best.area:
            best = region
    if best is None:
        raise NoRegion(f"no region with area >= {min_area}")
    return best


def centroid(region: Region) -> tuple[float, float]:
    """Unweighted pixel-mean centroid as subpixel (u, v) = (col, row)."""
    if region.area == 0:
        raise ValueError("region is empty")
    return float(region.pixels[:, 1].mean()), float(region.pixels[:, 0].mean())


def pixel_to_world(
    u: float,
    v: float,
    depth: float,
    intrinsics: CameraIntrinsics,
    camera_mount: RigidTransform,
    capture_pose: Pose6D,
) -> Pose6D:
    """Back-project a pixel at a known depth into the robot's base frame.

    Camera axes: +x image-right, +y image-down, +z optical-forward, so a
    capture pose with identity attitude points the optical axis along world
    +z and a top-down camera carries roll=pi. The returned orientation is
    the fixed top-down grasp attitude.
    """
    if depth <= 0:
        raise ValueError("depth must be positive")
    camera_point = np.array(
        [
            (u - intrinsics.cx) / intrinsics.fx * depth,
            (v - intrinsics.cy) / intrinsics.fy * depth,
            depth,
        ]
    )
    world = capture_pose.as_matrix() @ camera_mount.as_matrix() @ np.append(camera_point, 1.0)
    return Pose6D(world[0], world[1], world[2], GRASP_ROLL, GRASP_PITCH, GRASP_YAW)


def segmentation_query(label: str) -> str:
    """What the segmenter is asked for: the label minus any " #k" suffix."""
    return _DUP_SUFFIX.sub("", label)


def perceive(
    image: ImageFrame,
    config: PerceptionConfig,
    gateway: "ModelGateway",
    capture_pose: Pose6D,
    camera_mount: RigidTransform | None = None,
    on_warning: Callable[[str], None] | None = None,
) -> list[SceneObject]:
    """Run the full perception pipeline and return objects in VLM list order.

    Labels whose segmentation yields no usable region are dropped with a
    warning rather than failing the scene; losing every label raises
    AllSegmentationsFailed.
    """
    if not (0 <= config.intrinsics.cx < image.width and 0 <= config.intrinsics.cy < image.height):
        raise ValueError("principal point lies outside the image")
    mount = camera_mount if camera_mount is not None else RigidTransform.identity()
    vlm_text = gateway.vlm_describe(image, DEFAULT_VLM_PROMPT)
    labels = parse_object_list(vlm_text)

    objects: list[SceneObject] = []
    for label in labels:
        mask = gateway.segment_label(image, segmentation_query(label))
        blurred = gaussian_blur(mask, config.blur.kernel, config.blur.sigma)
        binary = threshold(blurred, config.threshold_fraction)
        regions = connected_components(binary, config.connectivity)
        try:
            region = select_region(regions, blurred, config.min_region_area)
        except NoRegion as exc:
            message = f"dropping {label!r}: {exc}"
            logger.warning(message)
            if on_warning is not None:
                on_warning(message)
            continue
        u, v = centroid(region)
        pose = pixel_to_world(u, v, config.depth_for(label), config.intrinsics, mount, capture_pose)
        objects.append(
            SceneObject(
                label=label,
                pixel_centroid=(u, v),
                world_pose=pose,
                region_area=region.area,
                region_median_intensity=region_median(region, blurred),
            )
        )
    if not objects:
        raise AllSegmentationsFailed("every detected label was dropped during segmentation")
    return objects
