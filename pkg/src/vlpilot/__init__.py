"""vlpilot: language + vision in, validated robot task execution out.

An instruction and a camera frame go through perception (vision model +
zero-shot segmentation + centroid geometry), planning (templated LLM
prompt, line-grammar plan parsing), fuzzy name resolution, pre-programmed
task expansion, and dispatch to a robot controller over a newline-JSON TCP
protocol. All model inference sits behind pluggable backends, so the whole
pipeline runs offline against scripted fixtures and a tabletop simulator.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .errors import PilotError
from .geometry import Pose6D, RigidTransform
from .imaging import ImageFrame, Mask
from .perception import SceneObject

__all__ = [
    "PilotError",
    "Pose6D",
    "RigidTransform",
    "ImageFrame",
    "Mask",
    "SceneObject",
    "__version__",
]
