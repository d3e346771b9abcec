"""Poses and rigid transforms.

Orientation is roll/pitch/yaw in the ZYX convention: the rotation matrix is
Rz(yaw) @ Ry(pitch) @ Rx(roll). Angles are kept in (-pi, pi].
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_TWO_PI = 2.0 * math.pi

# Orthonormality / determinant tolerance for rotation matrices.
ROTATION_TOL = 1e-9


def normalize_angle(value: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    wrapped = value % _TWO_PI
    if wrapped > math.pi:
        wrapped -= _TWO_PI
    return wrapped


def rpy_to_matrix(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Rotation matrix for ZYX Euler angles."""
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]], dtype=float)
    ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]], dtype=float)
    rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]], dtype=float)
    return rz @ ry @ rx


@dataclass(frozen=True)
class Pose6D:
    """End-effector pose: position in meters, orientation in radians."""

    x: float
    y: float
    z: float
    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        for name in ("x", "y", "z", "roll", "pitch", "yaw"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"Pose6D.{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        for name in ("roll", "pitch", "yaw"):
            object.__setattr__(self, name, normalize_angle(getattr(self, name)))

    def position(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    def rotation(self) -> np.ndarray:
        return rpy_to_matrix(self.roll, self.pitch, self.yaw)

    def as_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation()
        m[:3, 3] = self.position()
        return m

    def with_z(self, z: float) -> "Pose6D":
        return Pose6D(self.x, self.y, z, self.roll, self.pitch, self.yaw)

    def to_dict(self) -> dict:
        return {
            "x": self.x, "y": self.y, "z": self.z,
            "roll": self.roll, "pitch": self.pitch, "yaw": self.yaw,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Pose6D":
        return cls(**{k: float(data[k]) for k in ("x", "y", "z", "roll", "pitch", "yaw")})


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """3D rigid transform: x' = rotation @ x + translation.

    The rotation must be orthonormal with determinant +1 (tolerance 1e-9).
    """

    translation: np.ndarray
    rotation: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.translation, dtype=float).reshape(3)
        r = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        if not (np.isfinite(t).all() and np.isfinite(r).all()):
            raise ValueError("RigidTransform entries must be finite")
        if np.abs(r @ r.T - np.eye(3)).max() > ROTATION_TOL:
            raise ValueError("rotation is not orthonormal within 1e-9")
        if abs(np.linalg.det(r) - 1.0) > ROTATION_TOL:
            raise ValueError("rotation determinant differs from +1 by more than 1e-9")
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "rotation", r)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.zeros(3), np.eye(3))

    def as_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def apply(self, point: np.ndarray) -> np.ndarray:
        return self.rotation @ np.asarray(point, dtype=float) + self.translation

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RigidTransform):
            return NotImplemented
        return np.array_equal(self.translation, other.translation) and np.array_equal(
            self.rotation, other.rotation
        )

    def to_dict(self) -> dict:
        return {
            "translation": [float(v) for v in self.translation],
            "rotation": [float(v) for v in self.rotation.reshape(9)],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RigidTransform":
        return cls(
            np.asarray(data["translation"], dtype=float),
            np.asarray(data["rotation"], dtype=float).reshape(3, 3),
        )
