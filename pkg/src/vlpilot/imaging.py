"""Raw RGB frames and scalar masks, with PNG codecs."""
from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image


@dataclass(frozen=True)
class ImageFrame:
    """Row-major RGB image, 8 bits per channel."""

    width: int
    height: int
    pixels: bytes

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image dimensions must be >= 1, got {self.width}x{self.height}")
        expected = self.width * self.height * 3
        if len(self.pixels) != expected:
            raise ValueError(f"pixel buffer has {len(self.pixels)} bytes, expected {expected}")

    def digest(self) -> str:
        """Content digest used to key scripted vision fixtures (16 hex chars)."""
        h = hashlib.sha256(f"{self.width}x{self.height}:".encode())
        h.update(self.pixels)
        return h.hexdigest()[:16]

    def as_array(self) -> np.ndarray:
        return np.frombuffer(self.pixels, dtype=np.uint8).reshape(self.height, self.width, 3)

    @classmethod
    def from_array(cls, array: np.ndarray) -> "ImageFrame":
        array = np.ascontiguousarray(array, dtype=np.uint8)
        if array.ndim != 3 or array.shape[2] != 3:
            raise ValueError("expected an (H, W, 3) uint8 array")
        return cls(array.shape[1], array.shape[0], array.tobytes())

    @classmethod
    def from_png_bytes(cls, data: bytes) -> "ImageFrame":
        with Image.open(io.BytesIO(data)) as img:
            rgb = img.convert("RGB")
            return cls(rgb.width, rgb.height, rgb.tobytes())

    @classmethod
    def from_file(cls, path: str | Path) -> "ImageFrame":
        return cls.from_png_bytes(Path(path).read_bytes())

    def to_png_bytes(self) -> bytes:
        img = Image.frombytes("RGB", (self.width, self.height), self.pixels)
        buf = io.BytesIO()
        img.save(buf, format="PNG")
        return buf.getvalue()

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_png_bytes())


@dataclass(frozen=True, eq=False)
class Mask:
    """Scalar intensity image in [0, 1], same geometry as its source frame."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError("mask must be a non-empty 2D array")
        if not np.isfinite(data).all():
            raise ValueError("mask intensities must be finite")
        if data.min() < 0.0 or data.max() > 1.0:
            raise ValueError("mask intensities must lie in [0, 1]")
        object.__setattr__(self, "data", data)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @classmethod
    def from_png_bytes(cls, data: bytes) -> "Mask":
        """Decode an 8-bit grayscale PNG, mapping intensities to [0, 1] by /255."""
        with Image.open(io.BytesIO(data)) as img:
            gray = img.convert("L")
            array = np.asarray(gray, dtype=float) / 255.0
        return cls(array)

    @classmethod
    def from_file(cls, path: str | Path) -> "Mask":
        return cls.from_png_bytes(Path(path).read_bytes())

    def to_png_bytes(self) -> bytes:
        quantized = np.rint(self.data * 255.0).astype(np.uint8)
        img = Image.fromarray(quantized, mode="L")
        buf = io.BytesIO()
        img.save(buf, format="PNG")
        return buf.getvalue()

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_png_bytes())
