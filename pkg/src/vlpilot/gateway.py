"""Model backend contracts and their two interchangeable implementations.

Every neural model sits behind one of four small contracts (vision
describer, label segmenter, text completer, sentence embedder). The
scripted implementations replay fixture files for offline deterministic
runs; the HTTP implementations call real inference servers with a
configurable minimal JSON contract.
"""
from __future__ import annotations

import base64
import logging
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import httpx
import numpy as np

from . import schema
from .errors import BackendRejected, BackendUnavailable, SchemaError, ShapeMismatch
from .imaging import ImageFrame, Mask
from .matcher import Embedder, TrigramEmbedder

logger = logging.getLogger(__name__)

DEFAULT_TEXT_TIMEOUT = 120.0   # LLM / VLM
DEFAULT_VISION_TIMEOUT = 30.0  # segmenter / embedder

# Backoff between retries on connect errors and 5xx; 4xx never retries.
RETRY_BACKOFF = (0.25, 1.0)

_SLUG_RUN = re.compile(r"[^a-z0-9]+")


def slug(text: str) -> str:
    """Filesystem-safe fixture key: lowercase alphanumerics joined by '-'."""
    return _SLUG_RUN.sub("-", text.lower()).strip("-")


class VlmBackend(Protocol):
    def describe(self, image: ImageFrame, prompt: str) -> str: ...


class SegmenterBackend(Protocol):
    def segment(self, image: ImageFrame, label: str) -> Mask: ...


class LlmBackend(Protocol):
    def complete(self, prompt: str) -> str: ...


# ---------------------------------------------------------------------------
# Scripted fixture backends
# ---------------------------------------------------------------------------

class ScriptedVlm:
    """Replays `vlm/<image-digest>.txt` keyed on the frame's content digest."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def describe(self, image: ImageFrame, prompt: str) -> str:
        path = self.root / "vlm" / f"{image.digest()}.txt"
        if not path.exists():
            raise BackendRejected(f"scripted vlm: no fixture for image digest {image.digest()} in {self.root}")
        return path.read_text(encoding="utf-8")


class ScriptedLlm:
    """Replays `llm/<instruction-slug>.txt`.

    Fixtures are keyed on the user instruction embedded in the prompt, not
    on the whole prompt, so prompt-template changes do not invalidate them:
    a fixture matches when its filename stem occurs in the slugged prompt.
    The longest matching stem wins.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def complete(self, prompt: str) -> str:
        prompt_slug = slug(prompt)
        best: Path | None = None
        for path in sorted((self.root / "llm").glob("*.txt")):
            if path.stem and path.stem in prompt_slug:
                if best is None or len(path.stem) > len(best.stem):
                    best = path
        if best is None:
            raise BackendRejected(f"scripted llm: no fixture matches the prompt in {self.root}")
        return best.read_text(encoding="utf-8")


class ScriptedSegmenter:
    """Replays `seg/<label-slug>.png` as 8-bit grayscale masks."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def segment(self, image: ImageFrame, label: str) -> Mask:
        path = self.root / "seg" / f"{slug(label)}.png"
        if not path.exists():
            raise BackendRejected(f"scripted segmenter: no fixture for label {label!r} in {self.root}")
        return Mask.from_file(path)


class ScriptedEmbedder:
    """Replays `embed/<text-slug>.vec` (whitespace-separated floats)."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def embed(self, text: str) -> np.ndarray:
        path = self.root / "embed" / f"{slug(text)}.vec"
        if not path.exists():
            raise BackendRejected(f"scripted embedder: no fixture for {text!r} in {self.root}")
        return np.array([float(tok) for tok in path.read_text().split()], dtype=float)


# ---------------------------------------------------------------------------
# HTTP backends
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HttpProfile:
    """Request/response key names, so common inference servers can be
    targeted without code changes."""

    model_key: str = "model"
    prompt_key: str = "prompt"
    image_key: str = "image"
    label_key: str = "label"
    text_key: str = "text"
    text_out: str = "text"
    mask_out: str = "mask"
    vector_out: str = "embedding"

    @classmethod
    def from_dict(cls, data: dict) -> "HttpProfile":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise SchemaError("profile", f"unknown key(s): {', '.join(sorted(unknown))}")
        return cls(**data)


@dataclass
class HttpBackend:
    """Shared POST/retry/decode machinery for all four HTTP backend kinds."""

    kind: str
    endpoint: str
    model_id: str = ""
    timeout: float = DEFAULT_TEXT_TIMEOUT
    profile: HttpProfile = field(default_factory=HttpProfile)
    backoff: tuple[float, ...] = RETRY_BACKOFF

    def _context(self, elapsed: float) -> str:
        return f"{self.kind} backend at {self.endpoint} (model={self.model_id or '?'}, {elapsed:.2f}s elapsed)"

    def _post(self, payload: dict) -> dict:
        if self.model_id:
            payload = {self.profile.model_key: self.model_id, **payload}
        start = time.monotonic()
        failure = ""
        for attempt in range(len(self.backoff) + 1):
            if attempt:
                time.sleep(self.backoff[attempt - 1])
            try:
                response = httpx.post(self.endpoint, json=payload, timeout=self.timeout)
            except httpx.HTTPError as exc:
                failure = f"{type(exc).__name__}: {exc}"
                logger.debug("%s attempt %d failed: %s", self.kind, attempt + 1, failure)
                continue
            if response.status_code < 300:
                try:
                    return response.json()
                except ValueError:
                    raise BackendRejected(
                        f"{self._context(time.monotonic() - start)}: response is not JSON"
                    ) from None
            excerpt = response.text[:200]
            if response.status_code < 500:
                raise BackendRejected(
                    f"{self._context(time.monotonic() - start)}: status {response.status_code}: {excerpt}"
                )
            failure = f"status {response.status_code}: {excerpt}"
        raise BackendUnavailable(f"{self._context(time.monotonic() - start)}: {failure}")

    def _field(self, body: dict, key: str):
        if key not in body:
            raise BackendRejected(f"{self.kind} backend at {self.endpoint}: response missing {key!r}")
        return body[key]


class HttpVlm(HttpBackend):
    def describe(self, image: ImageFrame, prompt: str) -> str:
        body = self._post({
            self.profile.prompt_key: prompt,
            self.profile.image_key: base64.b64encode(image.to_png_bytes()).decode(),
        })
        return str(self._field(body, self.profile.text_out))


class HttpLlm(HttpBackend):
    def complete(self, prompt: str) -> str:
        body = self._post({self.profile.prompt_key: prompt})
        return str(self._field(body, self.profile.text_out))


class HttpSegmenter(HttpBackend):
    def segment(self, image: ImageFrame, label: str) -> Mask:
        body = self._post({
            self.profile.image_key: base64.b64encode(image.to_png_bytes()).decode(),
            self.profile.label_key: label,
        })
        encoded = self._field(body, self.profile.mask_out)
        try:
            return Mask.from_png_bytes(base64.b64decode(encoded))
        except Exception as exc:
            raise BackendRejected(
                f"segmenter backend at {self.endpoint}: mask is not a decodable grayscale PNG: {exc}"
            ) from None


class HttpEmbedder(HttpBackend):
    def embed(self, text: str) -> np.ndarray:
        body = self._post({self.profile.text_key: text})
        vector = self._field(body, self.profile.vector_out)
        try:
            return np.asarray([float(v) for v in vector], dtype=float)
        except (TypeError, ValueError):
            raise BackendRejected(
                f"embedder backend at {self.endpoint}: {self.profile.vector_out!r} is not a float list"
            ) from None


# ---------------------------------------------------------------------------
# Configuration and the gateway facade
# ---------------------------------------------------------------------------

BACKEND_KINDS = ("scripted", "http", "builtin-trigram")
_ROLE_TIMEOUTS = {
    "vlm": DEFAULT_TEXT_TIMEOUT,
    "llm": DEFAULT_TEXT_TIMEOUT,
    "segmenter": DEFAULT_VISION_TIMEOUT,
    "embedder": DEFAULT_VISION_TIMEOUT,
}


@dataclass(frozen=True)
class BackendConfig:
    kind: str
    endpoint: str | None = None
    model_id: str = ""
    timeout: float | None = None
    script: Path | None = None
    profile: HttpProfile = field(default_factory=HttpProfile)

    def __post_init__(self):
        if self.kind not in BACKEND_KINDS:
            raise ValueError(f"backend kind must be one of {BACKEND_KINDS}, got {self.kind!r}")
        if self.kind == "http" and not self.endpoint:
            raise ValueError("http backends require an endpoint")
        if self.kind == "scripted" and self.script is None:
            raise ValueError("scripted backends require a script directory")

    @classmethod
    def from_dict(cls, data: dict, path: str, base_dir: Path | None = None) -> "BackendConfig":
        obj = schema.expect_object(
            data, path, {"kind"}, {"endpoint", "model_id", "timeout", "script", "profile"}
        )
        kind = schema.expect_str(obj, "kind", path)
        if kind not in BACKEND_KINDS:
            raise SchemaError(f"{path}.kind", f"must be one of {BACKEND_KINDS}, got {kind!r}")
        script = None
        if "script" in obj:
            script = Path(schema.expect_str(obj, "script", path))
            if base_dir is not None and not script.is_absolute():
                script = base_dir / script
        profile = HttpProfile.from_dict(obj.get("profile", {}))
        try:
            return cls(
                kind=kind,
                endpoint=schema.expect_str(obj, "endpoint", path) if "endpoint" in obj else None,
                model_id=schema.expect_str(obj, "model_id", path) if "model_id" in obj else "",
                timeout=schema.expect_number(obj, "timeout", path) if "timeout" in obj else None,
                script=script,
                profile=profile,
            )
        except ValueError as exc:
            raise SchemaError(path, str(exc)) from None


_HTTP_CLASSES = {"vlm": HttpVlm, "llm": HttpLlm, "segmenter": HttpSegmenter, "embedder": HttpEmbedder}
_SCRIPTED_CLASSES = {
    "vlm": ScriptedVlm,
    "llm": ScriptedLlm,
    "segmenter": ScriptedSegmenter,
    "embedder": ScriptedEmbedder,
}


def build_backend(role: str, config: BackendConfig):
    if role not in _ROLE_TIMEOUTS:
        raise ValueError(f"unknown backend role {role!r}")
    if config.kind == "builtin-trigram":
        if role != "embedder":
            raise ValueError("builtin-trigram is only valid for the embedder role")
        return TrigramEmbedder()
    if config.kind == "scripted":
        return _SCRIPTED_CLASSES[role](config.script)
    return _HTTP_CLASSES[role](
        kind=role,
        endpoint=config.endpoint,
        model_id=config.model_id,
        timeout=config.timeout if config.timeout is not None else _ROLE_TIMEOUTS[role],
        profile=config.profile,
    )


@dataclass
class ModelGateway:
    """Bundles the four backends and enforces their contracts in one place."""

    vlm: VlmBackend
    segmenter: SegmenterBackend
    llm: LlmBackend
    embedder: Embedder

    def vlm_describe(self, image: ImageFrame, prompt: str) -> str:
        if not prompt.strip():
            raise ValueError("vlm prompt must be non-empty")
        return self.vlm.describe(image, prompt)

    def segment_label(self, image: ImageFrame, label: str) -> Mask:
        if not label.strip():
            raise ValueError("segmentation label must be non-empty")
        mask = self.segmenter.segment(image, label)
        if mask.width != image.width or mask.height != image.height:
            raise ShapeMismatch(
                f"segmenter returned a {mask.width}x{mask.height} mask "
                f"for a {image.width}x{image.height} image (label {label!r})"
            )
        return mask

    def complete(self, prompt: str) -> str:
        if not prompt.strip():
            raise ValueError("llm prompt must be non-empty")
        return self.llm.complete(prompt)

    def embed(self, text: str) -> np.ndarray:
        if not text.strip():
            raise ValueError("embed text must be non-empty after trimming")
        vector = np.asarray(self.embedder.embed(text), dtype=float)
        norm = float(np.linalg.norm(vector))
        if norm == 0.0 or not np.isfinite(norm):
            raise BackendRejected("embedder returned a vector that cannot be normalized")
        return vector / norm


def gateway_from_configs(configs: dict[str, BackendConfig]) -> ModelGateway:
    return ModelGateway(
        vlm=build_backend("vlm", configs["vlm"]),
        segmenter=build_backend("segmenter", configs["segmenter"]),
        llm=build_backend("llm", configs["llm"]),
        embedder=build_backend("embedder", configs["embedder"]),
    )
