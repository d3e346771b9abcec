"""HTTP service for the operator console.

Single-robot semantics: one pipeline run in flight at a time, run history
kept in memory for the session, and a one-way event stream carrying status
changes plus controller progress.
"""
from __future__ import annotations

import base64
import binascii
import json
import logging
import queue
import socket
import threading
from pathlib import Path

import uvicorn
from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .config import AppConfig
from .errors import BindError
from .imaging import ImageFrame
from .pipeline import Pipeline, RunRecord
from .simserver import ControllerServer
from .simworld import load_world

logger = logging.getLogger(__name__)

EVENT_KEEPALIVE_SECONDS = 10.0


class RunRequest(BaseModel):
    image: str  # base64 PNG
    instruction: str


class RunnerState:
    """Owns run records, the single worker, approvals, and event fan-out."""

    def __init__(self, pipeline: Pipeline):
        self.pipeline = pipeline
        self._lock = threading.Lock()
        self._records: dict[str, RunRecord] = {}
        self._order: list[str] = []
        self._decision_events: dict[str, threading.Event] = {}
        self._decisions: dict[str, bool] = {}
        self._subscribers: list[queue.SimpleQueue] = []
        self._last_image: tuple[str, int, int] | None = None  # (b64, width, height)

    # -- runs ---------------------------------------------------------------

    def submit(self, image: ImageFrame, image_b64: str, instruction: str) -> RunRecord | None:
        """Start a run; None means one is already in flight."""
        with self._lock:
            for record in self._records.values():
                if not record.finished:
                    return None
            record = RunRecord.new(instruction)
            self._records[record.run_id] = record
            self._order.append(record.run_id)
            self._decision_events[record.run_id] = threading.Event()
            self._last_image = (image_b64, image.width, image.height)
        thread = threading.Thread(
            target=self._execute, args=(record, image), name=f"run-{record.run_id[:8]}", daemon=True
        )
        thread.start()
        return record

    def _execute(self, record: RunRecord, image: ImageFrame) -> None:
        try:
            self.pipeline.run(
                image,
                record.instruction,
                approval=self._await_decision,
                on_event=self.publish,
                record=record,
            )
        except Exception:
            logger.exception("run %s crashed", record.run_id)
            record.error = record.error or "internal error"
            record.status = "failed"
            self.publish({"run_id": record.run_id, "status": "failed", "batch": None, "command": None})

    def get(self, run_id: str) -> RunRecord | None:
        return self._records.get(run_id)

    def summaries(self) -> list[dict]:
        return [
            {
                "run_id": record.run_id,
                "instruction": record.instruction,
                "status": record.status,
                "timestamps": dict(record.timestamps),
            }
            for record in (self._records[run_id] for run_id in self._order)
        ]

    # -- approval gate --------------------------------------------------------

    def _await_decision(self, record: RunRecord) -> bool:
        self._decision_events[record.run_id].wait()
        return self._decisions[record.run_id]

    def decide(self, run_id: str, approved: bool) -> str:
        """Returns 'ok', 'not-found', or 'conflict'."""
        with self._lock:
            record = self._records.get(run_id)
            if record is None:
                return "not-found"
            if record.status != "awaiting-approval" or run_id in self._decisions:
                return "conflict"
            self._decisions[run_id] = approved
            self._decision_events[run_id].set()
            return "ok"

    # -- events ---------------------------------------------------------------

    def publish(self, event: dict) -> None:
        for subscriber in list(self._subscribers):
            subscriber.put(event)

    def subscribe(self) -> queue.SimpleQueue:
        subscriber: queue.SimpleQueue = queue.SimpleQueue()
        self._subscribers.append(subscriber)
        return subscriber

    def unsubscribe(self, subscriber: queue.SimpleQueue) -> None:
        if subscriber in self._subscribers:
            self._subscribers.remove(subscriber)

    def current(self) -> RunRecord | None:
        for run_id in reversed(self._order):
            return self._records[run_id]
        return None

    # -- scene ------------------------------------------------------------------

    def latest_scene(self) -> dict:
        for run_id in reversed(self._order):
            record = self._records[run_id]
            if record.report.scene:
                image_b64, width, height = self._last_image or (None, None, None)
                return {
                    "run_id": record.run_id,
                    "image": image_b64,
                    "width": width,
                    "height": height,
                    "objects": [obj.to_dict() for obj in record.report.scene],
                }
        return {"run_id": None, "image": None, "width": None, "height": None, "objects": []}


def create_app(config: AppConfig, pipeline: Pipeline | None = None, console_dir: Path | None = None) -> FastAPI:
    app = FastAPI(title="vlpilot")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    state = RunnerState(pipeline or Pipeline(config))
    app.state.runner = state

    @app.post("/runs", status_code=202)
    def submit_run(request: RunRequest):
        if not request.instruction.strip():
            return JSONResponse(status_code=400, content={"detail": "instruction must not be empty"})
        try:
            image = ImageFrame.from_png_bytes(base64.b64decode(request.image, validate=True))
        except (binascii.Error, ValueError, OSError) as exc:
            return JSONResponse(status_code=400, content={"detail": f"image is not a base64 PNG: {exc}"})
        record = state.submit(image, request.image, request.instruction)
        if record is None:
            return JSONResponse(status_code=409, content={"detail": "a run is already in flight"})
        return {"run_id": record.run_id}

    @app.get("/runs")
    def list_runs():
        return {"runs": state.summaries()}

    @app.get("/runs/{run_id}")
    def get_run(run_id: str):
        record = state.get(run_id)
        if record is None:
            return JSONResponse(status_code=404, content={"detail": "unknown run"})
        return record.to_dict()

    def _decide(run_id: str, approved: bool):
        result = state.decide(run_id, approved)
        if result == "not-found":
            return JSONResponse(status_code=404, content={"detail": "unknown run"})
        if result == "conflict":
            return JSONResponse(status_code=409, content={"detail": "run is not awaiting approval"})
        return {"run_id": run_id, "decision": "approved" if approved else "rejected"}

    @app.post("/runs/{run_id}/approve")
    def approve_run(run_id: str):
        return _decide(run_id, True)

    @app.post("/runs/{run_id}/reject")
    def reject_run(run_id: str):
        return _decide(run_id, False)

    @app.get("/scene")
    def get_scene():
        return state.latest_scene()

    @app.get("/events")
    def events():
        def stream():
            subscriber = state.subscribe()
            try:
                current = state.current()
                if current is not None:
                    snapshot = {
                        "run_id": current.run_id,
                        "status": current.status,
                        "batch": None,
                        "command": None,
                    }
                    yield f"data: {json.dumps(snapshot)}\n\n"
                while True:
                    try:
                        event = subscriber.get(timeout=EVENT_KEEPALIVE_SECONDS)
                    except queue.Empty:
                        yield ": keepalive\n\n"
                        continue
                    yield f"data: {json.dumps(event)}\n\n"
            finally:
                state.unsubscribe(subscriber)

        return StreamingResponse(stream(), media_type="text/event-stream")

    if console_dir is not None:
        app.mount("/", StaticFiles(directory=console_dir, html=True), name="console")

    return app


def _check_bindable(host: str, port: int) -> None:
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        probe.bind((host, port))
    except OSError as exc:
        raise BindError(f"cannot bind {host}:{port}: {exc}") from None
    finally:
        probe.close()


def serve_api(
    config: AppConfig,
    host: str | None = None,
    port: int | None = None,
    console_dir: Path | None = None,
    with_sim: bool = False,
) -> None:
    """Run the service (blocking). `with_sim` embeds a controller simulator."""
    host = host or config.service.host
    port = port if port is not None else config.service.port
    _check_bindable(host, port)
    sim: ControllerServer | None = None
    if with_sim:
        if config.controller.world is None:
            raise BindError("--with-sim needs controller.world in the config")
        sim = ControllerServer(
            load_world(config.controller.world), config.controller.host, config.controller.port
        )
        sim.start()
    try:
        uvicorn.run(create_app(config, console_dir=console_dir), host=host, port=port, log_level="warning")
    finally:
        if sim is not None:
            sim.stop()
