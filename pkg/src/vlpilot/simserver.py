"""TCP server exposing the simulated controller over the wire protocol.

One client at a time; a second connection is refused with error{busy}.
World state persists across requests for the server's lifetime, and every
completed request ends with the controller-owned return to the initial
pose.
"""
from __future__ import annotations

import json
import logging
import socket
import threading
from dataclasses import dataclass

from .geometry import Pose6D
from .simworld import WorldState, execute_request
from .wire import MessageReader, batch_from_wire, pose_to_wire, send_message

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConnectionEntry:
    peer: str
    disposition: str  # "served" | "busy"


class ControllerServer:
    """Accepts controller-protocol clients and executes their batches."""

    def __init__(self, world: WorldState, host: str = "127.0.0.1", port: int = 0):
        self.world = world
        self.host = host
        self.port = port
        self.connection_log: list[ConnectionEntry] = []
        self._listener: socket.socket | None = None
        self._accept_thread: threading.Thread | None = None
        self._active_lock = threading.Lock()
        self._active = False
        self._stopping = threading.Event()

    @property
    def address(self) -> tuple[str, int]:
        assert self._listener is not None, "server not started"
        return self._listener.getsockname()[:2]

    def start(self) -> tuple[str, int]:
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind((self.host, self.port))
        listener.listen(5)
        self._listener = listener
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._accept_thread.start()
        logger.info("controller simulator listening on %s:%d", *self.address)
        return self.address

    def stop(self) -> None:
        self._stopping.set()
        if self._listener is not None:
            try:
                # close() alone does not wake a thread blocked in accept()
                self._listener.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            self._listener.close()
        if self._accept_thread is not None:
            self._accept_thread.join(timeout=2.0)

    def serve_forever(self) -> None:
        self.start()
        try:
            self._stopping.wait()
        except KeyboardInterrupt:
            pass
        finally:
            self.stop()

    def _accept_loop(self) -> None:
        assert self._listener is not None
        while not self._stopping.is_set():
            try:
                conn, peer = self._listener.accept()
            except OSError:
                return
            with self._active_lock:
                if self._active:
                    self.connection_log.append(ConnectionEntry(f"{peer[0]}:{peer[1]}", "busy"))
                    try:
                        send_message(conn, {"type": "error", "code": "busy", "detail": "another client is connected"})
                    except OSError:
                        pass
                    conn.close()
                    continue
                self._active = True
            self.connection_log.append(ConnectionEntry(f"{peer[0]}:{peer[1]}", "served"))
            threading.Thread(target=self._handle, args=(conn,), daemon=True).start()

    def _fail(self, conn: socket.socket, code: str, detail: str) -> None:
        try:
            send_message(conn, {"type": "error", "code": code, "detail": detail})
        except OSError:
            pass

    def _handle(self, conn: socket.socket) -> None:
        reader = MessageReader(conn)
        try:
            self._session(conn, reader)
        except (OSError, ValueError):
            pass
        finally:
            reader.close()
            conn.close()
            with self._active_lock:
                self._active = False

    def _session(self, conn: socket.socket, reader: MessageReader) -> None:
        try:
            hello = reader.read()
        except json.JSONDecodeError:
            self._fail(conn, "bad-message", "first message is not valid JSON")
            return
        if hello is None:
            return
        if not isinstance(hello, dict) or hello.get("type") != "hello" or "robot" not in hello:
            self._fail(conn, "bad-message", "expected {\"type\":\"hello\",\"robot\":...} first")
            return
        send_message(conn, {"type": "welcome", "initial_pose": pose_to_wire(self.world.initial_pose)})

        while True:
            try:
                message = reader.read()
            except json.JSONDecodeError:
                self._fail(conn, "bad-message", "message is not valid JSON")
                return
            if message is None:
                return
            if not isinstance(message, dict) or message.get("type") != "execute":
                self._fail(conn, "bad-message", "expected an execute message")
                return
            if not isinstance(message.get("request_id"), str) or not isinstance(message.get("batches"), list):
                self._fail(conn, "bad-message", "execute needs request_id and batches")
                return
            request_id = message["request_id"]
            try:
                batches = [batch_from_wire(raw) for raw in message["batches"]]
            except (KeyError, TypeError, ValueError) as exc:
                self._fail(conn, "bad-message", f"malformed batch: {exc}")
                return
            send_message(conn, {"type": "ack", "request_id": request_id})

            def progress(batch_index: int, command_index: int) -> None:
                send_message(
                    conn,
                    {
                        "type": "progress",
                        "request_id": request_id,
                        "batch": batch_index,
                        "command": command_index,
                    },
                )

            self.world, report = execute_request(self.world, batches, progress)
            send_message(
                conn,
                {
                    "type": "done",
                    "request_id": request_id,
                    "ok": report.ok,
                    "final_pose": pose_to_wire(report.final_pose),
                },
            )


def serve(endpoint: tuple[str, int], world: WorldState) -> None:
    """Blocking convenience wrapper: run a controller simulator at `endpoint`."""
    server = ControllerServer(world, endpoint[0], endpoint[1])
    server.serve_forever()
