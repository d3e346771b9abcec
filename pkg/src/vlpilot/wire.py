"""Controller wire protocol: newline-delimited JSON over TCP.

Message field names are a bit-exact contract shared by the action manager
(client side) and the controller simulator (server side):

  client -> server   {"type":"hello","robot":name}
                     {"type":"execute","request_id":id,"batches":[...]}
  server -> client   {"type":"welcome","initial_pose":pose}
                     {"type":"ack","request_id":id}
                     {"type":"progress","request_id":id,"batch":i,"command":j}
                     {"type":"done","request_id":id,"ok":bool,"final_pose":pose}
                     {"type":"error","code":code,"detail":text}
"""
from __future__ import annotations

import json
import socket
import uuid
from typing import Callable, Sequence

from .errors import ControllerError, ControllerTimeout, ControllerUnreachable
from .geometry import Pose6D
from .tasklib import Command, CommandBatch

ProgressFn = Callable[[int, int], None]


def pose_to_wire(pose: Pose6D) -> dict:
    return pose.to_dict()


def pose_from_wire(data: dict) -> Pose6D:
    return Pose6D.from_dict(data)


def command_to_wire(cmd: Command) -> dict:
    return {"pose": pose_to_wire(cmd.pose), "gripper": cmd.gripper}


def command_from_wire(data: dict) -> Command:
    return Command(pose_from_wire(data["pose"]), float(data["gripper"]))


def batch_to_wire(batch: CommandBatch) -> dict:
    return {
        "task_name": batch.task_name,
        "params": list(batch.params),
        "commands": [command_to_wire(cmd) for cmd in batch.commands],
    }


def batch_from_wire(data: dict) -> CommandBatch:
    return CommandBatch(
        commands=tuple(command_from_wire(cmd) for cmd in data["commands"]),
        task_name=str(data["task_name"]),
        params=tuple(str(p) for p in data["params"]),
    )


def send_message(sock: socket.socket, message: dict) -> None:
    sock.sendall(json.dumps(message).encode("utf-8") + b"\n")


class MessageReader:
    """Reads one JSON message per line from a socket."""

    def __init__(self, sock: socket.socket):
        self._file = sock.makefile("r", encoding="utf-8", newline="\n")

    def read(self) -> dict | None:
        """Next message, or None on a cleanly closed connection."""
        line = self._file.readline()
        if not line:
            return None
        return json.loads(line)

    def close(self) -> None:
        self._file.close()


class ControllerClient:
    """Client side of the controller protocol."""

    def __init__(self, host: str, port: int, timeout: float = 30.0):
        self.host = host
        self.port = port
        self.timeout = timeout
        self._sock: socket.socket | None = None
        self._reader: MessageReader | None = None

    def connect(self, robot_name: str) -> Pose6D:
        """Open the session with a hello; returns the controller's initial pose."""
        try:
            self._sock = socket.create_connection((self.host, self.port), timeout=self.timeout)
        except (ConnectionRefusedError, socket.timeout, OSError) as exc:
            raise ControllerUnreachable(f"cannot reach controller at {self.host}:{self.port}: {exc}") from None
        self._reader = MessageReader(self._sock)
        send_message(self._sock, {"type": "hello", "robot": robot_name})
        message = self._read()
        if message.get("type") != "welcome":
            raise ControllerError("bad-welcome", f"expected welcome, got {message!r}")
        return pose_from_wire(message["initial_pose"])

    def _read(self) -> dict:
        assert self._reader is not None
        try:
            message = self._reader.read()
        except socket.timeout:
            raise ControllerTimeout(f"controller at {self.host}:{self.port} did not answer in time") from None
        except json.JSONDecodeError as exc:
            raise ControllerError("bad-message", f"controller sent invalid JSON: {exc}") from None
        if message is None:
            raise ControllerError("closed", "controller closed the connection")
        if message.get("type") == "error":
            raise ControllerError(str(message.get("code", "unknown")), str(message.get("detail", "")))
        return message

    def execute(
        self,
        batches: Sequence[CommandBatch],
        request_id: str | None = None,
        on_progress: ProgressFn | None = None,
    ) -> dict:
        """Send one execute request; stream progress; return the done message."""
        assert self._sock is not None, "connect() first"
        request_id = request_id or uuid.uuid4().hex
        send_message(
            self._sock,
            {
                "type": "execute",
                "request_id": request_id,
                "batches": [batch_to_wire(batch) for batch in batches],
            },
        )
        message = self._read()
        if message.get("type") != "ack" or message.get("request_id") != request_id:
            raise ControllerError("bad-ack", f"expected ack for {request_id}, got {message!r}")
        while True:
            message = self._read()
            kind = message.get("type")
            if kind == "progress":
                if on_progress is not None:
                    on_progress(int(message["batch"]), int(message["command"]))
            elif kind == "done":
                return message
            else:
                raise ControllerError("bad-message", f"unexpected message {message!r}")

    def close(self) -> None:
        if self._reader is not None:
            self._reader.close()
            self._reader = None
        if self._sock is not None:
            self._sock.close()
            self._sock = None

    def __enter__(self) -> "ControllerClient":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
