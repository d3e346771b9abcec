from __future__ import annotations

import json
import math
import socket
import time

import pytest

from tests.conftest import scene_object
from vlpilot.errors import ControllerError, ControllerUnreachable
from vlpilot.geometry import Pose6D
from vlpilot.simserver import ControllerServer
from vlpilot.simworld import ContainerRegion, SimObject, WorldState
from vlpilot.tasklib import TaskContext, program_pick_and_place
from vlpilot.wire import ControllerClient, batch_to_wire, pose_from_wire

HOME = Pose6D(0.5, 0.0, 0.8, math.pi, 0.0, 0.0)


def tabletop() -> WorldState:
    return WorldState(
        effector_pose=HOME,
        gripper=0.0,
        objects=[SimObject("bottle", Pose6D(0.4, 0.1, 0.0))],
        containers=[ContainerRegion("trash can", Pose6D(0.6, -0.2, 0.0), 0.08)],
        initial_pose=HOME,
    )


def golden_batch():
    ctx = TaskContext(start_pose=HOME, initial_pose=HOME)
    return program_pick_and_place(
        ctx, scene_object("bottle", 0.4, 0.1, 0.0), scene_object("trash can", 0.6, -0.2, 0.0)
    )


@pytest.fixture
def server():
    srv = ControllerServer(tabletop())
    srv.start()
    yield srv
    srv.stop()


def raw_lines(sock: socket.socket):
    return sock.makefile("r", encoding="utf-8", newline="\n")


def connect_when_free(host: str, port: int, timeout: float = 2.0) -> ControllerClient:
    """Reconnect helper: the server frees its client slot a moment after EOF."""
    deadline = time.time() + timeout
    while True:
        client = ControllerClient(host, port, timeout=5.0)
        try:
            client.connect("UR10")
            return client
        except ControllerError as exc:
            client.close()
            if exc.code != "busy" or time.time() >= deadline:
                raise
            time.sleep(0.02)


class TestProtocol:
    def test_full_exchange(self, server):
        host, port = server.address
        progress: list[tuple[int, int]] = []
        with ControllerClient(host, port, timeout=5.0) as client:
            welcome_pose = client.connect("UR10")
            assert welcome_pose == HOME
            done = client.execute([golden_batch()], "req-1", lambda b, c: progress.append((b, c)))
        assert done["ok"] is True
        assert done["request_id"] == "req-1"
        assert pose_from_wire(done["final_pose"]) == HOME
        assert len(progress) == 9  # 8 commands + the return move
        assert progress == [(0, i) for i in range(8)] + [(1, 0)]

    def test_world_persists_across_requests(self, server):
        host, port = server.address
        with ControllerClient(host, port, timeout=5.0) as client:
            client.connect("UR10")
            client.execute([golden_batch()], "req-1")
        # the bottle moved into the trash can and stays there for the session
        from vlpilot.simworld import containment_check

        assert containment_check(server.world, "bottle", "trash can")
        with connect_when_free(host, port) as client:
            done = client.execute([golden_batch()], "req-2")
        assert done["ok"] is True

    def test_busy_rejection_for_second_client(self, server):
        host, port = server.address
        first = ControllerClient(host, port, timeout=5.0)
        first.connect("UR10")
        try:
            second = ControllerClient(host, port, timeout=5.0)
            with pytest.raises(ControllerError) as excinfo:
                second.connect("UR10")
            assert excinfo.value.code == "busy"
        finally:
            first.close()

    def test_slot_frees_after_disconnect(self, server):
        host, port = server.address
        with ControllerClient(host, port, timeout=5.0) as client:
            client.connect("UR10")
        connect_when_free(host, port).close()

    def test_malformed_json_answered_with_error_and_close(self, server):
        host, port = server.address
        sock = socket.create_connection((host, port), timeout=5.0)
        reader = raw_lines(sock)
        sock.sendall(b"this is not json\n")
        message = json.loads(reader.readline())
        assert message["type"] == "error"
        assert message["code"] == "bad-message"
        assert reader.readline() == ""  # connection closed
        sock.close()

    def test_wrong_first_message_rejected(self, server):
        host, port = server.address
        sock = socket.create_connection((host, port), timeout=5.0)
        reader = raw_lines(sock)
        sock.sendall(json.dumps({"type": "execute", "request_id": "x", "batches": []}).encode() + b"\n")
        message = json.loads(reader.readline())
        assert message["type"] == "error"
        assert message["code"] == "bad-message"
        sock.close()

    def test_execute_with_malformed_batch_rejected(self, server):
        host, port = server.address
        sock = socket.create_connection((host, port), timeout=5.0)
        reader = raw_lines(sock)
        sock.sendall(json.dumps({"type": "hello", "robot": "UR10"}).encode() + b"\n")
        assert json.loads(reader.readline())["type"] == "welcome"
        sock.sendall(
            json.dumps({"type": "execute", "request_id": "x", "batches": [{"task_name": "t"}]}).encode()
            + b"\n"
        )
        message = json.loads(reader.readline())
        assert message["type"] == "error"
        assert message["code"] == "bad-message"
        sock.close()

    def test_connection_log_records_clients(self, server):
        host, port = server.address
        assert server.connection_log == []
        with ControllerClient(host, port, timeout=5.0) as client:
            client.connect("UR10")
        assert [entry.disposition for entry in server.connection_log] == ["served"]

    def test_unreachable_controller(self):
        client = ControllerClient("127.0.0.1", 1)  # reserved port, nothing listens
        with pytest.raises(ControllerUnreachable):
            client.connect("UR10")

    def test_wire_batch_field_names_are_exact(self):
        wire = batch_to_wire(golden_batch())
        assert set(wire) == {"task_name", "params", "commands"}
        assert set(wire["commands"][0]) == {"pose", "gripper"}
        assert set(wire["commands"][0]["pose"]) == {"x", "y", "z", "roll", "pitch", "yaw"}
