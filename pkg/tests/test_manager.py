from __future__ import annotations

import math

import pytest

from tests.conftest import scene_object
from vlpilot.errors import ArityMismatch, ControllerError, ControllerUnreachable, NoMatch
from vlpilot.geometry import Pose6D
from vlpilot.manager import MatchThresholds, dispatch, expand, resolve
from vlpilot.planning import ActionCall
from vlpilot.simserver import ControllerServer
from vlpilot.simworld import ContainerRegion, SimObject, WorldState
from vlpilot.tasklib import MotionSettings

HOME = Pose6D(0.5, 0.0, 0.8, math.pi, 0.0, 0.0)


@pytest.fixture
def scene():
    return [scene_object("Trash can", 0.23, 0.1, 0.0), scene_object("Bottle", 0.7, -0.07, 0.0)]


class TestResolve:
    def test_fuzzy_param_binding(self, ur10, scene):
        calls = [ActionCall("pick_and_place", ("bottle", "trash_can"), 1)]
        (resolved,) = resolve(calls, ur10, scene)
        assert resolved.task.name == "pick and place"
        assert [obj.label for obj in resolved.bound_params] == ["Bottle", "Trash can"]
        assert [m.score for m in resolved.match_scores] == [1.0, 1.0, 1.0]

    def test_action_name_case_variant(self, ur10, scene):
        calls = [ActionCall("Pick and Place", ("bottle", "trash can"), 1)]
        (resolved,) = resolve(calls, ur10, scene)
        assert resolved.task.name == "pick and place"
        assert resolved.match_scores[0].score == 1.0

    def test_arity_mismatch(self, ur10, scene):
        calls = [ActionCall("pick_and_place", ("bottle",), 1)]
        with pytest.raises(ArityMismatch) as excinfo:
            resolve(calls, ur10, scene)
        assert excinfo.value.expected == 2
        assert excinfo.value.got == 1

    def test_unknown_action_rejected(self, ur10, scene):
        calls = [ActionCall("levitate", ("bottle",), 1)]
        with pytest.raises(NoMatch) as excinfo:
            resolve(calls, ur10, scene)
        assert excinfo.value.query == "levitate"

    def test_unknown_param_rejected(self, ur10, scene):
        calls = [ActionCall("pick_and_place", ("bottle", "zzzz"), 1)]
        with pytest.raises(NoMatch):
            resolve(calls, ur10, scene)

    def test_all_or_nothing(self, ur10, scene):
        calls = [
            ActionCall("pick_and_place", ("bottle", "trash can"), 1),
            ActionCall("levitate", ("bottle",), 2),
        ]
        with pytest.raises(NoMatch):
            resolve(calls, ur10, scene)

    def test_action_names_never_match_scene_labels(self, ur10, scene):
        # an action name identical to a scene label must still fail on the task set
        calls = [ActionCall("Bottle", (), 1)]
        with pytest.raises(NoMatch):
            resolve(calls, ur10, scene, MatchThresholds(action=0.9, param=0.35))

    def test_deterministic(self, ur10, scene):
        calls = [ActionCall("pick_and_place", ("bottle", "trash can"), 1)]
        assert resolve(calls, ur10, scene) == resolve(calls, ur10, scene)

    def test_empty_plan_resolves_empty(self, ur10, scene):
        assert resolve([], ur10, scene) == []


class TestExpand:
    def test_single_pick_and_place(self, ur10, scene):
        calls = [ActionCall("pick_and_place", ("bottle", "trash can"), 1)]
        batches = expand(resolve(calls, ur10, scene), ur10)
        assert len(batches) == 1
        assert len(batches[0].commands) == 8
        assert batches[0].task_name == "pick and place"
        assert batches[0].params == ("Bottle", "Trash can")

    def test_context_threads_between_batches(self, ur10, scene):
        calls = [
            ActionCall("pick_and_place", ("bottle", "trash can"), 1),
            ActionCall("close the gripper", (), 2),
        ]
        batches = expand(resolve(calls, ur10, scene), ur10, MotionSettings())
        assert batches[1].commands[0].pose == batches[0].final_pose

    def test_every_context_starts_at_previous_final_pose(self, ur10, scene, monkeypatch):
        import vlpilot.manager as manager_module
        from vlpilot.tasklib import TaskContext

        contexts: list[TaskContext] = []

        def recording_context(*args, **kwargs):
            ctx = TaskContext(*args, **kwargs)
            contexts.append(ctx)
            return ctx

        monkeypatch.setattr(manager_module, "TaskContext", recording_context)
        calls = [
            ActionCall("pick_and_place", ("can", "trash can"), 1),
            ActionCall("pick_and_place", ("bottle", "trash can"), 2),
            ActionCall("open the gripper", (), 3),
        ]
        extended = scene + [scene_object("Can", 0.1, 0.3, 0.0)]
        batches = expand(resolve(calls, ur10, extended), ur10)
        assert contexts[0].start_pose == ur10.initial_pose
        for previous, ctx in zip(batches, contexts[1:]):
            assert ctx.start_pose == previous.final_pose
            assert ctx.gripper_state == previous.final_gripper

    def test_first_batch_starts_at_home(self, ur10, scene):
        calls = [ActionCall("open the gripper", (), 1)]
        batches = expand(resolve(calls, ur10, scene), ur10)
        assert batches[0].commands[0].pose == ur10.initial_pose

    def test_empty_plan_is_vacuous(self, ur10):
        assert expand([], ur10) == []

    def test_motion_settings_respected(self, ur10, scene):
        calls = [ActionCall("move to", ("bottle",), 1)]
        batches = expand(resolve(calls, ur10, scene), ur10, MotionSettings(hover_height=0.5))
        assert batches[0].commands[0].pose.z == pytest.approx(0.5)


class TestDispatch:
    def test_golden_dispatch(self, ur10, scene):
        world = WorldState(
            effector_pose=HOME,
            gripper=0.0,
            objects=[SimObject("bottle", Pose6D(0.7, -0.07, 0.0))],
            containers=[ContainerRegion("trash can", Pose6D(0.23, 0.1, 0.0), 0.08)],
            initial_pose=HOME,
        )
        server = ControllerServer(world)
        host, port = server.start()
        try:
            calls = [ActionCall("pick_and_place", ("bottle", "trash can"), 1)]
            batches = expand(resolve(calls, ur10, scene), ur10)
            outcome = dispatch(batches, (host, port), ur10.name)
            assert outcome.ok
            assert outcome.final_pose == HOME == ur10.initial_pose
            assert outcome.progress_events == 9
        finally:
            server.stop()

    def test_unreachable_endpoint(self, ur10, scene):
        calls = [ActionCall("open the gripper", (), 1)]
        batches = expand(resolve(calls, ur10, scene), ur10)
        with pytest.raises(ControllerUnreachable):
            dispatch(batches, ("127.0.0.1", 1), ur10.name)

    def test_busy_server_surfaces_controller_error(self, ur10, scene):
        world = WorldState(HOME, 0.0, [], [], HOME)
        server = ControllerServer(world)
        host, port = server.start()
        from vlpilot.wire import ControllerClient

        holder = ControllerClient(host, port, timeout=5.0)
        holder.connect("UR10")
        try:
            calls = [ActionCall("open the gripper", (), 1)]
            batches = expand(resolve(calls, ur10, scene), ur10)
            with pytest.raises(ControllerError) as excinfo:
                dispatch(batches, (host, port), ur10.name)
            assert excinfo.value.code == "busy"
        finally:
            holder.close()
            server.stop()
