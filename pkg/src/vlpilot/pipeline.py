"""Pipeline orchestration: perceive -> prompt -> complete -> parse ->
resolve -> expand -> (approve) -> dispatch, producing an auditable run
record at every exit, successful or not.
"""
from __future__ import annotations

import logging
import time
import uuid
from dataclasses import dataclass, field
from typing import Callable

from .config import AppConfig
from .errors import PilotError
from .gateway import ModelGateway, gateway_from_configs
from .imaging import ImageFrame
from .manager import ExecutionReport, dispatch, expand, resolve
from .perception import SceneObject, perceive
from .planning import build_prompt, choose_template, load_prompt_templates, parse_plan, render_plan
from .robot import RobotInfo, describe_for_prompt, load_robot_info_file
from .wire import batch_to_wire

logger = logging.getLogger(__name__)

STATUS_ORDER = ("perceiving", "planning", "awaiting-approval", "executing", "done", "failed", "rejected")
TERMINAL_STATUSES = ("done", "failed", "rejected")

# approval(record) -> True to dispatch, False to reject.
ApprovalFn = Callable[["RunRecord"], bool]
EventFn = Callable[[dict], None]


@dataclass
class RunRecord:
    """Everything one pipeline run computed, however far it got."""

    run_id: str
    instruction: str
    status: str = "perceiving"
    timestamps: dict[str, float] = field(default_factory=dict)
    report: ExecutionReport = None  # type: ignore[assignment]
    error: str | None = None

    @classmethod
    def new(cls, instruction: str) -> "RunRecord":
        return cls(run_id=uuid.uuid4().hex, instruction=instruction, report=ExecutionReport(instruction))

    @property
    def finished(self) -> bool:
        return self.status in TERMINAL_STATUSES

    def to_dict(self, canonical: bool = False) -> dict:
        """JSON form with stable key ordering.

        `canonical=True` drops run_id and timestamps so reports from
        identical inputs compare byte-equal.
        """
        data = {
            "instruction": self.instruction,
            "status": self.status,
            "error": self.error,
            "scene": [obj.to_dict() for obj in self.report.scene],
            "plan": [
                {
                    "raw_action": call.raw_action,
                    "raw_params": list(call.raw_params),
                    "source_line": call.source_line,
                }
                for call in self.report.plan
            ],
            "plan_text": render_plan(self.report.plan),
            "resolved": [
                {
                    "task": action.task.name,
                    "program_id": action.task.program_id,
                    "params": [obj.label for obj in action.bound_params],
                    "matches": [
                        {
                            "query": m.query,
                            "candidate": m.candidate,
                            "candidate_index": m.candidate_index,
                            "score": m.score,
                        }
                        for m in action.match_scores
                    ],
                }
                for action in self.report.resolved
            ],
            "batches": [batch_to_wire(batch) for batch in self.report.batches],
            "controller_outcome": (
                self.report.controller_outcome.to_dict() if self.report.controller_outcome else None
            ),
            "warnings": list(self.report.warnings),
        }
        if not canonical:
            data = {"run_id": self.run_id, **data, "timestamps": dict(self.timestamps)}
        return data


class Pipeline:
    """A loaded, ready-to-run pipeline; safe to reuse across runs."""

    def __init__(self, config: AppConfig):
        self.config = config
        self.robot: RobotInfo = load_robot_info_file(config.robot_info)
        self.gateway: ModelGateway = gateway_from_configs(config.backends)
        templates = load_prompt_templates(config.prompt_templates)
        self.template = choose_template(templates, config.backends["llm"].model_id)
        self.robot_text = describe_for_prompt(self.robot)

    def perceive(self, image: ImageFrame, on_warning=None) -> list[SceneObject]:
        """Scene understanding only; the image is taken from the home pose."""
        return perceive(
            image,
            self.config.perception,
            self.gateway,
            capture_pose=self.robot.initial_pose,
            camera_mount=self.robot.camera_mount,
            on_warning=on_warning,
        )

    def run(
        self,
        image: ImageFrame,
        instruction: str,
        approval: ApprovalFn | None = None,
        on_event: EventFn | None = None,
        record: RunRecord | None = None,
    ) -> RunRecord:
        """Execute the full pipeline; never raises for stage failures.

        Any stage error produces a failed RunRecord carrying everything
        computed so far. With require_approval set, `approval` is consulted
        between resolution and dispatch; without an approval channel the
        plan is rejected rather than silently executed. A pre-created
        `record` lets callers hand out the run_id before the run starts.
        """
        if record is None:
            record = RunRecord.new(instruction)
        report = record.report

        def set_status(status: str) -> None:
            record.status = status
            record.timestamps[status] = time.time()
            if on_event is not None:
                on_event({"run_id": record.run_id, "status": status, "batch": None, "command": None})

        stage = "perceiving"
        try:
            set_status("perceiving")
            report.scene = self.perceive(image, on_warning=report.warnings.append)

            stage = "planning"
            set_status("planning")
            prompt = build_prompt(self.template, [o.label for o in report.scene], self.robot_text, instruction)
            completion = self.gateway.complete(prompt)
            report.plan = parse_plan(completion)
            report.resolved = resolve(
                report.plan, self.robot, report.scene, self.config.thresholds, self.gateway
            )
            report.batches = expand(report.resolved, self.robot, self.config.motion)

            if report.batches and self.config.require_approval:
                set_status("awaiting-approval")
                if approval is None:
                    report.warnings.append("approval required but no approval channel; plan rejected")
                    set_status("rejected")
                    return record
                if not approval(record):
                    set_status("rejected")
                    return record

            if report.batches:
                stage = "executing"
                set_status("executing")

                def progress(batch_index: int, command_index: int) -> None:
                    if on_event is not None:
                        on_event(
                            {
                                "run_id": record.run_id,
                                "status": "executing",
                                "batch": batch_index,
                                "command": command_index,
                            }
                        )

                report.controller_outcome = dispatch(
                    report.batches,
                    self.config.controller.endpoint,
                    self.robot.name,
                    on_progress=progress,
                    timeout=self.config.controller.timeout,
                )
                if not report.controller_outcome.ok:
                    record.error = "executing: controller reported failure"
                    set_status("failed")
                    return record
            set_status("done")
        except (PilotError, ValueError) as exc:
            logger.warning("run %s failed at %s: %s", record.run_id, stage, exc)
            record.error = f"{stage}: {exc}"
            set_status("failed")
        return record


def run_pipeline(
    image: ImageFrame,
    instruction: str,
    config: AppConfig,
    approval: ApprovalFn | None = None,
    on_event: EventFn | None = None,
) -> RunRecord:
    return Pipeline(config).run(image, instruction, approval=approval, on_event=on_event)
