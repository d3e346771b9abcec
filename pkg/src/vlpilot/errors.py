"""Exception hierarchy shared across the pipeline."""
from __future__ import annotations


class PilotError(Exception):
    """Base class for every error this package raises on purpose."""


class SchemaError(PilotError):
    """A config document violates its schema. Carries the offending field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class DuplicateTaskName(PilotError):
    pass


class UnknownProgramId(PilotError):
    pass


class TaskNotFound(PilotError):
    pass


class BackendError(PilotError):
    """Base for model-backend failures. Message always names the backend."""


class BackendUnavailable(BackendError):
    """Connect error, timeout, or persistent 5xx after retries."""


class BackendRejected(BackendError):
    """The backend answered but the answer is unusable (4xx, missing fixture, bad payload)."""


class ShapeMismatch(BackendError):
    """A segmentation backend returned a mask whose dimensions differ from the image."""


class EmptyEnvironment(PilotError):
    """The vision model reported no objects; the scene is unusable."""


class NoRegion(PilotError):
    """Segmentation produced no region meeting the minimum area."""


class AllSegmentationsFailed(PilotError):
    """Every detected label was dropped during segmentation."""


class PlanSyntaxError(PilotError):
    def __init__(self, line_number: int, line_text: str, message: str):
        super().__init__(f"line {line_number}: {message}: {line_text!r}")
        self.line_number = line_number
        self.line_text = line_text


class EmptyAfterNormalization(PilotError):
    pass


class NoMatch(PilotError):
    """No candidate scored above the similarity threshold."""

    def __init__(self, query: str, best_candidate: str, best_score: float, threshold: float):
        super().__init__(
            f"no match for {query!r}: best candidate {best_candidate!r} "
            f"scored {best_score:.4f} (threshold {threshold})"
        )
        self.query = query
        self.best_candidate = best_candidate
        self.best_score = best_score
        self.threshold = threshold


class SameObject(PilotError):
    pass


class ArityMismatch(PilotError):
    def __init__(self, task_name: str, expected: int, got: int):
        super().__init__(f"task {task_name!r} takes {expected} parameter(s), got {got}")
        self.task_name = task_name
        self.expected = expected
        self.got = got


class ControllerUnreachable(PilotError):
    pass


class ControllerError(PilotError):
    """The controller answered with an error message."""

    def __init__(self, code: str, detail: str = ""):
        super().__init__(f"controller error {code!r}: {detail}" if detail else f"controller error {code!r}")
        self.code = code
        self.detail = detail


class ControllerTimeout(PilotError):
    pass


class UnknownLabel(PilotError):
    pass


class BindError(PilotError):
    pass
