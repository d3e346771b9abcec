"""Prompt assembly and plan-text parsing.

The prompt has four parts: a per-LLM system template, the detected object
labels, the robot capability text, and the user instruction. The LLM's
answer comes back as one task per line, `action_name: [param_1, param_n]`,
which parses into ActionCalls without any validation beyond the grammar;
name and arity checking belong to the action manager.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

from . import schema
from .errors import PlanSyntaxError, SchemaError

PLACEHOLDERS = ("{environment}", "{robot}", "{instruction}")

_FENCE = re.compile(r"^`{3,}[\w-]*$")


@dataclass(frozen=True)
class PromptTemplate:
    llm_id: str
    system_text: str

    def __post_init__(self):
        for placeholder in PLACEHOLDERS:
            count = self.system_text.count(placeholder)
            if count != 1:
                raise ValueError(f"template {self.llm_id!r} must contain {placeholder} exactly once, found {count}")


@dataclass(frozen=True)
class ActionCall:
    raw_action: str
    raw_params: tuple[str, ...] = ()
    source_line: int = 0

    def __post_init__(self):
        if not self.raw_action.strip():
            raise ValueError("action name must be non-empty")
        for param in self.raw_params:
            if not param.strip():
                raise ValueError("parameters must be non-empty after trimming")
        object.__setattr__(self, "raw_params", tuple(self.raw_params))


def load_prompt_templates(path: str | Path) -> list[PromptTemplate]:
    """Load the JSON array of {llm_id, system_text} templates."""
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"not valid JSON: {exc}") from None
    if not isinstance(document, list) or not document:
        raise SchemaError("$", "expected a non-empty array of templates")
    templates = []
    for i, raw in enumerate(document):
        obj = schema.expect_object(raw, f"$[{i}]", {"llm_id", "system_text"})
        try:
            templates.append(
                PromptTemplate(
                    schema.expect_str(obj, "llm_id", f"$[{i}]"),
                    schema.expect_str(obj, "system_text", f"$[{i}]"),
                )
            )
        except ValueError as exc:
            raise SchemaError(f"$[{i}].system_text", str(exc)) from None
    return templates


def choose_template(templates: list[PromptTemplate], model_id: str) -> PromptTemplate:
    """Pick the template whose llm_id matches the configured model, else `default`."""
    for template in templates:
        if template.llm_id == model_id:
            return template
    for template in templates:
        if template.llm_id == "default":
            return template
    raise SchemaError("$", f"no prompt template for model {model_id!r} and no 'default' entry")


def build_prompt(
    template: PromptTemplate,
    environment: list[str],
    robot_text: str,
    instruction: str,
) -> str:
    """Fill the template. Labels go in one per line, exactly as detected."""
    if not instruction.strip():
        raise ValueError("instruction must be non-empty")
    if not environment:
        raise ValueError("environment must be non-empty")
    return (
        template.system_text
        .replace("{environment}", "\n".join(environment))
        .replace("{robot}", robot_text)
        .replace("{instruction}", instruction)
    )


def _unquote(token: str) -> str:
    if len(token) >= 2 and token[0] == token[-1] and token[0] in "\"'":
        return token[1:-1].strip()
    return token


def _parse_line(line: str, line_number: int) -> ActionCall:
    if ":" not in line:
        if any(ch in line for ch in "[],"):
            raise PlanSyntaxError(line_number, line, "expected `name: [params]`")
        if re.search(r"\s", line):
            raise PlanSyntaxError(line_number, line, "bare action names cannot contain spaces")
        return ActionCall(line, (), line_number)
    name, _, rest = line.partition(":")
    name = name.strip()
    rest = rest.strip()
    if not name:
        raise PlanSyntaxError(line_number, line, "missing action name before ':'")
    if "[" in name or "]" in name:
        raise PlanSyntaxError(line_number, line, "action name cannot contain brackets")
    if not rest.startswith("[") or not rest.endswith("]"):
        raise PlanSyntaxError(line_number, line, "parameters must be bracketed as [a, b]")
    inner = rest[1:-1].strip()
    if not inner:
        return ActionCall(name, (), line_number)
    params = []
    for token in inner.split(","):
        token = _unquote(token.strip())
        if not token:
            raise PlanSyntaxError(line_number, line, "empty parameter")
        if "[" in token or "]" in token:
            raise PlanSyntaxError(line_number, line, "parameter cannot contain brackets")
        params.append(token)
    return ActionCall(name, tuple(params), line_number)


def parse_plan(llm_text: str) -> list[ActionCall]:
    """Parse the LLM's plan text into ordered ActionCalls.

    Blank lines and markdown fences are skipped; any other malformed line
    rejects the entire plan, because a half-executed plan is worse than a
    refused one. A bare name with no colon is a zero-parameter call.
    """
    calls: list[ActionCall] = []
    for line_number, raw_line in enumerate(llm_text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or _FENCE.match(line):
            continue
        calls.append(_parse_line(line, line_number))
    return calls


def render_plan(calls: list[ActionCall]) -> str:
    """Canonical text form; parse_plan(render_plan(x)) == x modulo whitespace."""
    return "\n".join(f"{call.raw_action}: [{', '.join(call.raw_params)}]" for call in calls)
