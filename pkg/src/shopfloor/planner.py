"""Plan producers: the ground-truth passthrough and a text-protocol client.

A planner turns a task into the operations/allocation/precedence triple.
The exchange format is plain text with three fenced sections so that a
remote language model can produce it; parsing is tolerant of surrounding
prose and collects problems into a validation report instead of raising.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from importlib import resources
from typing import Callable, Mapping, Sequence

import requests

from .errors import PlannerUnavailable
from .model import (
    Allocation,
    Operation,
    OperationType,
    PrecedenceSet,
    Scene,
    TaskInstance,
    ValidationReport,
    canonical_json,
    scene_to_json,
    validate_planner_output,
)

SECTION_NAMES = ("OPERATIONS", "ALLOCATION", "PRECEDENCE")

_FENCE_RE = re.compile(r"```(\w+)\n(.*?)```", re.DOTALL)


@dataclass(frozen=True)
class PlannerOutput:
    """What came back from a planner: the parsed triple (pieces may be None
    when their section was missing or unreadable), the raw text, and every
    problem found on the way."""

    operations: tuple[Operation, ...] | None
    allocation: Allocation | None
    precedence: PrecedenceSet | None
    raw: str
    report: ValidationReport

    @property
    def ok(self) -> bool:
        return (
            self.operations is not None
            and self.allocation is not None
            and self.precedence is not None
            and self.report.ok
        )


def render_planner_text(
    operations: Sequence[Operation],
    allocation: Allocation,
    precedence: PrecedenceSet,
) -> str:
    lines = ["```OPERATIONS"]
    for op in operations:
        fields = [op.id, op.op_type.value, op.workpiece, op.machine_1]
        if op.machine_2 is not None:
            fields.append(op.machine_2)
        lines.append(" | ".join(fields))
    lines.append("```")
    lines.append("")
    lines.append("```ALLOCATION")
    for op_id in sorted(allocation.by_op):
        lines.append(f"{op_id} | {allocation.by_op[op_id]}")
    lines.append("```")
    lines.append("")
    lines.append("```PRECEDENCE")
    for workpiece in sorted(precedence.chains):
        lines.append(f"{workpiece} | " + ", ".join(precedence.chains[workpiece]))
    lines.append("```")
    return "\n".join(lines) + "\n"


def _split_fields(line: str) -> list[str]:
    return [field.strip() for field in line.split("|")]


def _parse_operations(body: str, problems: list[str]) -> tuple[Operation, ...]:
    ops: list[Operation] = []
    for line in body.splitlines():
        if not line.strip():
            continue
        fields = _split_fields(line)
        if len(fields) not in (4, 5):
            problems.append(
                f"operation line needs 4 or 5 fields, got {len(fields)}: {line.strip()!r}"
            )
            continue
        try:
            op_type = OperationType(fields[1])
        except ValueError:
            problems.append(f"unknown operation type '{fields[1]}'")
            continue
        ops.append(
            Operation(
                id=fields[0],
                op_type=op_type,
                workpiece=fields[2],
                machine_1=fields[3],
                machine_2=fields[4] if len(fields) == 5 else None,
            )
        )
    return tuple(ops)


def _parse_allocation(body: str, problems: list[str]) -> Allocation:
    by_op: dict[str, str] = {}
    for line in body.splitlines():
        if not line.strip():
            continue
        fields = _split_fields(line)
        if len(fields) != 2:
            problems.append(
                f"allocation line needs 2 fields, got {len(fields)}: {line.strip()!r}"
            )
            continue
        by_op[fields[0]] = fields[1]
    return Allocation(by_op=by_op)


def _parse_precedence(body: str, problems: list[str]) -> PrecedenceSet:
    chains: dict[str, tuple[str, ...]] = {}
    for line in body.splitlines():
        if not line.strip():
            continue
        fields = _split_fields(line)
        if len(fields) != 2:
            problems.append(
                f"precedence line needs 2 fields, got {len(fields)}: {line.strip()!r}"
            )
            continue
        chain = tuple(p.strip() for p in fields[1].split(",") if p.strip())
        chains[fields[0]] = chain
    return PrecedenceSet(chains=chains)


def parse_planner_text(text: str, scene: Scene) -> PlannerOutput:
    """Read the three fenced sections out of free-form text.

    Unreadable lines and missing sections become report violations, never
    exceptions; semantic validation runs only once all sections parsed.
    """
    problems: list[str] = []
    sections: dict[str, str] = {}
    for match in _FENCE_RE.finditer(text):
        name, body = match.group(1), match.group(2)
        if name not in SECTION_NAMES:
            continue
        if name in sections:
            problems.append(f"duplicate {name} section; keeping the first")
            continue
        sections[name] = body
    for name in SECTION_NAMES:
        if name not in sections:
            problems.append(f"no {name} section found")

    operations = (
        _parse_operations(sections["OPERATIONS"], problems)
        if "OPERATIONS" in sections
        else None
    )
    allocation = (
        _parse_allocation(sections["ALLOCATION"], problems)
        if "ALLOCATION" in sections
        else None
    )
    precedence = (
        _parse_precedence(sections["PRECEDENCE"], problems)
        if "PRECEDENCE" in sections
        else None
    )
    if operations is not None and allocation is not None and precedence is not None:
        semantic = validate_planner_output(operations, allocation, precedence, scene)
        problems.extend(semantic.violations)
    return PlannerOutput(
        operations=operations,
        allocation=allocation,
        precedence=precedence,
        raw=text,
        report=ValidationReport(violations=tuple(problems)),
    )


# ---------------------------------------------------------------------------
# planners


class GroundTruthPlanner:
    """Echoes the task's stored plan through the text protocol, so the rest
    of the pipeline sees exactly what a perfect planner would produce."""

    def plan(self, task: TaskInstance) -> PlannerOutput:
        gt = task.ground_truth
        if gt is None:
            raise ValueError("task carries no ground truth to echo")
        text = render_planner_text(gt.operations, gt.allocation, gt.precedence)
        return parse_planner_text(text, task.scene)


@dataclass(frozen=True)
class LlmConfig:
    base_url: str
    model: str
    api_key: str | None = None
    timeout: float = 60.0


ENV_BASE_URL = "SHOPFLOOR_LLM_BASE_URL"
ENV_MODEL = "SHOPFLOOR_LLM_MODEL"
ENV_API_KEY = "SHOPFLOOR_LLM_API_KEY"
ENV_TIMEOUT = "SHOPFLOOR_LLM_TIMEOUT"


def config_from_env(environ: Mapping[str, str] = os.environ) -> LlmConfig:
    base_url = environ.get(ENV_BASE_URL)
    model = environ.get(ENV_MODEL)
    if not base_url or not model:
        raise PlannerUnavailable(
            f"set {ENV_BASE_URL} and {ENV_MODEL} to use a remote planner"
        )
    return LlmConfig(
        base_url=base_url.rstrip("/"),
        model=model,
        api_key=environ.get(ENV_API_KEY),
        timeout=float(environ.get(ENV_TIMEOUT, "60")),
    )


def load_prompt_template() -> str:
    return (
        resources.files("shopfloor")
        .joinpath("data/planner_prompt.txt")
        .read_text(encoding="utf-8")
    )


def build_prompt(task: TaskInstance, template: str | None = None) -> str:
    text = template if template is not None else load_prompt_template()
    scene_doc = canonical_json(scene_to_json(task.scene))
    return text.replace("<<SCENE>>", scene_doc).replace(
        "<<INSTRUCTION>>", task.instruction
    )


Transport = Callable[[LlmConfig, str], str]


def http_transport(config: LlmConfig, prompt: str) -> str:
    """One chat-completion call; any transport or shape problem becomes
    PlannerUnavailable."""
    headers = {"Content-Type": "application/json"}
    if config.api_key:
        headers["Authorization"] = f"Bearer {config.api_key}"
    try:
        response = requests.post(
            f"{config.base_url}/chat/completions",
            json={
                "model": config.model,
                "messages": [{"role": "user", "content": prompt}],
            },
            headers=headers,
            timeout=config.timeout,
        )
    except requests.RequestException as exc:
        raise PlannerUnavailable(f"planner endpoint unreachable: {exc}") from None
    if response.status_code != 200:
        raise PlannerUnavailable(
            f"planner endpoint answered {response.status_code}"
        )
    try:
        content = response.json()["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError):
        raise PlannerUnavailable("planner response had no message content") from None
    if not isinstance(content, str):
        raise PlannerUnavailable("planner response content was not text")
    return content


class RecordedTransport:
    """Replays canned responses in order and keeps the prompts it saw.
    Stands in for the network in tests and offline runs."""

    def __init__(self, responses: Sequence[str]):
        self._responses = list(responses)
        self.prompts: list[str] = []

    def __call__(self, config: LlmConfig, prompt: str) -> str:
        self.prompts.append(prompt)
        if not self._responses:
            raise PlannerUnavailable("no recorded response left to replay")
        return self._responses.pop(0)


class LlmPlanner:
    """Asks a chat-completion endpoint for the plan and parses its reply."""

    def __init__(
        self,
        config: LlmConfig,
        transport: Transport = http_transport,
        template: str | None = None,
    ):
        self.config = config
        self.transport = transport
        self.template = template

    def plan(self, task: TaskInstance) -> PlannerOutput:
        prompt = build_prompt(task, self.template)
        reply = self.transport(self.config, prompt)
        return parse_planner_text(reply, task.scene)
