"""Symbolic execution of an assembled program under a schedule.

The world state tracks where every workpiece sits and which processing
flags it has collected. Execution walks the schedule step by step: a step
launches exactly the operations whose start step it is and whose schedule
predecessors (conjunctive and oriented disjunctive alike) completed
successfully. All operations of a step read the state as of the step's
beginning; their effects land when the step ends.

An operation fails at the first offending skill and its effects are
discarded; schedule descendants of a failed or blocked operation never
launch, while independent operations carry on. Failures never raise, they
become trace entries. Operation-level precondition failures (no call in
the program, workpiece not at machine_1) are recorded with skill index -1
since they precede the first skill.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

from .errors import ParseError
from .model import (
    Operation,
    OperationType,
    PROCESSING_FLAGS,
    Program,
    Scene,
    SkillCall,
    SKILLS,
    _as_dict,
    _as_int,
    _as_list,
    _as_str,
    _check_keys,
    at_label,
    device_name,
    point_name,
    role_placeholder,
)
from .solve import ScheduleGraph
from .tree import point_context_role

FAILURE_REASONS = frozenset(
    {
        "missing_call",
        "wrong_location",
        "missing_device",
        "missing_point",
        "unknown_skill",
        "unbound_placeholder",
    }
)


@dataclass(frozen=True)
class SymbolicState:
    locations: Mapping[str, str]
    flags: Mapping[str, frozenset[str]]

    def flags_of(self, workpiece_id: str) -> frozenset[str]:
        return self.flags.get(workpiece_id, frozenset())


@dataclass(frozen=True)
class OperationRun:
    op_id: str
    robot: str
    skills: tuple[SkillCall, ...]


@dataclass(frozen=True)
class Failure:
    op_id: str
    skill_index: int
    reason: str


@dataclass(frozen=True)
class StepRecord:
    step: int
    operations: tuple[OperationRun, ...]
    failures: tuple[Failure, ...]


@dataclass(frozen=True)
class ExecutionOutcome:
    trace: tuple[StepRecord, ...]
    final_state: SymbolicState
    executed_fully: bool


def initial_state(scene: Scene) -> SymbolicState:
    locations = {}
    for machine in scene.machines:
        for w in machine.held_workpieces:
            locations[w] = machine.id
    return SymbolicState(locations=locations, flags={})


@dataclass
class _OpResult:
    run: OperationRun | None
    failure: Failure | None
    location_change: tuple[str, str] | None  # workpiece -> machine
    new_flag: tuple[str, str] | None  # workpiece -> flag


def _run_operation(
    op: Operation,
    program: Program,
    scene: Scene,
    state: SymbolicState,
) -> _OpResult:
    call = next((c for c in program.calls if c.op_id == op.id), None)
    if call is None:
        return _OpResult(None, Failure(op.id, -1, "missing_call"), None, None)
    wrapper = program.wrappers.get(call.wrapper)
    if wrapper is None:
        return _OpResult(None, Failure(op.id, -1, "missing_call"), None, None)
    skills = program.executions.get(wrapper.execution)
    if skills is None:
        return _OpResult(None, Failure(op.id, -1, "missing_call"), None, None)
    binding = wrapper.binding
    robot_id = binding.get("robot", "")

    if state.locations.get(op.workpiece) != op.machine_1:
        return _OpResult(
            OperationRun(op.id, robot_id, ()),
            Failure(op.id, -1, "wrong_location"),
            None,
            None,
        )

    executed: list[SkillCall] = []
    failure: Failure | None = None
    for index, skill in enumerate(skills):
        if skill.skill not in SKILLS:
            executed.append(skill)
            failure = Failure(op.id, index, "unknown_skill")
            break
        resolved_args: list[str] = []
        for arg in skill.args:
            role = role_placeholder(arg)
            if role is not None:
                if role not in binding:
                    failure = Failure(op.id, index, "unbound_placeholder")
                    break
                resolved_args.append(binding[role])
                continue
            dev = device_name(arg)
            if dev is not None:
                holder = None
                if robot_id and scene.has_robot(robot_id):
                    holder = scene.robot(robot_id)
                if holder is None or dev not in holder.devices:
                    failure = Failure(op.id, index, "missing_device")
                    break
                resolved_args.append(dev)
                continue
            pt = point_name(arg)
            if pt is not None:
                machine_id = binding.get(point_context_role(skill), op.machine_1)
                present = (
                    scene.has_machine(machine_id)
                    and pt in scene.machine(machine_id).points
                )
                if not present:
                    failure = Failure(op.id, index, "missing_point")
                    break
                resolved_args.append(pt)
                continue
            resolved_args.append(arg)
        if failure is not None:
            executed.append(skill)
            break
        executed.append(SkillCall(skill=skill.skill, args=tuple(resolved_args)))

    run = OperationRun(op.id, robot_id, tuple(executed))
    if failure is not None:
        return _OpResult(run, failure, None, None)
    location_change = None
    new_flag = None
    if op.op_type is OperationType.TRANSPORT:
        location_change = (op.workpiece, op.machine_2 or op.machine_1)
    else:
        new_flag = (op.workpiece, PROCESSING_FLAGS[op.op_type])
    return _OpResult(run, None, location_change, new_flag)


def execute(
    schedule: ScheduleGraph,
    program: Program,
    scene: Scene,
    operations: Sequence[Operation],
) -> ExecutionOutcome:
    """Run the program symbolically under the schedule.

    operations supply the type, workpiece and machines of every scheduled
    id; effects (relocation, processing flags) follow the operation, while
    skill arguments resolve through the program's wrapper bindings.
    """
    by_id = {op.id: op for op in operations}
    missing = sorted(set(schedule.start_steps) - set(by_id))
    if missing:
        raise ValueError(f"schedule covers operations without definitions: {missing}")
    preds: dict[str, set[str]] = {op_id: set() for op_id in schedule.start_steps}
    for u, v in schedule.oriented.op_arcs():
        preds[v].add(u)

    locations = dict(initial_state(scene).locations)
    flags: dict[str, set[str]] = {}
    completed: set[str] = set()
    records: list[StepRecord] = []
    for step in range(schedule.makespan):
        due = sorted(
            op_id for op_id, s in schedule.start_steps.items() if s == step
        )
        launched = [op_id for op_id in due if preds[op_id] <= completed]
        state = SymbolicState(
            locations=dict(locations),
            flags={w: frozenset(f) for w, f in flags.items()},
        )
        runs: list[OperationRun] = []
        failures: list[Failure] = []
        effects: list[_OpResult] = []
        for op_id in launched:
            result = _run_operation(by_id[op_id], program, scene, state)
            if result.run is not None:
                runs.append(result.run)
            if result.failure is not None:
                failures.append(result.failure)
            else:
                completed.add(op_id)
                effects.append(result)
        for result in effects:
            if result.location_change is not None:
                w, machine_id = result.location_change
                locations[w] = machine_id
            if result.new_flag is not None:
                w, flag = result.new_flag
                flags.setdefault(w, set()).add(flag)
        records.append(
            StepRecord(step=step, operations=tuple(runs), failures=tuple(failures))
        )
    final = SymbolicState(
        locations=locations,
        flags={w: frozenset(f) for w, f in flags.items()},
    )
    return ExecutionOutcome(
        trace=tuple(records),
        final_state=final,
        executed_fully=completed == set(schedule.start_steps),
    )


def status_delta(
    final: SymbolicState, initial: SymbolicState
) -> frozenset[tuple[str, str]]:
    """Facts that became true: location changes and newly added flags."""
    delta: set[tuple[str, str]] = set()
    for w, machine_id in final.locations.items():
        if initial.locations.get(w) != machine_id:
            delta.add((w, at_label(machine_id)))
    for w, fls in final.flags.items():
        for flag in fls - initial.flags_of(w):
            delta.add((w, flag))
    return frozenset(delta)


# ---------------------------------------------------------------------------
# trace files (JSON lines, one step per line)


def trace_to_jsonl(trace: Sequence[StepRecord]) -> str:
    lines = []
    for record in trace:
        lines.append(
            json.dumps(
                {
                    "step": record.step,
                    "operations": [
                        {
                            "op_id": run.op_id,
                            "robot": run.robot,
                            "skills": [
                                {"skill": s.skill, "args": list(s.args)}
                                for s in run.skills
                            ],
                        }
                        for run in record.operations
                    ],
                    "failures": [
                        {
                            "op_id": f.op_id,
                            "skill_index": f.skill_index,
                            "reason": f.reason,
                        }
                        for f in record.failures
                    ],
                },
                ensure_ascii=False,
            )
        )
    return "".join(line + "\n" for line in lines)


def parse_trace(text: str, path: str = "trace") -> tuple[StepRecord, ...]:
    records: list[StepRecord] = []
    for i, line in enumerate(text.splitlines()):
        if not line.strip():
            continue
        p = f"{path}:{i + 1}"
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{p}: invalid JSON: {exc}") from None
        d = _as_dict(data, p)
        _check_keys(d, p, ["step", "operations", "failures"])
        runs = []
        for j, item in enumerate(_as_list(d["operations"], f"{p}.operations")):
            q = f"{p}.operations[{j}]"
            obj = _as_dict(item, q)
            _check_keys(obj, q, ["op_id", "robot", "skills"])
            skills = []
            for k, s in enumerate(_as_list(obj["skills"], f"{q}.skills")):
                r = f"{q}.skills[{k}]"
                sd = _as_dict(s, r)
                _check_keys(sd, r, ["skill", "args"])
                skills.append(
                    SkillCall(
                        skill=_as_str(sd["skill"], f"{r}.skill"),
                        args=tuple(
                            _as_str(a, f"{r}.args[{m}]")
                            for m, a in enumerate(_as_list(sd["args"], f"{r}.args"))
                        ),
                    )
                )
            runs.append(
                OperationRun(
                    op_id=_as_str(obj["op_id"], f"{q}.op_id"),
                    robot=_as_str(obj["robot"], f"{q}.robot"),
                    skills=tuple(skills),
                )
            )
        failures = []
        for j, item in enumerate(_as_list(d["failures"], f"{p}.failures")):
            q = f"{p}.failures[{j}]"
            obj = _as_dict(item, q)
            _check_keys(obj, q, ["op_id", "skill_index", "reason"])
            failures.append(
                Failure(
                    op_id=_as_str(obj["op_id"], f"{q}.op_id"),
                    skill_index=_as_int(obj["skill_index"], f"{q}.skill_index"),
                    reason=_as_str(obj["reason"], f"{q}.reason"),
                )
            )
        records.append(
            StepRecord(
                step=_as_int(d["step"], f"{p}.step"),
                operations=tuple(runs),
                failures=tuple(failures),
            )
        )
    return tuple(records)
