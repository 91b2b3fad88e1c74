"""Process trees: reusable skill procedures organized as a rooted DAG.

Each node carries a type gate (a specific operation type, or general for
"applies to everything"), a machine-checkable condition over the operation
and the scene, and a snippet of skill-call templates. A branch is a
root-to-leaf path; assembling a program means selecting the unique branch
for every operation, concatenating its snippets into one execution function
per distinct branch, and binding the operation's concrete robot, machines
and workpiece through a per-operation wrapper.

Nodes with identical procedures are shared between parents, so the
structure is a rooted acyclic graph rather than a strict tree; paths are
still what selection works on.

Conditions are s-expressions over a closed vocabulary:

    true
    (= op.type "transport")            attribute equality; also
                                       workpiece.kind, machine_1.name,
                                       machine_2.name
    (device-present robot "camera")    every robot that can reach the
                                       operation's machine_1 carries it
    (point-present machine_1 "Photo_Point")
    (and <expr> <expr> ...)
    (not <expr>)
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

from .errors import AmbiguousBranch, NoBranch, ParseError, ValidationError
from .model import (
    Allocation,
    Operation,
    OperationType,
    Program,
    ProgramCall,
    Scene,
    SkillCall,
    SKILLS,
    ValidationReport,
    Wrapper,
    _as_dict,
    _as_int,
    _as_list,
    _as_str,
    _check_keys,
    canonical_json,
    device_name,
    point_name,
    role_placeholder,
    skill_call_from_json,
    skill_call_to_json,
)

GENERAL = "general"


@dataclass(frozen=True)
class TreeNode:
    index: int
    op_type: OperationType | None  # None means general
    description: str
    condition: str
    snippet: tuple[SkillCall, ...]
    children: tuple[int, ...]

    @property
    def is_general(self) -> bool:
        return self.op_type is None


@dataclass(frozen=True)
class ProcessTree:
    root: int
    nodes: Mapping[int, TreeNode]

    def node(self, index: int) -> TreeNode:
        return self.nodes[index]


Branch = tuple[TreeNode, ...]


# ---------------------------------------------------------------------------
# condition language

_TOKEN_RE = re.compile(r'\(|\)|"[^"]*"|[^\s()"]+')
_ATTRS = {"op.type", "workpiece.kind", "machine_1.name", "machine_2.name"}
_MACHINE_ROLES = {"machine_1", "machine_2"}


def _tokenize(text: str) -> list[str]:
    tokens = []
    cursor = 0
    for match in _TOKEN_RE.finditer(text):
        if text[cursor:match.start()].strip():
            raise ParseError(f"condition contains stray characters: {text!r}")
        tokens.append(match.group())
        cursor = match.end()
    if text[cursor:].strip():
        raise ParseError(f"condition contains stray characters: {text!r}")
    return tokens


def parse_condition(text: str) -> Any:
    """Parse a condition into a nested-list form; raises ParseError."""
    tokens = _tokenize(text)
    pos = 0

    def take() -> str:
        nonlocal pos
        if pos >= len(tokens):
            raise ParseError(f"condition ended early: {text!r}")
        tok = tokens[pos]
        pos += 1
        return tok

    def expr() -> Any:
        tok = take()
        if tok == "true":
            return True
        if tok != "(":
            raise ParseError(f"expected 'true' or '(' in condition, got {tok!r}")
        head = take()
        if head == "and":
            items = []
            while pos < len(tokens) and tokens[pos] != ")":
                items.append(expr())
            take()  # the ')', or a ParseError when the input ran out
            if not items:
                raise ParseError("(and) needs at least one sub-expression")
            return ["and", *items]
        if head == "not":
            inner = expr()
            if take() != ")":
                raise ParseError("(not ...) takes exactly one sub-expression")
            return ["not", inner]
        if head == "=":
            attr = take()
            if attr not in _ATTRS:
                raise ParseError(f"unknown attribute {attr!r} in condition")
            value = take()
            if not (value.startswith('"') and value.endswith('"')):
                raise ParseError(f"attribute value must be quoted, got {value!r}")
            if take() != ")":
                raise ParseError("(= ...) takes an attribute and one value")
            return ["=", attr, value[1:-1]]
        if head == "device-present":
            role = take()
            if role != "robot":
                raise ParseError("device-present applies to the robot role")
            name = take()
            if not (name.startswith('"') and name.endswith('"')):
                raise ParseError(f"device name must be quoted, got {name!r}")
            if take() != ")":
                raise ParseError("(device-present ...) takes a role and a name")
            return ["device-present", role, name[1:-1]]
        if head == "point-present":
            role = take()
            if role not in _MACHINE_ROLES:
                raise ParseError("point-present applies to machine_1 or machine_2")
            name = take()
            if not (name.startswith('"') and name.endswith('"')):
                raise ParseError(f"point name must be quoted, got {name!r}")
            if take() != ")":
                raise ParseError("(point-present ...) takes a role and a name")
            return ["point-present", role, name[1:-1]]
        raise ParseError(f"unknown condition form {head!r}")

    result = expr()
    if pos != len(tokens):
        raise ParseError(f"trailing tokens in condition: {text!r}")
    return result


def _attr_value(attr: str, op: Operation, scene: Scene) -> str | None:
    if attr == "op.type":
        return op.op_type.value
    if attr == "workpiece.kind":
        try:
            return scene.workpiece(op.workpiece).kind
        except KeyError:
            return None
    machine_id = op.machine_1 if attr == "machine_1.name" else op.machine_2
    if machine_id is None:
        return None
    try:
        return scene.machine(machine_id).name
    except KeyError:
        return None


def eval_condition(expr: Any, op: Operation, scene: Scene) -> bool:
    if expr is True:
        return True
    head = expr[0]
    if head == "and":
        return all(eval_condition(e, op, scene) for e in expr[1:])
    if head == "not":
        return not eval_condition(expr[1], op, scene)
    if head == "=":
        return _attr_value(expr[1], op, scene) == expr[2]
    if head == "device-present":
        crew = [r for r in scene.robots if op.machine_1 in r.reachable_machines]
        return bool(crew) and all(expr[2] in r.devices for r in crew)
    if head == "point-present":
        machine_id = op.machine_1 if expr[1] == "machine_1" else op.machine_2
        if machine_id is None:
            return False
        try:
            machine = scene.machine(machine_id)
        except KeyError:
            return False
        return expr[2] in machine.points
    raise ParseError(f"unknown condition form {head!r}")


def condition_holds(node: TreeNode, op: Operation, scene: Scene) -> bool:
    return eval_condition(parse_condition(node.condition), op, scene)


# ---------------------------------------------------------------------------
# tree files


def tree_to_json(tree: ProcessTree) -> dict:
    return {
        "root": tree.root,
        "nodes": [
            {
                "index": node.index,
                "type": GENERAL if node.op_type is None else node.op_type.value,
                "description": node.description,
                "condition": node.condition,
                "snippet": [skill_call_to_json(s) for s in node.snippet],
                "children": list(node.children),
            }
            for _, node in sorted(tree.nodes.items())
        ],
    }


def serialize_tree(tree: ProcessTree) -> str:
    return canonical_json(tree_to_json(tree))


def tree_from_json(data: Any, path: str = "tree") -> ProcessTree:
    d = _as_dict(data, path)
    _check_keys(d, path, ["root", "nodes"])
    nodes: dict[int, TreeNode] = {}
    for i, item in enumerate(_as_list(d["nodes"], f"{path}.nodes")):
        p = f"{path}.nodes[{i}]"
        obj = _as_dict(item, p)
        _check_keys(obj, p, ["index", "type", "description", "condition", "snippet", "children"])
        index = _as_int(obj["index"], f"{p}.index")
        type_text = _as_str(obj["type"], f"{p}.type")
        if type_text == GENERAL:
            op_type = None
        else:
            try:
                op_type = OperationType(type_text)
            except ValueError:
                raise ParseError(f"{p}.type: unknown node type '{type_text}'") from None
        snippet = tuple(
            skill_call_from_json(s, f"{p}.snippet[{j}]")
            for j, s in enumerate(_as_list(obj["snippet"], f"{p}.snippet"))
        )
        children = tuple(
            _as_int(c, f"{p}.children[{j}]")
            for j, c in enumerate(_as_list(obj["children"], f"{p}.children"))
        )
        if index in nodes:
            raise ValidationError(f"node index {index} is not unique")
        nodes[index] = TreeNode(
            index=index,
            op_type=op_type,
            description=_as_str(obj["description"], f"{p}.description"),
            condition=_as_str(obj["condition"], f"{p}.condition"),
            snippet=snippet,
            children=children,
        )
    tree = ProcessTree(root=_as_int(d["root"], f"{path}.root"), nodes=nodes)
    _validate_tree(tree)
    return tree


def parse_tree(text: str, path: str = "tree") -> ProcessTree:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from None
    return tree_from_json(data, path)


def load_tree(path: str | Path) -> ProcessTree:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"{p}: cannot read tree file: {exc}") from None
    return parse_tree(text, str(p))


def load_reference_tree() -> ProcessTree:
    """The tree shipped with the package, covering all five operation types
    with bracket-camera and handheld-camera location variants."""
    from importlib import resources

    text = (
        resources.files("shopfloor")
        .joinpath("data/process_tree.json")
        .read_text(encoding="utf-8")
    )
    return parse_tree(text, "process_tree.json")


def _validate_tree(tree: ProcessTree) -> None:
    if tree.root not in tree.nodes:
        raise ValidationError(f"root index {tree.root} has no node")
    for node in tree.nodes.values():
        for child in node.children:
            if child not in tree.nodes:
                raise ValidationError(
                    f"node {node.index} references missing child {child}"
                )
        for call in node.snippet:
            if call.skill not in SKILLS:
                raise ValidationError(
                    f"node {node.index} uses unknown skill '{call.skill}'"
                )
        parse_condition(node.condition)

    # Reachability and acyclicity in one walk.
    state: dict[int, int] = {}  # 1 = on stack, 2 = done

    def visit(index: int) -> None:
        if state.get(index) == 1:
            raise ValidationError(f"cycle through node {index}")
        if state.get(index) == 2:
            return
        state[index] = 1
        for child in tree.nodes[index].children:
            visit(child)
        state[index] = 2

    visit(tree.root)
    unreachable = sorted(set(tree.nodes) - set(state))
    if unreachable:
        raise ValidationError(
            f"nodes unreachable from root: {', '.join(map(str, unreachable))}"
        )

    # Every operation type needs at least one complete, type-consistent branch.
    def covers(index: int, op_type: OperationType) -> bool:
        node = tree.nodes[index]
        if node.op_type not in (None, op_type):
            return False
        if not node.children:
            return True
        return any(covers(child, op_type) for child in node.children)

    for op_type in OperationType:
        if not covers(tree.root, op_type):
            raise ValidationError(
                f"no complete branch exists for type '{op_type.value}'"
            )


# ---------------------------------------------------------------------------
# branch selection


def select_branch(tree: ProcessTree, op: Operation, scene: Scene) -> Branch:
    """The unique root-to-leaf path matching op in this scene.

    A node matches when it is general or typed like op, and its condition
    holds. Zero matches raise NoBranch naming the deepest node that still
    matched; several raise AmbiguousBranch listing the rival paths.
    """
    matches: list[tuple[TreeNode, ...]] = []
    deepest: tuple[int, TreeNode] | None = None

    def walk(index: int, path: tuple[TreeNode, ...]) -> None:
        nonlocal deepest
        node = tree.nodes[index]
        if node.op_type not in (None, op.op_type):
            return
        if not condition_holds(node, op, scene):
            return
        path = path + (node,)
        if deepest is None or len(path) > deepest[0]:
            deepest = (len(path), node)
        if not node.children:
            matches.append(path)
            return
        for child in node.children:
            walk(child, path)

    walk(tree.root, ())
    if not matches:
        if deepest is None:
            raise NoBranch(
                f"operation '{op.id}': even the root matched nothing"
            )
        raise NoBranch(
            f"operation '{op.id}': no complete branch; deepest match was "
            f"node {deepest[1].index} ({deepest[1].description})"
        )
    if len(matches) > 1:
        listed = "; ".join(
            "->".join(str(n.index) for n in path) for path in matches
        )
        raise AmbiguousBranch(
            f"operation '{op.id}': {len(matches)} branches match: {listed}"
        )
    return matches[0]


# ---------------------------------------------------------------------------
# program assembly


def _execution_name(branch: Branch) -> str:
    return "exec_" + "_".join(str(node.index) for node in branch)


def _branch_skills(branch: Branch) -> tuple[SkillCall, ...]:
    skills: list[SkillCall] = []
    for node in branch:
        skills.extend(node.snippet)
    return tuple(skills)


def assemble_program(
    tree: ProcessTree,
    operations: Sequence[Operation],
    allocation: Allocation,
    scene: Scene,
) -> Program:
    """Build the three-layer program for a validated plan.

    Operations selecting the same branch share one execution function
    (keyed by the branch's node-index sequence); each operation gets its
    own wrapper binding robot, machines and workpiece. Deterministic and
    idempotent for a fixed input.
    """
    executions: dict[str, tuple[SkillCall, ...]] = {}
    wrappers: dict[str, Wrapper] = {}
    calls: list[ProgramCall] = []
    for op in operations:
        branch = select_branch(tree, op, scene)
        exec_name = _execution_name(branch)
        if exec_name not in executions:
            executions[exec_name] = _branch_skills(branch)
        robot = allocation.robot_for(op.id)
        if robot is None:
            raise ValidationError(f"operation '{op.id}' has no allocated robot")
        binding = {"robot": robot, "machine_1": op.machine_1, "workpiece": op.workpiece}
        if op.machine_2 is not None:
            binding["machine_2"] = op.machine_2
        wrapper_name = f"op_{op.id}"
        wrappers[wrapper_name] = Wrapper(
            name=wrapper_name, execution=exec_name, binding=binding
        )
        calls.append(ProgramCall(op_id=op.id, wrapper=wrapper_name, args=binding))
    calls.sort(key=lambda c: c.op_id)
    return Program(calls=tuple(calls), wrappers=wrappers, executions=executions)


# ---------------------------------------------------------------------------
# program checking


def point_context_role(call: SkillCall) -> str:
    """Which machine role a point argument refers to: the machine-role
    placeholder in the same call, defaulting to machine_1."""
    for arg in call.args:
        if role_placeholder(arg) in _MACHINE_ROLES:
            return role_placeholder(arg)  # type: ignore[return-value]
    return "machine_1"


def check_program(program: Program, scene: Scene) -> ValidationReport:
    """Static validity: vocabulary, binding completeness, resolvable
    devices and points. Never raises."""
    problems: list[str] = []
    if len(program.calls) != len(program.wrappers):
        problems.append(
            f"{len(program.calls)} calls but {len(program.wrappers)} wrappers"
        )
    seen_ops: set[str] = set()
    for call in program.calls:
        if call.op_id in seen_ops:
            problems.append(f"several calls for operation '{call.op_id}'")
        seen_ops.add(call.op_id)
        wrapper = program.wrappers.get(call.wrapper)
        if wrapper is None:
            problems.append(f"call '{call.op_id}' targets unknown wrapper '{call.wrapper}'")
            continue
        if dict(call.args) != dict(wrapper.binding):
            problems.append(
                f"call '{call.op_id}' passes arguments that differ from "
                f"wrapper '{call.wrapper}' binding"
            )
    for name, wrapper in sorted(program.wrappers.items()):
        skills = program.executions.get(wrapper.execution)
        if skills is None:
            problems.append(
                f"wrapper '{name}' targets unknown execution '{wrapper.execution}'"
            )
            continue
        binding = wrapper.binding
        robot_id = binding.get("robot")
        robot = None
        if robot_id is not None:
            if scene.has_robot(robot_id):
                robot = scene.robot(robot_id)
            else:
                problems.append(f"wrapper '{name}' binds unknown robot '{robot_id}'")
        for role in ("machine_1", "machine_2"):
            if role in binding and not scene.has_machine(binding[role]):
                problems.append(
                    f"wrapper '{name}' binds unknown machine '{binding[role]}'"
                )
        if "workpiece" in binding and not scene.has_workpiece(binding["workpiece"]):
            problems.append(
                f"wrapper '{name}' binds unknown workpiece '{binding['workpiece']}'"
            )
        for i, call in enumerate(skills):
            where = f"wrapper '{name}', skill {i} ({call.skill})"
            if call.skill not in SKILLS:
                problems.append(f"{where}: unknown skill")
            for arg in call.args:
                role = role_placeholder(arg)
                if role is not None and role not in binding:
                    problems.append(f"{where}: placeholder '{{{role}}}' is unbound")
                dev = device_name(arg)
                if dev is not None and robot is not None and dev not in robot.devices:
                    problems.append(
                        f"{where}: robot '{robot.id}' lacks device '{dev}'"
                    )
                pt = point_name(arg)
                if pt is not None:
                    machine_id = binding.get(point_context_role(call))
                    if machine_id is None:
                        problems.append(f"{where}: point '{pt}' has no machine to live on")
                    elif scene.has_machine(machine_id):
                        if pt not in scene.machine(machine_id).points:
                            problems.append(
                                f"{where}: machine '{machine_id}' lacks point '{pt}'"
                            )
    return ValidationReport(violations=tuple(problems))
