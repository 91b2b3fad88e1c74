"""Schedule construction: FIFO dispatching and exhaustive optimal search.

Operations take exactly one step. A schedule assigns each operation a
0-based start step; conflicting operations (joined by a disjunctive arc)
may never share a step, and an operation starts strictly after every
predecessor finished. The solvers return a ScheduleGraph whose oriented
graph records the direction induced on every disjunctive arc.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence

from .errors import InstanceTooLarge, ValidationError
from .graph import (
    DisjunctiveGraph,
    OrientedGraph,
    conjunctive_predecessors,
    disjunctive_neighbours,
    is_acyclic,
    orient,
)
from .model import ScheduleRecord

DEFAULT_BRUTE_FORCE_CAP = 10


@dataclass(frozen=True)
class ScheduleGraph:
    """A fully oriented graph plus the start step of every operation."""

    oriented: OrientedGraph
    start_steps: Mapping[str, int]
    makespan: int


def makespan(schedule: ScheduleGraph) -> int:
    """Largest completion step; 0 when nothing is scheduled."""
    if not schedule.start_steps:
        return 0
    return max(schedule.start_steps.values()) + 1


def _oriented_from_steps(
    graph: DisjunctiveGraph, start_steps: Mapping[str, int]
) -> OrientedGraph:
    decisions = {}
    for arc in graph.disjunctive:
        sa, sb = start_steps[arc.a], start_steps[arc.b]
        if sa == sb:
            raise ValidationError(
                f"operations '{arc.a}' and '{arc.b}' share step {sa} "
                "but compete for a resource"
            )
        decisions[arc] = (arc.a, arc.b) if sa < sb else (arc.b, arc.a)
    return orient(graph, decisions)


def _schedule_from_steps(
    graph: DisjunctiveGraph, start_steps: dict[str, int]
) -> ScheduleGraph:
    span = max(start_steps.values()) + 1 if start_steps else 0
    return ScheduleGraph(
        oriented=_oriented_from_steps(graph, start_steps),
        start_steps=start_steps,
        makespan=span,
    )


def solve_fifo(graph: DisjunctiveGraph, ops_order: Sequence[str]) -> ScheduleGraph:
    """Greedy unit-step dispatcher.

    Each step launches a maximal conflict-free subset of the ready
    operations (those whose chain predecessors are done), scanning them in
    ops_order so that earlier emission wins every resource contention.
    Always terminates with a feasible schedule.
    """
    if sorted(ops_order) != sorted(graph.op_ids):
        raise ValueError("ops_order must be a permutation of the graph's operations")
    position = {op_id: i for i, op_id in enumerate(ops_order)}
    preds = conjunctive_predecessors(graph)
    conflicts = disjunctive_neighbours(graph)

    start_steps: dict[str, int] = {}
    completed: set[str] = set()
    remaining = set(graph.op_ids)
    step = 0
    while remaining:
        ready = sorted(
            (op for op in remaining if preds[op] <= completed),
            key=position.__getitem__,
        )
        assert ready, "a workpiece chain always exposes a ready operation"
        dispatched: list[str] = []
        for op in ready:
            if not (conflicts[op] & set(dispatched)):
                dispatched.append(op)
        for op in dispatched:
            start_steps[op] = step
            remaining.discard(op)
        completed.update(dispatched)
        step += 1
    return _schedule_from_steps(graph, start_steps)


def _maximal_conflict_free_subsets(
    ready: Sequence[str], conflicts: Mapping[str, set[str]]
) -> Iterator[frozenset[str]]:
    """All maximal independent subsets of ready under the conflict relation."""
    n = len(ready)
    results: list[frozenset[str]] = []

    def rec(i: int, chosen: list[str], excluded: list[str]) -> None:
        if i == n:
            chosen_set = set(chosen)
            if all(conflicts[x] & chosen_set for x in excluded):
                results.append(frozenset(chosen))
            return
        op = ready[i]
        if conflicts[op] & set(chosen):
            rec(i + 1, chosen, excluded)
        else:
            chosen.append(op)
            rec(i + 1, chosen, excluded)
            chosen.pop()
            excluded.append(op)
            rec(i + 1, chosen, excluded)
            excluded.pop()

    rec(0, [], [])
    return iter(results)


def brute_force_optimal(
    graph: DisjunctiveGraph, cap: int = DEFAULT_BRUTE_FORCE_CAP
) -> ScheduleGraph:
    """Exhaustive minimal-makespan schedule for small instances.

    Branches over the maximal conflict-free ready subsets of every step and
    memoizes on the set of completed operations. Restricting to maximal
    subsets is safe: moving a ready, conflict-free operation earlier never
    delays anything under unit durations, so some optimal schedule (and the
    lexicographically smallest one) dispatches maximally. Ties between
    optimal schedules break toward the lexicographically smallest start-step
    vector, components ordered by operation id.
    """
    ops = graph.op_ids
    if len(ops) > cap:
        raise InstanceTooLarge(
            f"{len(ops)} operations exceed the exhaustive solver cap of {cap}"
        )
    order = sorted(ops)
    preds = conjunctive_predecessors(graph)
    conflicts = disjunctive_neighbours(graph)
    everything = frozenset(ops)

    # memo: completed set -> (remaining makespan, start offsets of the
    # remaining ops in id order, relative to the current step)
    memo: dict[frozenset[str], tuple[int, tuple[int, ...]]] = {}

    def best(completed: frozenset[str]) -> tuple[int, tuple[int, ...]]:
        if completed == everything:
            return (0, ())
        hit = memo.get(completed)
        if hit is not None:
            return hit
        remaining_here = [o for o in order if o not in completed]
        ready = [o for o in remaining_here if preds[o] <= completed]
        champion: tuple[int, tuple[int, ...]] | None = None
        for subset in _maximal_conflict_free_subsets(ready, conflicts):
            rem_span, rem_vec = best(completed | subset)
            remaining_next = [o for o in remaining_here if o not in subset]
            offsets = dict(zip(remaining_next, rem_vec))
            vec = tuple(
                0 if o in subset else 1 + offsets[o] for o in remaining_here
            )
            candidate = (1 + rem_span, vec)
            if champion is None or candidate < champion:
                champion = candidate
        assert champion is not None, "a ready operation always exists"
        memo[completed] = champion
        return champion

    span, vec = best(frozenset())
    start_steps = dict(zip(order, vec))
    schedule = _schedule_from_steps(graph, start_steps)
    assert schedule.makespan == span
    return schedule


def is_feasible(schedule: ScheduleGraph, graph: DisjunctiveGraph) -> bool:
    """True iff the schedule is a consistent solution of the graph:
    acyclic orientation covering every disjunctive arc, all arcs respected
    by the start steps, starts total over the operations."""
    steps = schedule.start_steps
    if set(steps) != set(graph.op_ids):
        return False
    if any(s < 0 for s in steps.values()):
        return False
    arcs = schedule.oriented.arcs
    if not set(graph.conjunctive) <= arcs:
        return False
    for arc in graph.disjunctive:
        forward = (arc.a, arc.b) in arcs
        backward = (arc.b, arc.a) in arcs
        if forward == backward:  # unoriented, or oriented both ways
            return False
    for u, v in schedule.oriented.op_arcs():
        if steps[v] < steps[u] + 1:
            return False
    if not is_acyclic(schedule.oriented):
        return False
    expected = max(steps.values()) + 1 if steps else 0
    return schedule.makespan == expected


# ---------------------------------------------------------------------------
# record interop


def schedule_to_record(schedule: ScheduleGraph, source: str | None = None) -> ScheduleRecord:
    return ScheduleRecord(
        start_steps=dict(schedule.start_steps),
        makespan=schedule.makespan,
        source=source,
    )


def schedule_from_record(graph: DisjunctiveGraph, record: ScheduleRecord) -> ScheduleGraph:
    """Rebuild a full ScheduleGraph from stored start steps.

    Raises ValidationError when the record cannot orient the graph
    (missing operations or a resource double-booked on one step).
    """
    if set(record.start_steps) != set(graph.op_ids):
        raise ValidationError(
            "schedule record does not cover exactly the graph's operations"
        )
    start_steps = dict(record.start_steps)
    schedule = _schedule_from_steps(graph, start_steps)
    if record.makespan != schedule.makespan:
        raise ValidationError(
            f"schedule record claims makespan {record.makespan}, "
            f"start steps imply {schedule.makespan}"
        )
    return schedule
