"""Forward-search planners over grounded tasks.

``solve_satisficing`` is a greedy best-first search on the number of
unsatisfied goal literals, breaking ties towards deeper nodes and then by
lexicographic ground-action order.  It stops at the first goal state it
pops, so its plans are valid but often not shortest.  ``solve_optimal`` is a
plain breadth-first search used as an oracle for plan length.
"""

from __future__ import annotations

import heapq
import time
from collections import deque
from dataclasses import dataclass

from .pddl import DomainDef, Plan, ProblemDef
from .semantics import GroundAction, Task, _apply_unchecked, holds, unsatisfied


@dataclass(frozen=True)
class SearchBudget:
    max_expanded_states: int = 200_000
    max_wall_time: float = 60.0

    def __post_init__(self):
        if self.max_expanded_states <= 0 or self.max_wall_time <= 0:
            raise ValueError("search budgets must be positive")


@dataclass
class SolveResult:
    outcome: str  # "solved" | "exhausted" | "timeout"
    plan: Plan | None
    expanded: int
    wall_time: float

    @property
    def solved(self) -> bool:
        return self.outcome == "solved"

    def to_json(self) -> dict:
        return {"outcome": self.outcome, "plan_length": len(self.plan) if self.plan else None,
                "expanded": self.expanded, "wall_time": self.wall_time}


class _SuccessorIndex:
    """Ground actions indexed by one positive precondition atom."""

    def __init__(self, actions: tuple[GroundAction, ...]):
        self.always: list[tuple[int, GroundAction]] = []
        self.by_atom: dict = {}
        for i, a in enumerate(actions):
            if a.pre_pos:
                key = min(a.pre_pos)
                self.by_atom.setdefault(key, []).append((i, a))
            else:
                self.always.append((i, a))

    def applicable(self, state: frozenset) -> list[GroundAction]:
        found = list(self.always)
        for atom in state:
            found.extend(self.by_atom.get(atom, ()))
        found.sort(key=lambda p: p[0])
        return [a for _, a in found if a.pre_pos <= state and not (a.pre_neg & state)]


_INDEX_CACHE: dict[int, tuple[tuple, _SuccessorIndex]] = {}


def successor_index(task: Task) -> _SuccessorIndex:
    actions = task.ground_all()
    hit = _INDEX_CACHE.get(id(actions))
    if hit is not None and hit[0] is actions:
        return hit[1]
    idx = _SuccessorIndex(actions)
    if len(_INDEX_CACHE) > 32:
        _INDEX_CACHE.clear()
    _INDEX_CACHE[id(actions)] = (actions, idx)
    return idx


def _extract(parents: dict, state) -> Plan:
    steps = []
    while parents[state] is not None:
        prev, action = parents[state]
        steps.append((action.name, action.args))
        state = prev
    return Plan.from_actions(reversed(steps))


def solve_satisficing(domain: DomainDef, problem: ProblemDef, budget: SearchBudget | None = None) -> SolveResult:
    budget = budget or SearchBudget()
    t0 = time.perf_counter()
    task = Task(domain, problem)
    index = successor_index(task)
    goal = task.dynamic_goal()
    if goal is None:
        return SolveResult("exhausted", None, 0, time.perf_counter() - t0)
    start = task.fluent(problem.init)
    parents = {start: None}
    counter = 0
    frontier = [(unsatisfied(start, goal), 0, counter, start)]
    expanded = 0
    while frontier:
        if expanded >= budget.max_expanded_states:
            return SolveResult("exhausted", None, expanded, time.perf_counter() - t0)
        if expanded % 256 == 0 and time.perf_counter() - t0 > budget.max_wall_time:
            return SolveResult("timeout", None, expanded, time.perf_counter() - t0)
        _, neg_depth, _, state = heapq.heappop(frontier)
        expanded += 1
        if holds(state, goal):
            return SolveResult("solved", _extract(parents, state), expanded, time.perf_counter() - t0)
        for action in index.applicable(state):
            nxt = _apply_unchecked(state, action)
            if nxt in parents:
                continue
            parents[nxt] = (state, action)
            counter += 1
            heapq.heappush(frontier, (unsatisfied(nxt, goal), neg_depth - 1, counter, nxt))
    return SolveResult("exhausted", None, expanded, time.perf_counter() - t0)


def solve_optimal(domain: DomainDef, problem: ProblemDef, limit: int = 1_000_000) -> SolveResult:
    """Breadth-first search; returns a shortest plan or ``exhausted`` once the
    reachable space (or ``limit`` expansions) is used up."""
    t0 = time.perf_counter()
    task = Task(domain, problem)
    index = successor_index(task)
    goal = task.dynamic_goal()
    if goal is None:
        return SolveResult("exhausted", None, 0, time.perf_counter() - t0)
    start = task.fluent(problem.init)
    parents = {start: None}
    if holds(start, goal):
        return SolveResult("solved", Plan(), 1, time.perf_counter() - t0)
    queue = deque([start])
    expanded = 0
    while queue:
        if expanded >= limit:
            return SolveResult("exhausted", None, expanded, time.perf_counter() - t0)
        state = queue.popleft()
        expanded += 1
        for action in index.applicable(state):
            nxt = _apply_unchecked(state, action)
            if nxt in parents:
                continue
            parents[nxt] = (state, action)
            if holds(nxt, goal):
                return SolveResult("solved", _extract(parents, nxt), expanded, time.perf_counter() - t0)
            queue.append(nxt)
    return SolveResult("exhausted", None, expanded, time.perf_counter() - t0)
