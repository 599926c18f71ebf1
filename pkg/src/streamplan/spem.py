"""Simultaneous planning and execution.

A streamed plan fills a FIFO :class:`ActionBuffer` while an executor pops
actions one at a time.  Before each action the monitor checks that the goal
is still the one the plan was made for and that the action's preconditions
hold in the current world; otherwise the stream is cancelled, the buffer is
cleared and planning restarts from the current state and goal.  Scripted
disturbances mutate the world between actions.
"""

from __future__ import annotations

import json
import threading
import time
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path

from .pddl import Atom, Condition, DomainDef, Literal, PDDLError, PlanStep, ProblemDef, parse_sexprs, SList
from .neuroplanner import PlanStream, plan_streaming
from .provider import ProviderConfig
from .semantics import GroundingError, Task, apply, applicable, holds, missing_preconditions


# --------------------------------------------------------------------------
# world, buffer, schedule


class WorldState:
    """The simulated world: current state, current goal and a clock.  Only the
    executor mutates it, through actions and disturbances."""

    def __init__(self, domain: DomainDef, problem: ProblemDef):
        self.domain = domain
        self.problem = problem
        self.task = Task(domain, problem)
        self.state: frozenset = frozenset(problem.init)
        self.goal: Condition = problem.goal
        self.t0 = time.monotonic()

    def now(self) -> float:
        return time.monotonic() - self.t0

    def as_problem(self, name: str | None = None) -> ProblemDef:
        return replace(self.problem, name=name or self.problem.name, init=self.state, goal=self.goal)

    def execute(self, step: PlanStep) -> None:
        self.state = apply(self.state, self.task.ground(self.domain.action(step.name), step.args))

    def goal_reached(self) -> bool:
        return holds(self.state, self.goal)


class ActionBuffer:
    """FIFO of plan steps tagged with the planning round that produced them.

    ``clear()`` starts a new round atomically: anything queued is dropped and
    late puts from older rounds are refused.
    """

    def __init__(self):
        self._items: deque[PlanStep] = deque()
        self._cond = threading.Condition()
        self.generation = 0
        self._closed = False

    def clear(self) -> int:
        with self._cond:
            self.generation += 1
            self._items.clear()
            self._closed = False
            self._cond.notify_all()
            return self.generation

    def put(self, step: PlanStep, generation: int) -> bool:
        with self._cond:
            if generation != self.generation:
                return False
            self._items.append(step)
            self._cond.notify_all()
            return True

    def close(self, generation: int) -> None:
        with self._cond:
            if generation == self.generation:
                self._closed = True
                self._cond.notify_all()

    def pop(self, timeout: float | None = None) -> PlanStep | None:
        """Next step, or None once the current round's stream has ended and
        the queue is empty.  Raises TimeoutError if nothing happens in time."""
        deadline = None if timeout is None else time.monotonic() + timeout
        with self._cond:
            while not self._items and not self._closed:
                remaining = None if deadline is None else deadline - time.monotonic()
                if remaining is not None and remaining <= 0:
                    raise TimeoutError("no action arrived in time")
                self._cond.wait(remaining)
            return self._items.popleft() if self._items else None

    def __len__(self) -> int:
        with self._cond:
            return len(self._items)


@dataclass
class Disturbance:
    after: int
    set: tuple[Atom, ...] = ()
    unset: tuple[Atom, ...] = ()
    new_goal: Condition | None = None

    def to_json(self) -> dict:
        d = {"after": self.after, "set": [str(a) for a in self.set], "unset": [str(a) for a in self.unset]}
        if self.new_goal is not None:
            d["new_goal"] = [str(l) for l in self.new_goal.literals]
        return d


def _atom(text: str) -> Atom:
    exprs = parse_sexprs(text)
    if len(exprs) != 1 or not isinstance(exprs[0], SList) or not exprs[0]:
        raise PDDLError(f"expected one atom, got {text!r}", 1, 1)
    return Atom(str(exprs[0][0]), tuple(str(a) for a in exprs[0][1:]))


def _literal(text: str) -> Literal:
    exprs = parse_sexprs(text)
    node = exprs[0] if exprs else None
    if isinstance(node, SList) and node and node[0] == "not":
        return Literal(Atom(str(node[1][0]), tuple(str(a) for a in node[1][1:])), False)
    return Literal(_atom(text))


@dataclass
class DisturbanceSchedule:
    events: list[Disturbance] = field(default_factory=list)

    def __post_init__(self):
        afters = [e.after for e in self.events]
        if afters != sorted(afters):
            raise ValueError("disturbance triggers must be non-decreasing")
        if any(a < 0 for a in afters):
            raise ValueError("disturbance triggers must be non-negative")

    @classmethod
    def from_json(cls, data: list[dict]) -> "DisturbanceSchedule":
        events = []
        for d in data:
            goal = d.get("new_goal")
            events.append(Disturbance(
                int(d["after"]),
                tuple(_atom(a) for a in d.get("set", ())),
                tuple(_atom(a) for a in d.get("unset", ())),
                Condition(tuple(_literal(g) for g in goal)) if goal is not None else None,
            ))
        return cls(events)

    @classmethod
    def load(cls, path) -> "DisturbanceSchedule":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_json(self) -> list[dict]:
        return [e.to_json() for e in self.events]


# --------------------------------------------------------------------------
# trace and metrics


@dataclass
class TraceEvent:
    t: float
    kind: str
    payload: dict = field(default_factory=dict)


@dataclass
class ExecutionTrace:
    events: list[TraceEvent] = field(default_factory=list)

    def add(self, t: float, kind: str, **payload) -> TraceEvent:
        ev = TraceEvent(t, kind, payload)
        self.events.append(ev)
        return ev

    def of(self, kind: str) -> list[TraceEvent]:
        return [e for e in self.events if e.kind == kind]

    @property
    def executed(self) -> list[str]:
        return [e.payload["action"] for e in self.of("action-executed")]

    def to_json(self) -> list[dict]:
        return [{"t": round(e.t, 6), "kind": e.kind, **e.payload} for e in self.events]


@dataclass
class EpisodeMetrics:
    wait_before_first_action: float | None
    makespan: float
    replans: int
    replan_waits: list[float] = field(default_factory=list)
    actions_executed: int = 0
    goal_reached: bool = False
    failure: str | None = None

    def to_json(self) -> dict:
        return {
            "wait_before_first_action": self.wait_before_first_action,
            "makespan": self.makespan,
            "replans": self.replans,
            "replan_waits": list(self.replan_waits),
            "actions_executed": self.actions_executed,
            "goal_reached": self.goal_reached,
            "failure": self.failure,
        }


@dataclass
class ExecConfig:
    action_duration: float = 0.25
    replan_limit: int = 5
    max_actions: int = 500
    stall_timeout: float = 60.0
    # Restart planning after every action, dropping the rest of the plan.
    # Only exists to demonstrate how context-free regeneration can loop.
    regenerate_every_action: bool = False


# --------------------------------------------------------------------------
# the monitor


@dataclass(frozen=True)
class CheckResult:
    passed: bool
    reason: str = ""
    detail: str = ""

    def __bool__(self) -> bool:
        return self.passed


def spem_check(world: WorldState, step: PlanStep, goal_at_plan_time: Condition) -> CheckResult:
    """Pass iff the goal is unchanged since planning and ``step`` is applicable now."""
    if world.goal != goal_at_plan_time:
        return CheckResult(False, "goal-changed")
    schema = world.domain.action(step.name)
    if schema is None:
        return CheckResult(False, "unknown-action", step.name)
    try:
        ga = world.task.ground(schema, step.args)
    except GroundingError as exc:
        return CheckResult(False, "bad-arguments", str(exc))
    if not applicable(world.state, ga):
        return CheckResult(False, "precondition", " ".join(str(l) for l in missing_preconditions(world.state, ga)))
    return CheckResult(True)


class _Round:
    """One planning round: a plan stream plus the thread copying its steps into the buffer."""

    def __init__(self, world: WorldState, cfg: ProviderConfig, buffer: ActionBuffer, params: dict):
        self.goal = world.goal
        self.generation = buffer.clear()
        self.stream: PlanStream = plan_streaming(world.as_problem(), cfg, world.domain, **params)
        self._thread = threading.Thread(target=self._pump, args=(buffer,), daemon=True)
        self._thread.start()

    def _pump(self, buffer: ActionBuffer) -> None:
        try:
            for step in self.stream:
                if not buffer.put(step, self.generation):
                    self.stream.cancel()
                    break
        finally:
            buffer.close(self.generation)

    def cancel(self) -> None:
        self.stream.cancel()

    def outcome_status(self, timeout: float = 5.0) -> str:
        self.stream.wait(timeout)
        return self.stream.outcome.status if self.stream.outcome else "unknown"


def run_episode(problem: ProblemDef, provider: ProviderConfig, schedule: DisturbanceSchedule | None,
                exec_cfg: ExecConfig | None, domain: DomainDef, **params) -> tuple[ExecutionTrace, EpisodeMetrics]:
    exec_cfg = exec_cfg or ExecConfig()
    schedule = schedule or DisturbanceSchedule()
    world = WorldState(domain, problem)
    buffer = ActionBuffer()
    trace = ExecutionTrace()
    pending = deque(schedule.events)
    executed = 0
    replans = 0
    replan_started: float | None = None
    replan_waits: list[float] = []
    first_action_wait: float | None = None
    failure: str | None = None
    fresh_round = True

    def disturb():
        while pending and pending[0].after <= executed:
            ev = pending.popleft()
            world.state = (world.state - frozenset(ev.unset)) | frozenset(ev.set)
            if ev.new_goal is not None:
                world.goal = ev.new_goal
            trace.add(world.now(), "disturbance", **ev.to_json())

    disturb()
    current = _Round(world, provider, buffer, params)

    def replan(reason: str, **detail) -> bool:
        nonlocal current, replans, replan_started, failure, fresh_round
        current.cancel()
        if replans >= exec_cfg.replan_limit:
            failure = f"replan limit reached ({reason})"
            trace.add(world.now(), "failure", reason=failure)
            return False
        replans += 1
        replan_started = world.now()
        trace.add(replan_started, "replan-started", reason=reason, **detail)
        current = _Round(world, provider, buffer, params)
        fresh_round = True
        return True

    while True:
        if world.goal_reached():
            trace.add(world.now(), "goal-reached", early=len(buffer) > 0 or current.stream.outcome is None)
            current.cancel()
            break
        if executed >= exec_cfg.max_actions:
            failure = "action limit reached"
            trace.add(world.now(), "failure", reason=failure)
            current.cancel()
            break
        try:
            step = buffer.pop(timeout=exec_cfg.stall_timeout)
        except TimeoutError:
            failure = "provider stalled"
            trace.add(world.now(), "failure", reason=failure)
            current.cancel()
            break
        if step is None:
            status = current.outcome_status()
            if status == "provider-error":
                failure = f"provider error: {current.stream.outcome.diagnostics}"
                trace.add(world.now(), "failure", reason=failure)
                break
            if not replan("plan-exhausted" if status == "valid" else status):
                break
            continue
        if fresh_round:
            fresh_round = False
            if first_action_wait is None:
                first_action_wait = world.now()
            if replan_started is not None:
                replan_waits.append(world.now() - replan_started)
                trace.add(world.now(), "replan-ready", wait=world.now() - replan_started)
                replan_started = None
        check = spem_check(world, step, current.goal)
        if not check:
            trace.add(world.now(), "spem-reject", action=step.action, reason=check.reason, detail=check.detail)
            if not replan(check.reason):
                break
            continue
        if exec_cfg.action_duration > 0:
            time.sleep(exec_cfg.action_duration)
        world.execute(step)
        executed += 1
        trace.add(world.now(), "action-executed", action=step.action, index=executed)
        disturb()
        if exec_cfg.regenerate_every_action and not world.goal_reached():
            current.cancel()
            current = _Round(world, provider, buffer, params)
            fresh_round = True

    metrics = EpisodeMetrics(
        wait_before_first_action=first_action_wait,
        makespan=world.now(),
        replans=replans,
        replan_waits=replan_waits,
        actions_executed=executed,
        goal_reached=failure is None,
        failure=failure,
    )
    return trace, metrics
