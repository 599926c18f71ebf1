"""Use a completion provider as a PDDL planner.

The prompt is the compact problem body (tagged for the NO-MACRO variant);
the completion is read back as an IPC plan.  ``plan_streaming`` hands out
each action as soon as its line is complete.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from typing import Iterator

from .dataset import NO_MACRO_TAG, make_prompt
from .pddl import DomainDef, PDDLError, Plan, PlanStep, ProblemDef, parse_plan, parse_step
from .provider import CompletionRequest, CompletionStream, ProviderConfig, complete
from .semantics import ValidationReport, validate_plan


@dataclass
class PlanningOutcome:
    status: str  # "valid" | "invalid" | "truncated" | "provider-error" | "cancelled"
    plan: Plan = field(default_factory=Plan)
    time_to_first_action: float | None = None
    total_time: float = 0.0
    diagnostics: str = ""
    validation: ValidationReport | None = None
    raw_text: str = ""

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "plan_length": len(self.plan),
            "plan": [s.action for s in self.plan],
            "time_to_first_action": self.time_to_first_action,
            "total_time": self.total_time,
            "diagnostics": self.diagnostics,
            "validation": self.validation.to_json() if self.validation else None,
        }


def domain_tag(domain: DomainDef) -> str | None:
    return NO_MACRO_TAG if domain.name.endswith("no-macro") else None


def build_request(problem: ProblemDef, domain: DomainDef, stream: bool, **params) -> CompletionRequest:
    return CompletionRequest(make_prompt(problem, domain_tag(domain)), stream=stream, **params)


def _judge(domain, problem, plan: Plan, provider_status: str, error: str | None) -> tuple[str, str, ValidationReport | None]:
    if provider_status == "error":
        return "provider-error", error or "", None
    if provider_status == "truncated":
        return "truncated", "completion hit max_tokens", None
    if provider_status == "cancelled":
        return "cancelled", "", None
    report = validate_plan(domain, problem, plan)
    if report.valid:
        return "valid", "", report
    return "invalid", f"{report.verdict}: {report.reason}", report


def plan_end_to_end(problem: ProblemDef, cfg: ProviderConfig, domain: DomainDef, **params) -> PlanningOutcome:
    """Request a whole plan (streaming off), parse and validate it."""
    t0 = time.monotonic()
    stream = complete(cfg, build_request(problem, domain, stream=False, **params))
    text = stream.read()
    total = time.monotonic() - t0
    if stream.status == "error":
        return PlanningOutcome("provider-error", total_time=total, diagnostics=stream.error or "", raw_text=text)
    body = text[1:] if text.startswith(" ") else text
    try:
        plan = parse_plan(body)
    except PDDLError as exc:
        if stream.status == "truncated":
            return PlanningOutcome("truncated", total_time=total, diagnostics=str(exc), raw_text=text)
        return PlanningOutcome("invalid", total_time=total, diagnostics=f"parse error: {exc}", raw_text=text)
    status, diag, report = _judge(domain, problem, plan, stream.status, stream.error)
    first = total if len(plan) else None
    return PlanningOutcome(status, plan, first, total, diag, report, text)


class PlanStream:
    """Actions of a plan as they are generated.

    Iterate to receive :class:`PlanStep` objects; ``outcome`` is filled once
    the provider has finished.  ``cancel()`` aborts the provider at any time.
    """

    def __init__(self, problem: ProblemDef, cfg: ProviderConfig, domain: DomainDef, **params):
        self.problem = problem
        self.domain = domain
        self.started = time.monotonic()
        self.outcome: PlanningOutcome | None = None
        self.steps: list[PlanStep] = []
        self._completion: CompletionStream = complete(cfg, build_request(problem, domain, stream=True, **params))
        self._done = threading.Event()
        self._invalid: str | None = None
        self._saw_end = False

    def cancel(self) -> None:
        self._completion.cancel()

    @property
    def completion(self) -> CompletionStream:
        return self._completion

    def wait(self, timeout: float | None = None) -> bool:
        return self._done.wait(timeout)

    def __iter__(self) -> Iterator[PlanStep]:
        buf = ""
        first_line = True
        ended = False
        first_action_at = None
        try:
            for chunk in self._completion:
                buf += chunk.text
                while "\n" in buf and not ended:
                    line, buf = buf.split("\n", 1)
                    step, ended = self._line(line, first_line)
                    first_line = False
                    if self._invalid:
                        self._completion.cancel()
                        return
                    if step is not None:
                        if first_action_at is None:
                            first_action_at = time.monotonic() - self.started
                        self.steps.append(step)
                        yield step
                if ended:
                    self._saw_end = True
                    self._completion.cancel()
                    break
            # a final unterminated line counts unless the output was cut off
            if not ended and buf.strip() and self._completion.status in ("stopped", "finished"):
                step, ended = self._line(buf, first_line)
                if self._invalid:
                    return
                if step is not None:
                    if first_action_at is None:
                        first_action_at = time.monotonic() - self.started
                    self.steps.append(step)
                    yield step
        finally:
            self._finish(first_action_at)

    def _line(self, line: str, first: bool) -> tuple[PlanStep | None, bool]:
        text = line[1:] if first and line.startswith(" ") else line
        text = text.split(";", 1)[0].strip()
        if not text:
            return None, False
        if text == "END":
            return None, True
        try:
            step = parse_step(text)
        except PDDLError as exc:
            self._invalid = f"parse error: {exc}"
            return None, False
        if self.steps and step.time <= self.steps[-1].time:
            self._invalid = "parse error: non-increasing timestamps"
            return None, False
        return step, False

    def _finish(self, first_action_at) -> None:
        if self.outcome is not None:
            return
        total = time.monotonic() - self.started
        plan = Plan(tuple(self.steps))
        status = self._completion.status
        if self._invalid:
            self.outcome = PlanningOutcome("invalid", plan, first_action_at, total, self._invalid,
                                           raw_text=self._completion.text)
        else:
            if self._saw_end or status is None:
                status = "stopped" if self._saw_end else "cancelled"
            verdict, diag, report = _judge(self.domain, self.problem, plan, status, self._completion.error)
            self.outcome = PlanningOutcome(verdict, plan, first_action_at, total, diag, report,
                                           self._completion.text)
        self._done.set()


def plan_streaming(problem: ProblemDef, cfg: ProviderConfig, domain: DomainDef, **params) -> PlanStream:
    return PlanStream(problem, cfg, domain, **params)
