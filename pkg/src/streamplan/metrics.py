"""Planning-run statistics in the layout of a results table.

A :class:`RunRecord` is one planning attempt (end-to-end or streamed).
``summarize`` groups records by condition and reports validity, plan length
and timing statistics; ``wait_reduction`` compares streaming against
end-to-end waits.  Standard deviations are population deviations, so a
single record reports 0.
"""

from __future__ import annotations

import csv
import json
import statistics
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable


@dataclass(frozen=True)
class RunRecord:
    condition: str
    status: str
    plan_length: int | None
    total_time: float
    time_to_first_action: float | None = None

    @property
    def valid(self) -> bool:
        return self.status == "valid"

    @classmethod
    def from_outcome(cls, condition: str, outcome) -> "RunRecord":
        """Build from a :class:`~streamplan.neuroplanner.PlanningOutcome`."""
        length = len(outcome.plan) if len(outcome.plan) or outcome.status == "valid" else None
        return cls(condition, outcome.status, length, outcome.total_time, outcome.time_to_first_action)

    @classmethod
    def from_json(cls, d: dict) -> "RunRecord":
        return cls(d["condition"], d["status"], d.get("plan_length"), float(d["total_time"]),
                   d.get("time_to_first_action"))


@dataclass(frozen=True)
class ConditionSummary:
    condition: str
    runs: int
    validity_pct: float
    mean_steps: float | None
    max_steps: int | None
    t_max: float
    t_avg: float
    t_std: float
    ttfa_avg: float | None
    ttfa_std: float | None

    def rounded(self) -> dict:
        """Table precision: validity 1 decimal, steps 3, seconds 2."""
        r = lambda v, n: None if v is None else round(v, n)  # noqa: E731
        return {
            "condition": self.condition,
            "runs": self.runs,
            "validity_pct": r(self.validity_pct, 1),
            "mean_steps": r(self.mean_steps, 3),
            "max_steps": self.max_steps,
            "t_max": r(self.t_max, 2),
            "t_avg": r(self.t_avg, 2),
            "t_std": r(self.t_std, 2),
            "ttfa_avg": r(self.ttfa_avg, 2),
            "ttfa_std": r(self.ttfa_std, 2),
        }


def _mean_std(values: list[float]) -> tuple[float | None, float | None]:
    if not values:
        return None, None
    return statistics.fmean(values), statistics.pstdev(values)


def summarize_condition(condition: str, records: list[RunRecord]) -> ConditionSummary:
    if not records:
        raise ValueError(f"no records for condition {condition!r}")
    lengths = [r.plan_length for r in records if r.plan_length is not None]
    times = [r.total_time for r in records]
    ttfa = [r.time_to_first_action for r in records if r.time_to_first_action is not None]
    t_avg, t_std = _mean_std(times)
    ttfa_avg, ttfa_std = _mean_std(ttfa)
    return ConditionSummary(
        condition=condition,
        runs=len(records),
        validity_pct=100.0 * sum(r.valid for r in records) / len(records),
        mean_steps=statistics.fmean(lengths) if lengths else None,
        max_steps=max(lengths) if lengths else None,
        t_max=max(times),
        t_avg=t_avg,
        t_std=t_std,
        ttfa_avg=ttfa_avg,
        ttfa_std=ttfa_std,
    )


def summarize(records: Iterable[RunRecord]) -> dict[str, ConditionSummary]:
    """Per-condition summaries, in order of first appearance."""
    groups: dict[str, list[RunRecord]] = {}
    for r in records:
        groups.setdefault(r.condition, []).append(r)
    return {name: summarize_condition(name, rs) for name, rs in groups.items()}


@dataclass(frozen=True)
class WaitComparison:
    streaming_wait_avg: float
    end_to_end_wait_avg: float
    streaming_wait_std: float
    end_to_end_wait_std: float

    @property
    def reduction(self) -> float:
        """1 - mean(first-action wait) / mean(full-plan wait)."""
        return 1.0 - self.streaming_wait_avg / self.end_to_end_wait_avg

    @property
    def std_reduction(self) -> float:
        if self.end_to_end_wait_std == 0:
            return 0.0
        return 1.0 - self.streaming_wait_std / self.end_to_end_wait_std

    def to_json(self) -> dict:
        return {**asdict(self), "reduction": self.reduction, "std_reduction": self.std_reduction}


def wait_reduction(streaming: Iterable[RunRecord], end_to_end: Iterable[RunRecord]) -> WaitComparison:
    """Compare how long an executor waits for its first action in each mode.

    Streaming runs wait until their first action; end-to-end runs wait for
    the whole plan.
    """
    s = [r.time_to_first_action for r in streaming if r.time_to_first_action is not None]
    e = [r.total_time for r in end_to_end]
    if not s or not e:
        raise ValueError("both modes need at least one run with a first action")
    s_avg, s_std = _mean_std(s)
    e_avg, e_std = _mean_std(e)
    if e_avg <= 0:
        raise ValueError("end-to-end waits must be positive")
    return WaitComparison(s_avg, e_avg, s_std, e_std)


# --------------------------------------------------------------------------
# files


def write_records_csv(records: Iterable[RunRecord], path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["condition", "status", "plan_length", "total_time", "time_to_first_action"])
        for r in records:
            w.writerow([r.condition, r.status, "" if r.plan_length is None else r.plan_length,
                        f"{r.total_time:.6f}",
                        "" if r.time_to_first_action is None else f"{r.time_to_first_action:.6f}"])
    return path


def read_records_csv(path) -> list[RunRecord]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return [RunRecord(row["condition"], row["status"],
                          int(row["plan_length"]) if row["plan_length"] else None,
                          float(row["total_time"]),
                          float(row["time_to_first_action"]) if row["time_to_first_action"] else None)
                for row in csv.DictReader(fh)]


def write_table(summaries: dict[str, ConditionSummary], path, comparison: WaitComparison | None = None) -> Path:
    path = Path(path)
    doc = {"conditions": [s.rounded() for s in summaries.values()]}
    if comparison is not None:
        doc["wait_comparison"] = comparison.to_json()
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return path


def write_table_csv(summaries: dict[str, ConditionSummary], path) -> Path:
    path = Path(path)
    rows = [s.rounded() for s in summaries.values()]
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]) if rows else ["condition"], lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return path
