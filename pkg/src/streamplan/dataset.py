"""Fine-tuning datasets of problem/plan pairs.

Each sample is a ``{"prompt", "completion"}`` pair: the prompt is the
compact problem body followed by ``\\n\\n###\\n\\n``; the completion is a
leading space, one timestamped action per line, and a final ``\\nEND``.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

from .artobj import ChainConfig, GeneratedProblem, generate_problem, make_domain, reconstitute, strip_statics
from .pddl import PDDLError, Plan, ProblemDef, parse_plan, render_plan
from .semantics import validate_plan
from .solver import SearchBudget, SolveResult, solve_satisficing

PROMPT_TERMINATOR = "\n\n###\n\n"
COMPLETION_TERMINATOR = "END"
NO_MACRO_TAG = "\n--NO-MACRO"
CHARS_PER_TOKEN = 4
CONTEXT_TOKENS = 2048
STAGED_SIZES = (500, 1000, 2000, 4000, 8000)
DEFAULT_WALK_LEN = 12


class SampleRejected(ValueError):
    pass


@dataclass(frozen=True)
class TrainingSample:
    prompt: str
    completion: str

    def to_json(self) -> dict:
        return {"prompt": self.prompt, "completion": self.completion}


def estimate_tokens(text: str) -> int:
    return math.ceil(len(text) / CHARS_PER_TOKEN)


def make_prompt(problem: ProblemDef, domain_tag: str | None = None) -> str:
    tag = domain_tag + "\n" if domain_tag else ""
    return tag + strip_statics(problem) + PROMPT_TERMINATOR


def make_completion(plan: Plan) -> str:
    return " " + render_plan(plan, retime=True) + "\n" + COMPLETION_TERMINATOR


def build_sample(problem: GeneratedProblem | ProblemDef, plan: Plan, domain_tag: str | None = None,
                 max_tokens: int = CONTEXT_TOKENS) -> TrainingSample:
    if isinstance(problem, GeneratedProblem):
        problem = problem.problem
    sample = TrainingSample(make_prompt(problem, domain_tag), make_completion(plan))
    used = estimate_tokens(sample.prompt + sample.completion)
    if used > max_tokens:
        raise SampleRejected(f"sample needs ~{used} tokens, budget is {max_tokens}")
    return sample


def split_prompt(prompt: str) -> tuple[str | None, str]:
    """Separate an optional leading tag line from the problem body."""
    body = prompt[:-len(PROMPT_TERMINATOR)] if prompt.endswith(PROMPT_TERMINATOR) else prompt
    if body.startswith(NO_MACRO_TAG + "\n"):
        return NO_MACRO_TAG, body[len(NO_MACRO_TAG) + 1:]
    return None, body


def completion_plan(completion: str) -> Plan:
    text = completion[1:] if completion.startswith(" ") else completion
    return parse_plan(text)


def sample_config(sample: TrainingSample, cfg: ChainConfig) -> ChainConfig:
    """``cfg`` adjusted to the domain variant named by the prompt tag, if any."""
    tag, _ = split_prompt(sample.prompt)
    return cfg.with_macros(False) if tag == NO_MACRO_TAG else cfg


def parse_sample(sample: TrainingSample, cfg: ChainConfig) -> tuple[ProblemDef, Plan]:
    """Recover (problem, plan) from a sample, re-merging statics from ``cfg``."""
    _, body = split_prompt(sample.prompt)
    return reconstitute(body, sample_config(sample, cfg)), completion_plan(sample.completion)


# --------------------------------------------------------------------------
# splits


@dataclass
class DatasetSplits:
    train: list[TrainingSample] = field(default_factory=list)
    validation: list[TrainingSample] = field(default_factory=list)
    test: list[TrainingSample] = field(default_factory=list)
    ids: dict[str, list[int]] = field(default_factory=lambda: {"train": [], "validation": [], "test": []})

    SPLITS = ("train", "validation", "test")

    def items(self):
        return [(name, getattr(self, name)) for name in self.SPLITS]

    def __len__(self) -> int:
        return sum(len(s) for _, s in self.items())


@dataclass
class BuildReport:
    requested: int
    ratios: tuple[float, float, float]
    failures: int = 0
    rejected: int = 0
    regenerated_duplicates: int = 0
    drop_reasons: dict[str, str] = field(default_factory=dict)
    sizes: dict[str, int] = field(default_factory=dict)
    staged_sizes: list[int] = field(default_factory=list)
    solve_times: list[float] = field(default_factory=list)
    plan_lengths: list[int] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "requested": self.requested,
            "ratios": list(self.ratios),
            "failures": self.failures,
            "rejected": self.rejected,
            "regenerated_duplicates": self.regenerated_duplicates,
            "drop_reasons": dict(self.drop_reasons),
            "sizes": dict(self.sizes),
            "staged_sizes": list(self.staged_sizes),
            "mean_plan_length": sum(self.plan_lengths) / len(self.plan_lengths) if self.plan_lengths else None,
            "mean_solve_time": sum(self.solve_times) / len(self.solve_times) if self.solve_times else None,
        }


Solver = Callable[..., SolveResult]


def _split_counts(n: int, ratios) -> list[int]:
    counts = [int(math.floor(n * r + 1e-9)) for r in ratios]
    counts[0] += n - sum(counts)
    return counts


def build_splits(n_total: int, ratios=(0.8, 0.1, 0.1), seed: int = 0, solver: Solver = solve_satisficing,
                 budget: SearchBudget | None = None, cfg: ChainConfig | None = None,
                 walk_len: int = DEFAULT_WALK_LEN, domain_tag: str | None = None,
                 staged_sizes: Iterable[int] = ()) -> tuple[DatasetSplits, BuildReport]:
    """Generate, solve, validate and split ``n_total`` problems.

    Problems whose compact text repeats an earlier one are redrawn, so the
    splits never share a problem.  Solver failures are dropped from their
    split rather than replaced.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-6 or min(ratios) < 0:
        raise ValueError("ratios must be three non-negative numbers summing to 1")
    cfg = cfg or ChainConfig()
    domain = make_domain(cfg)
    budget = budget or SearchBudget()
    report = BuildReport(n_total, ratios)
    splits = DatasetSplits()

    seen: set[str] = set()
    problems: list[GeneratedProblem] = []
    rng = random.Random(seed)
    while len(problems) < n_total:
        gp = generate_problem(domain, cfg, walk_len, seed=rng.getrandbits(32))
        if gp.compact_prompt in seen:
            report.regenerated_duplicates += 1
            continue
        seen.add(gp.compact_prompt)
        problems.append(gp)

    counts = _split_counts(n_total, ratios)
    bounds = [0, counts[0], counts[0] + counts[1], n_total]
    for split_no, name in enumerate(DatasetSplits.SPLITS):
        for idx in range(bounds[split_no], bounds[split_no + 1]):
            gp = problems[idx]
            result = solver(domain, gp.problem, budget)
            report.solve_times.append(result.wall_time)
            if not result.solved:
                report.failures += 1
                report.drop_reasons[str(idx)] = f"solver {result.outcome}"
                continue
            verdict = validate_plan(domain, gp.problem, result.plan)
            if not verdict.valid:
                report.rejected += 1
                report.drop_reasons[str(idx)] = f"plan {verdict.verdict}: {verdict.reason}"
                continue
            try:
                sample = build_sample(gp, result.plan, domain_tag)
            except SampleRejected as exc:
                report.rejected += 1
                report.drop_reasons[str(idx)] = str(exc)
                continue
            getattr(splits, name).append(sample)
            splits.ids[name].append(gp.seed)
            report.plan_lengths.append(len(result.plan))
    report.sizes = {name: len(s) for name, s in splits.items()}
    report.staged_sizes = [s for s in staged_sizes if s <= len(splits.train)]
    return splits, report


def staged_prefixes(train: list[TrainingSample], sizes: Iterable[int] = STAGED_SIZES) -> dict[int, list[TrainingSample]]:
    """Nested prefixes of the training split for snapshot-by-snapshot training."""
    return {s: train[:s] for s in sorted(sizes) if s <= len(train)}


# --------------------------------------------------------------------------
# jsonl


class JsonlError(ValueError):
    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"line {line}: {message}")


def write_jsonl(samples: Iterable[TrainingSample], path) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for s in samples:
            fh.write(json.dumps(s.to_json(), ensure_ascii=False) + "\n")
    return path


def read_jsonl(path) -> list[TrainingSample]:
    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise JsonlError(f"invalid JSON ({exc.msg})", lineno) from None
            if not isinstance(obj, dict) or set(obj) != {"prompt", "completion"}:
                raise JsonlError("expected exactly the keys 'prompt' and 'completion'", lineno)
            if not all(isinstance(v, str) for v in obj.values()):
                raise JsonlError("prompt and completion must be strings", lineno)
            out.append(TrainingSample(obj["prompt"], obj["completion"]))
    return out


def write_splits(splits: DatasetSplits, out_dir, report: BuildReport | None = None,
                 cfg: ChainConfig | None = None) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {name: write_jsonl(samples, out_dir / f"{name}.jsonl") for name, samples in splits.items()}
    manifest = {"files": {k: v.name for k, v in paths.items()}, "ids": splits.ids}
    if cfg is not None:
        manifest["chain"] = cfg.to_json()
    if report is not None:
        manifest["report"] = report.to_json()
        for size, samples in staged_prefixes(splits.train, report.staged_sizes).items():
            p = write_jsonl(samples, out_dir / f"train-{size}.jsonl")
            manifest.setdefault("staged", {})[str(size)] = p.name
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return paths


def read_splits(out_dir) -> tuple[DatasetSplits, dict]:
    out_dir = Path(out_dir)
    manifest = json.loads((out_dir / "manifest.json").read_text(encoding="utf-8"))
    splits = DatasetSplits()
    for name in DatasetSplits.SPLITS:
        p = out_dir / manifest["files"].get(name, f"{name}.jsonl")
        setattr(splits, name, read_jsonl(p) if p.exists() else [])
    splits.ids = {k: list(v) for k, v in manifest.get("ids", {}).items()} or splits.ids
    return splits, manifest


# --------------------------------------------------------------------------
# audit


@dataclass
class AuditReport:
    checked: int = 0
    violations: list[dict] = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return not self.violations

    def kinds(self) -> set[str]:
        return {v["kind"] for v in self.violations}

    def to_json(self) -> dict:
        return {"checked": self.checked, "clean": self.clean, "violations": list(self.violations)}


def audit_dataset(splits: DatasetSplits, cfg: ChainConfig | None = None, expect_tag: str | None | bool = False,
                  max_tokens: int = CONTEXT_TOKENS) -> AuditReport:
    """Re-check every sample: terminators, tag, length, plan validity, and
    problems shared between splits.

    ``expect_tag`` is the tag every prompt must carry (``None`` for none);
    the default ``False`` skips the tag check.
    """
    cfg = cfg or ChainConfig()
    report = AuditReport()
    owner: dict[str, str] = {}

    def flag(split, idx, kind, detail=""):
        report.violations.append({"split": split, "index": idx, "kind": kind, "detail": detail})

    for name, samples in splits.items():
        for idx, s in enumerate(samples):
            report.checked += 1
            if not s.prompt.endswith(PROMPT_TERMINATOR):
                flag(name, idx, "missing prompt terminator")
            if not s.completion.startswith(" "):
                flag(name, idx, "missing leading space")
            if not s.completion.endswith("\n" + COMPLETION_TERMINATOR):
                flag(name, idx, "missing terminator")
            tag, body = split_prompt(s.prompt)
            if expect_tag is not False and tag != expect_tag:
                flag(name, idx, "tag mismatch", f"expected {expect_tag!r}, found {tag!r}")
            used = estimate_tokens(s.prompt + s.completion)
            if used > max_tokens:
                flag(name, idx, "over length budget", f"~{used} tokens")
            if body in owner:
                first = owner[body]
                flag(name, idx, "contamination" if first != name else "duplicate", f"problem also in {first}")
            else:
                owner[body] = name
            try:
                problem, plan = parse_sample(s, cfg)
            except (PDDLError, ValueError) as exc:
                flag(name, idx, "unparseable", str(exc))
                continue
            verdict = validate_plan(make_domain(sample_config(s, cfg)), problem, plan)
            if not verdict.valid:
                flag(name, idx, "invalid plan", f"{verdict.verdict}: {verdict.reason}")
    return report
