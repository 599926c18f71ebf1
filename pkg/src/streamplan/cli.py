"""Command-line entry point: ``streamplan <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .artobj import ChainConfig, generate_problem, make_domain, reconstitute
from .dataset import (
    NO_MACRO_TAG,
    STAGED_SIZES,
    audit_dataset,
    build_splits,
    read_splits,
    split_prompt,
    write_splits,
)
from .metrics import (
    RunRecord,
    summarize,
    wait_reduction,
    write_records_csv,
    write_table,
    write_table_csv,
)
from .neuroplanner import plan_end_to_end, plan_streaming
from .pddl import PDDLError, parse_domain, parse_plan, parse_problem, render_domain, render_plan, render_problem
from .provider import ProviderConfig, ProviderError, load_replay_log, submit_finetune
from .semantics import validate_plan
from .solver import SearchBudget, solve_optimal, solve_satisficing
from .spem import DisturbanceSchedule, ExecConfig, run_episode

log = logging.getLogger("streamplan")


def _write_json(path, obj) -> None:
    text = json.dumps(obj, indent=2) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8")


def _read(path) -> str:
    return Path(path).read_text(encoding="utf-8")


# --------------------------------------------------------------------------
# shared options


def _add_chain_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("articulated chain")
    g.add_argument("--domain", choices=("macro", "no-macro"), default="macro")
    g.add_argument("--joints", type=int, default=3)
    g.add_argument("--step", type=int, default=15, help="angle discretisation in degrees")
    g.add_argument("--increments", default="45", help="comma-separated rotation increments in degrees")
    g.add_argument("--central", type=int, default=2, help="index of the joint held in the centre")


def _chain(args) -> ChainConfig:
    incs = tuple(int(x) for x in str(args.increments).split(",") if x.strip())
    return ChainConfig(args.joints, args.step, incs, args.central, args.domain == "macro", getattr(args, "seed", 0))


def _add_provider_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("provider")
    g.add_argument("--provider", choices=("remote", "replay", "emulated"), default="emulated")
    g.add_argument("--endpoint", help="completion URL (remote)")
    g.add_argument("--auth-env", default="PLANNER_API_KEY", help="environment variable holding the API key")
    g.add_argument("--model", default="planner")
    g.add_argument("--replay-log", help="JSON Lines replay log (replay)")
    g.add_argument("--delay-ms", type=float, default=100.0, help="per-line delay (emulated)")
    g.add_argument("--planner", choices=("satisficing", "optimal"), default="satisficing")
    g.add_argument("--temperature", type=float, default=0.0)
    g.add_argument("--presence-penalty", type=float, default=0.0)
    g.add_argument("--frequency-penalty", type=float, default=0.0)
    g.add_argument("--max-tokens", type=int, default=1900)


def _provider(args, chain: ChainConfig) -> ProviderConfig:
    if args.provider == "remote":
        return ProviderConfig("remote", endpoint=args.endpoint, auth_env=args.auth_env)
    if args.provider == "replay":
        if not args.replay_log:
            raise SystemExit("--replay-log is required for the replay provider")
        return ProviderConfig("replay", replay=load_replay_log(args.replay_log))
    return ProviderConfig("emulated", chain=chain, delay_ms=args.delay_ms, planner=args.planner)


def _request_params(args) -> dict:
    return {"model": args.model, "temperature": args.temperature, "presence_penalty": args.presence_penalty,
            "frequency_penalty": args.frequency_penalty, "max_tokens": args.max_tokens}


# --------------------------------------------------------------------------
# commands


def cmd_generate(args) -> int:
    cfg = _chain(args)
    domain = make_domain(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "domain.pddl").write_text(render_domain(domain), encoding="utf-8")
    entries = []
    for k in range(args.n):
        gp = generate_problem(domain, cfg, args.walk_len, seed=args.seed + k)
        stem = f"problem-{k:04d}"
        (out / f"{stem}.pddl").write_text(render_problem(gp.problem), encoding="utf-8")
        (out / f"{stem}.plan").write_text(render_plan(gp.witness) + "\n", encoding="utf-8")
        entries.append({"problem": f"{stem}.pddl", "witness": f"{stem}.plan", "seed": gp.seed,
                        "witness_length": len(gp.witness)})
    _write_json(out / "manifest.json", {"chain": cfg.to_json(), "walk_len": args.walk_len,
                                        "domain": "domain.pddl", "problems": entries})
    print(f"wrote {args.n} problems to {out}")
    return 0


def cmd_solve(args) -> int:
    domain = parse_domain(_read(args.domain_file))
    problem = parse_problem(_read(args.problem), domain)
    if args.optimal:
        result = solve_optimal(domain, problem, args.budget_states)
    else:
        result = solve_satisficing(domain, problem, SearchBudget(args.budget_states, args.budget_secs))
    if result.solved and args.out:
        Path(args.out).write_text(render_plan(result.plan) + "\n", encoding="utf-8")
    _write_json(args.report, result.to_json())
    return 0 if result.solved else 1


def cmd_validate(args) -> int:
    domain = parse_domain(_read(args.domain_file))
    problem = parse_problem(_read(args.problem), domain)
    report = validate_plan(domain, problem, parse_plan(_read(args.plan)))
    _write_json(args.report, report.to_json())
    return 0 if report.valid else 1


def cmd_build_dataset(args) -> int:
    cfg = _chain(args)
    ratios = tuple(float(x) for x in args.ratios.split(","))
    if args.tag and cfg.use_macros:
        raise ValueError("the NO-MACRO tag only applies to --domain no-macro")
    tag = NO_MACRO_TAG if args.tag else None
    splits, report = build_splits(args.n, ratios, args.seed, cfg=cfg, walk_len=args.walk_len, domain_tag=tag,
                                  budget=SearchBudget(args.budget_states, args.budget_secs),
                                  staged_sizes=STAGED_SIZES)
    write_splits(splits, args.out, report, cfg)
    audit = audit_dataset(splits, cfg, expect_tag=tag)
    _write_json(Path(args.out) / "audit.json", audit.to_json())
    print(json.dumps(report.to_json()))
    print(f"audit: {'clean' if audit.clean else f'{len(audit.violations)} violations'}")
    return 0 if audit.clean else 1


def _dataset_chain(manifest: dict, args) -> ChainConfig:
    return ChainConfig.from_json(manifest["chain"]) if "chain" in manifest else _chain(args)


def cmd_audit_dataset(args) -> int:
    splits, manifest = read_splits(args.dir)
    cfg = _dataset_chain(manifest, args)
    expect = False
    if args.expect_tag == "yes":
        expect = NO_MACRO_TAG
    elif args.expect_tag == "no":
        expect = None
    audit = audit_dataset(splits, cfg, expect_tag=expect)
    _write_json(args.report, audit.to_json())
    return 0 if audit.clean else 1


def cmd_plan(args) -> int:
    cfg = _chain(args)
    domain = make_domain(cfg)
    problem = parse_problem(_read(args.problem), domain)
    provider = _provider(args, cfg)
    if args.stream:
        stream = plan_streaming(problem, provider, domain, **_request_params(args))
        for step in stream:
            print(step, flush=True)
        outcome = stream.outcome
    else:
        outcome = plan_end_to_end(problem, provider, domain, **_request_params(args))
        if len(outcome.plan):
            print(render_plan(outcome.plan))
    _write_json(args.report, outcome.to_json())
    return 0 if outcome.status == "valid" else 1


def cmd_run_episode(args) -> int:
    cfg = _chain(args)
    domain = make_domain(cfg)
    problem = parse_problem(_read(args.problem), domain)
    schedule = DisturbanceSchedule.load(args.schedule) if args.schedule else None
    exec_cfg = ExecConfig(action_duration=args.action_ms / 1000.0, replan_limit=args.replan_limit)
    trace, metrics = run_episode(problem, _provider(args, cfg), schedule, exec_cfg, domain,
                                 **_request_params(args))
    _write_json(args.trace, {"events": trace.to_json(), "metrics": metrics.to_json()})
    print(json.dumps(metrics.to_json()))
    return 0 if metrics.goal_reached else 1


def cmd_eval(args) -> int:
    from .plotting import plot_plan_lengths, plot_planning_times, plot_wait_comparison

    splits, manifest = read_splits(args.testset)
    cfg = _dataset_chain(manifest, args)
    samples = getattr(splits, args.split)[: args.limit or None]
    if not samples:
        raise SystemExit(f"split {args.split!r} of {args.testset} is empty")
    params = _request_params(args)
    e2e, streamed = [], []
    for k, sample in enumerate(samples):
        tag, body = split_prompt(sample.prompt)
        chain = cfg.with_macros(False) if tag == NO_MACRO_TAG else cfg
        domain = make_domain(chain)
        problem = reconstitute(body, chain, name=f"test-{k}")
        provider = _provider(args, chain)
        e2e.append(RunRecord.from_outcome(f"{chain.kind}/end-to-end", plan_end_to_end(problem, provider, domain,
                                                                                     **params)))
        if not args.no_stream:
            stream = plan_streaming(problem, provider, domain, **params)
            for _ in stream:
                pass
            streamed.append(RunRecord.from_outcome(f"{chain.kind}/streaming", stream.outcome))
        log.info("problem %d: %s", k, e2e[-1].status)

    records = e2e + streamed
    report = Path(args.report)
    out_dir = report.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    comparison = wait_reduction(streamed, e2e) if streamed else None
    summaries = summarize(records)
    write_table(summaries, report, comparison)
    write_table_csv(summaries, report.with_suffix(".csv"))
    write_records_csv(records, out_dir / "records.csv")
    plot_planning_times(e2e, out_dir / "planning_times.png")
    plot_plan_lengths(e2e, out_dir / "plan_lengths.png")
    if streamed:
        plot_wait_comparison(streamed, e2e, out_dir / "wait_times.png")
    for s in summaries.values():
        print(json.dumps(s.rounded()))
    if comparison is not None:
        print(f"wait reduction: {100 * comparison.reduction:.1f}%  std reduction: {100 * comparison.std_reduction:.1f}%")
    return 0


def cmd_finetune(args) -> int:
    splits, manifest = read_splits(args.dataset)
    cfg = _dataset_chain(manifest, args)
    audit = audit_dataset(splits, cfg)
    train = Path(args.dataset) / manifest["files"]["train"]
    val = Path(args.dataset) / manifest["files"]["validation"]
    sizes = [int(x) for x in args.staged.split(",")]
    provider = None if args.dry_run else ProviderConfig("remote", endpoint=args.endpoint, auth_env=args.auth_env)
    job = submit_finetune(train, args.base_model, args.epochs, sizes, audit, val, provider,
                          dry_run_dir=args.dry_run, poll_interval=args.poll_secs)
    print(json.dumps({"job_ids": job.job_ids, "snapshots": job.snapshots, "dry_run": job.dry_run}))
    return 0


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="streamplan", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="random articulated-chain problems with witness plans")
    _add_chain_args(p)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--walk-len", type=int, default=12)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", help="search for a plan")
    p.add_argument("--domain", dest="domain_file", required=True)
    p.add_argument("--problem", required=True)
    p.add_argument("--optimal", action="store_true", help="breadth-first search for a shortest plan")
    p.add_argument("--budget-states", type=int, default=200_000)
    p.add_argument("--budget-secs", type=float, default=60.0)
    p.add_argument("--out", help="plan file to write")
    p.add_argument("--report", default="-")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("validate", help="check a plan against a problem")
    p.add_argument("--domain", dest="domain_file", required=True)
    p.add_argument("--problem", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--report", default="-")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("build-dataset", help="generate, solve and split a fine-tuning dataset")
    _add_chain_args(p)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--ratios", default="0.8,0.1,0.1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--walk-len", type=int, default=12)
    p.add_argument("--tag", action="store_true", help="prefix prompts with the NO-MACRO tag line")
    p.add_argument("--budget-states", type=int, default=200_000)
    p.add_argument("--budget-secs", type=float, default=60.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_dataset)

    p = sub.add_parser("audit-dataset", help="re-check a dataset directory")
    _add_chain_args(p)
    p.add_argument("--dir", required=True)
    p.add_argument("--expect-tag", choices=("yes", "no", "any"), default="any")
    p.add_argument("--report", default="-")
    p.set_defaults(func=cmd_audit_dataset)

    p = sub.add_parser("plan", help="ask a provider for a plan")
    _add_chain_args(p)
    _add_provider_args(p)
    p.add_argument("--problem", required=True)
    p.add_argument("--stream", action="store_true", help="print actions as they arrive")
    p.add_argument("--report", default="-")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("run-episode", help="execute a streamed plan under the monitor")
    _add_chain_args(p)
    _add_provider_args(p)
    p.add_argument("--problem", required=True)
    p.add_argument("--schedule", help="JSON disturbance schedule")
    p.add_argument("--action-ms", type=float, default=250.0)
    p.add_argument("--replan-limit", type=int, default=5)
    p.add_argument("--trace", default="-")
    p.set_defaults(func=cmd_run_episode)

    p = sub.add_parser("eval", help="planning validity, lengths and waits over a dataset split")
    _add_chain_args(p)
    _add_provider_args(p)
    p.add_argument("--testset", required=True, help="dataset directory")
    p.add_argument("--split", choices=("train", "validation", "test"), default="test")
    p.add_argument("--limit", type=int, default=0, help="only the first N samples")
    p.add_argument("--no-stream", action="store_true", help="skip the streaming runs")
    p.add_argument("--report", required=True, help="table JSON; CSV and figures go alongside")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("finetune", help="submit staged fine-tuning requests")
    _add_chain_args(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--base-model", default="davinci")
    p.add_argument("--epochs", type=int, default=2)
    p.add_argument("--staged", default=",".join(str(s) for s in STAGED_SIZES))
    p.add_argument("--dry-run", metavar="DIR", help="write request payloads here instead of sending them")
    p.add_argument("--endpoint")
    p.add_argument("--auth-env", default="PLANNER_API_KEY")
    p.add_argument("--poll-secs", type=float, default=30.0)
    p.set_defaults(func=cmd_finetune)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (PDDLError, ProviderError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
