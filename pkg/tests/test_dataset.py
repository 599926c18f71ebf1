import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from streamplan.artobj import ChainConfig, generate_problem, make_domain, make_problem
from streamplan.dataset import (
    NO_MACRO_TAG,
    DatasetSplits,
    JsonlError,
    SampleRejected,
    TrainingSample,
    audit_dataset,
    build_sample,
    build_splits,
    estimate_tokens,
    parse_sample,
    read_jsonl,
    read_splits,
    staged_prefixes,
    write_jsonl,
    write_splits,
)
from streamplan.pddl import Plan
from streamplan.semantics import validate_plan
from streamplan.solver import SolveResult, solve_satisficing


def _listing_pair():
    cfg = ChainConfig()
    p = make_problem(cfg, {1: 315, 2: 0, 3: 0}, {1: 0, 2: 0, 3: 0})
    plan = Plan.from_actions([("link-to-central-grasp", ("joint1", "gleft")),
                              ("increase_angle_first_child_45", ("joint1", "angle315", "angle0", "gleft")),
                              ("release-links", ("joint1", "gleft"))])
    return cfg, p, plan


def test_listing_style_sample_is_byte_exact():
    cfg, p, plan = _listing_pair()
    s = build_sample(p, plan)
    assert s.prompt.startswith("(:init (angle_joint angle315 joint1)\n")
    assert s.prompt.endswith("(angle_joint angle0 joint3)))\n\n###\n\n")
    assert s.completion == (" 0.00100: (link-to-central-grasp joint1 gleft)\n"
                            "0.00300: (increase_angle_first_child_45 joint1 angle315 angle0 gleft)\n"
                            "0.00500: (release-links joint1 gleft)\nEND")


def test_tagged_prompt():
    cfg, p, plan = _listing_pair()
    s = build_sample(p, plan, NO_MACRO_TAG)
    assert s.prompt.startswith("\n--NO-MACRO\n(:init ")


def test_empty_plan_completion():
    cfg = ChainConfig()
    p = make_problem(cfg, {1: 0, 2: 0, 3: 0}, {1: 0})
    assert build_sample(p, Plan()).completion == " \nEND"


def test_over_budget_rejected():
    cfg, p, _ = _listing_pair()
    long_plan = Plan.from_actions([("link-to-central-grasp", ("joint1", "gleft"))] * 200)
    with pytest.raises(SampleRejected, match="tokens"):
        build_sample(p, long_plan)


def test_token_estimate():
    assert estimate_tokens("") == 0
    assert estimate_tokens("abcd") == 1
    assert estimate_tokens("abcde") == 2
    assert estimate_tokens("x" * 8000) == 2000


def test_sample_roundtrip_recovers_problem_and_plan():
    cfg = ChainConfig(use_macros=False)
    d = make_domain(cfg)
    for seed in range(10):
        gp = generate_problem(d, cfg, 6, seed=seed)
        plan = solve_satisficing(d, gp.problem).plan
        s = build_sample(gp, plan, NO_MACRO_TAG)
        problem, again = parse_sample(s, cfg.with_macros(True))
        assert again.actions == plan.actions
        assert validate_plan(d, problem, again).valid


def test_build_splits_clean_and_disjoint():
    splits, report = build_splits(40, seed=1)
    assert report.sizes == {"train": 32, "validation": 4, "test": 4}
    assert report.failures == 0
    bodies = [s.prompt for _, samples in splits.items() for s in samples]
    assert len(set(bodies)) == len(bodies)
    assert audit_dataset(splits, expect_tag=None).clean


def test_build_splits_deterministic():
    a, _ = build_splits(10, seed=5)
    b, _ = build_splits(10, seed=5)
    assert a == b


def test_failing_solver_drops_samples():
    failing = {3, 7, 8}
    calls = []

    def flaky(domain, problem, budget):
        calls.append(problem.name)
        if len(calls) - 1 in failing:
            return SolveResult("exhausted", None, 0, 0.0)
        return solve_satisficing(domain, problem, budget)

    splits, report = build_splits(20, ratios=(0.5, 0.25, 0.25), seed=2, solver=flaky)
    assert report.failures == 3
    assert len(splits) == 17
    assert set(report.drop_reasons) == {"3", "7", "8"}
    assert 3 not in splits.ids["train"]


def test_bad_ratios():
    with pytest.raises(ValueError):
        build_splits(10, ratios=(0.5, 0.5, 0.5))


def test_paper_scale_configuration_is_accepted():
    # only the split arithmetic is exercised; solving 9000 problems is not needed
    from streamplan.dataset import _split_counts
    assert _split_counts(9000, (8 / 9, 1 / 9, 0.0)) == [8000, 1000, 0]


def test_staged_prefixes():
    train = [TrainingSample(str(i), " x\nEND") for i in range(1200)]
    stages = staged_prefixes(train)
    assert sorted(stages) == [500, 1000]
    assert stages[1000][:500] == stages[500]


def test_jsonl_roundtrip(tmp_path):
    samples = [TrainingSample("a\nb\n\n###\n\n", " 0.00100: (x)\nEND"), TrainingSample("é", " \nEND")]
    path = write_jsonl(samples, tmp_path / "s.jsonl")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 2 and set(json.loads(lines[0])) == {"prompt", "completion"}
    assert read_jsonl(path) == samples


def test_jsonl_empty(tmp_path):
    path = write_jsonl([], tmp_path / "e.jsonl")
    assert path.read_text() == "" and read_jsonl(path) == []


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.text(), st.text()), max_size=5))
def test_jsonl_roundtrip_property(tmp_path_factory, pairs):
    samples = [TrainingSample(p, c) for p, c in pairs]
    path = tmp_path_factory.mktemp("j") / "x.jsonl"
    assert read_jsonl(write_jsonl(samples, path)) == samples


@pytest.mark.parametrize("line, fragment", [
    ("{not json", "invalid JSON"),
    ('{"prompt": "a"}', "exactly the keys"),
    ('{"prompt": "a", "completion": 3}', "strings"),
])
def test_jsonl_errors_have_line_numbers(tmp_path, line, fragment):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"prompt": "p", "completion": "c"}\n' + line + "\n", encoding="utf-8")
    with pytest.raises(JsonlError) as exc:
        read_jsonl(path)
    assert exc.value.line == 2 and fragment in str(exc.value)


def test_write_read_splits(tmp_path):
    splits, report = build_splits(12, seed=3, staged_sizes=(5,))
    write_splits(splits, tmp_path, report, ChainConfig())
    again, manifest = read_splits(tmp_path)
    assert again == splits
    assert manifest["staged"] == {"5": "train-5.jsonl"}
    assert ChainConfig.from_json(manifest["chain"]) == ChainConfig()


# audit --------------------------------------------------------------------


@pytest.fixture(scope="module")
def clean_splits():
    splits, _ = build_splits(20, seed=9)
    return splits


def _copy(splits):
    return DatasetSplits(list(splits.train), list(splits.validation), list(splits.test), dict(splits.ids))


def test_audit_truncated_completion(clean_splits):
    s = _copy(clean_splits)
    s.train[0] = TrainingSample(s.train[0].prompt, s.train[0].completion[:-3])
    assert "missing terminator" in audit_dataset(s).kinds()


def test_audit_contamination(clean_splits):
    s = _copy(clean_splits)
    s.test.append(s.train[0])
    kinds = audit_dataset(s).kinds()
    assert kinds == {"contamination"}


def test_audit_other_violations(clean_splits):
    s = _copy(clean_splits)
    first = s.train[0]
    s.train[1] = TrainingSample(s.train[1].prompt.rstrip("#\n"), s.train[1].completion)
    s.train[2] = TrainingSample(s.train[2].prompt, s.train[2].completion.lstrip(" "))
    s.train[3] = TrainingSample(s.train[3].prompt, " 0.00100: (release-links joint1 gleft)\nEND")
    s.train[4] = TrainingSample(s.train[4].prompt, " garbage\nEND")
    s.validation.append(first)
    kinds = audit_dataset(s, expect_tag=NO_MACRO_TAG).kinds()
    assert kinds == {"missing prompt terminator", "missing leading space", "invalid plan", "unparseable",
                     "contamination", "tag mismatch"}


def test_audit_tag_expectation(clean_splits):
    assert "tag mismatch" in audit_dataset(clean_splits, expect_tag=NO_MACRO_TAG).kinds()
    assert audit_dataset(clean_splits, expect_tag=None).clean


def test_audit_duplicate_within_split(clean_splits):
    s = _copy(clean_splits)
    s.train.append(s.train[0])
    assert audit_dataset(s).kinds() == {"duplicate"}


def test_audit_length_budget(clean_splits):
    assert "over length budget" in audit_dataset(clean_splits, max_tokens=10).kinds()


def test_tagged_dataset_audits_clean():
    cfg = ChainConfig(use_macros=False)
    splits, _ = build_splits(10, seed=4, cfg=cfg, domain_tag=NO_MACRO_TAG)
    # the audit re-derives the no-macro domain from the tag, whatever cfg says
    assert audit_dataset(splits, cfg.with_macros(True), expect_tag=NO_MACRO_TAG).clean


def test_random_sample_roundtrip(tmp_path):
    rng = random.Random(0)
    splits, _ = build_splits(10, seed=rng.randrange(1000))
    write_jsonl(splits.train, tmp_path / "t.jsonl")
    assert read_jsonl(tmp_path / "t.jsonl") == splits.train
