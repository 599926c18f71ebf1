import pytest

from streamplan.artobj import ChainConfig, generate_problem, make_domain, make_problem
from streamplan.semantics import validate_plan
from streamplan.solver import SearchBudget, solve_optimal, solve_satisficing


def test_goal_in_init_is_solved_immediately():
    cfg = ChainConfig()
    d = make_domain(cfg)
    p = make_problem(cfg, {1: 0, 2: 0, 3: 0}, {1: 0, 2: 0, 3: 0})
    r = solve_satisficing(d, p)
    assert r.solved and len(r.plan) == 0 and r.expanded == 1
    assert solve_optimal(d, p).plan is not None


def test_tiny_budget_exhausts():
    cfg = ChainConfig()
    d = make_domain(cfg)
    p = make_problem(cfg, {1: 0, 2: 0, 3: 0}, {1: 90, 2: 180, 3: 270})
    r = solve_satisficing(d, p, SearchBudget(max_expanded_states=1))
    assert r.outcome == "exhausted" and r.plan is None


def test_bad_budget():
    with pytest.raises(ValueError):
        SearchBudget(0, 1)


def test_one_rotation_optimal_lengths():
    """A single +45 rotation of joint 3: grasp + rotate without macros, one macro step with them.

    Goals name only joint angles, so the optimal NO-MACRO plan may leave the
    gripper closed and needs no release.
    """
    for macros, expected in ((False, 2), (True, 1)):
        cfg = ChainConfig(use_macros=macros)
        d = make_domain(cfg)
        p = make_problem(cfg, {1: 0, 2: 0, 3: 0}, {1: 0, 2: 0, 3: 45})
        r = solve_optimal(d, p)
        assert r.solved and len(r.plan) == expected
        assert validate_plan(d, p, r.plan).valid


def test_unreachable_goal_is_exhausted():
    """Angles only ever move by 45 degrees, so 15 degrees away is out of reach."""
    cfg = ChainConfig(use_macros=True)
    d = make_domain(cfg)
    p = make_problem(cfg, {1: 0, 2: 0, 3: 0}, {1: 15})
    assert solve_optimal(d, p).outcome == "exhausted"
    assert solve_satisficing(d, p).outcome == "exhausted"


@pytest.mark.parametrize("macros", [False, True])
def test_satisficing_plans_validate_and_optimal_is_shorter(macros):
    cfg = ChainConfig(use_macros=macros)
    d = make_domain(cfg)
    for seed in range(15):
        p = generate_problem(d, cfg, 6, seed=seed).problem
        sat = solve_satisficing(d, p)
        opt = solve_optimal(d, p)
        assert sat.solved and opt.solved
        assert validate_plan(d, p, sat.plan).valid and validate_plan(d, p, opt.plan).valid
        assert len(opt.plan) <= len(sat.plan)


def test_deterministic():
    cfg = ChainConfig()
    d = make_domain(cfg)
    p = generate_problem(d, cfg, 10, seed=4).problem
    assert solve_satisficing(d, p).plan == solve_satisficing(d, p).plan


def test_result_json():
    cfg = ChainConfig()
    d = make_domain(cfg)
    p = generate_problem(d, cfg, 3, seed=1).problem
    j = solve_satisficing(d, p).to_json()
    assert j["outcome"] == "solved" and j["plan_length"] >= 0 and j["wall_time"] >= 0
