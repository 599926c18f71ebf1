import pytest

from conftest import oracle_chain
import oracle
from streamplan.artobj import (
    ChainConfig,
    generate_problem,
    joint_angles_of,
    make_domain,
    make_problem,
    reconstitute,
    strip_statics,
)
from streamplan.pddl import Atom, render_problem
from streamplan.semantics import Task, apply, validate_plan


def test_nomacro_domain_shape():
    cfg = ChainConfig()
    d = make_domain(cfg)
    assert sorted(a.name for a in d.actions) == [
        "decrease_angle_first_child_45", "increase_angle_first_child_45", "link-to-central-grasp", "release-links"]
    p = make_problem(cfg, {1: 0, 2: 0, 3: 0})
    assert len([o for o in p.objects if o.type == "angle"]) == 24


def test_macro_domain_bundles_grasp_rotate_release():
    d = make_domain(ChainConfig(use_macros=True))
    macro = d.action("grasp-increase-release_45")
    assert macro is not None
    pre = {lit.atom.predicate for lit in macro.precondition.literals}
    assert "free" in pre
    # the gripper ends free again: the macro never touches free/held
    assert not {"free", "held"} & macro.effect.touched_predicates()


@pytest.mark.parametrize("kwargs", [
    {"angle_step_deg": 14},
    {"rotation_increments_deg": (50,)},
    {"n_joints": 0},
    {"central_joint": 4},
    {"rotation_increments_deg": ()},
])
def test_bad_configs(kwargs):
    with pytest.raises(ValueError):
        ChainConfig(**kwargs)


def test_several_increments():
    cfg = ChainConfig(rotation_increments_deg=(90, 45), use_macros=True)
    d = make_domain(cfg)
    assert {"grasp-increase-release_45", "grasp-increase-release_90"} <= {a.name for a in d.actions}
    gp = generate_problem(d, cfg, 6, seed=1)
    assert validate_plan(d, gp.problem, gp.witness).valid


def test_config_json_roundtrip():
    cfg = ChainConfig(4, 30, (60, 90), 3, True, 5)
    assert ChainConfig.from_json(cfg.to_json()) == cfg


@pytest.mark.parametrize("macros", [False, True])
def test_witness_validates(macros):
    cfg = ChainConfig(use_macros=macros)
    d = make_domain(cfg)
    gp = generate_problem(d, cfg, 5, seed=7)
    assert len(gp.witness) == 5
    assert validate_plan(d, gp.problem, gp.witness).valid


def test_generator_is_deterministic():
    cfg = ChainConfig()
    d = make_domain(cfg)
    a, b = generate_problem(d, cfg, 8, seed=3), generate_problem(d, cfg, 8, seed=3)
    assert a.problem == b.problem and a.witness == b.witness


def test_identity_walk_gives_goal_in_init():
    cfg = ChainConfig()
    d = make_domain(cfg)
    # grasp then release returns to the start configuration
    for seed in range(200):
        gp = generate_problem(d, cfg, 2, seed=seed)
        names = [s.name for s in gp.witness]
        if names == ["link-to-central-grasp", "release-links"]:
            break
    else:
        pytest.fail("no identity walk found")
    goal = {lit.atom for lit in gp.problem.goal.literals}
    assert goal <= gp.problem.init
    assert validate_plan(d, gp.problem, []).valid


def test_disjoint_seed_ranges_give_distinct_problems():
    cfg = ChainConfig()
    d = make_domain(cfg)
    left = {render_problem(generate_problem(d, cfg, 5, seed=s).problem).split("(:init", 1)[1] for s in range(500)}
    right = {render_problem(generate_problem(d, cfg, 5, seed=s).problem).split("(:init", 1)[1]
             for s in range(500, 1000)}
    assert not left & right


def test_strip_statics_listing_shape():
    cfg = ChainConfig()
    p = make_problem(cfg, {1: 315, 2: 0, 3: 90}, {1: 0, 2: 0, 3: 90})
    text = strip_statics(p)
    assert text == ("(:init (angle_joint angle315 joint1)\n(angle_joint angle0 joint2)\n(angle_joint angle90 joint3)\n"
                    "(in-centre joint2)\n(free gleft)\n(free gright))\n"
                    "(:goal (and\n(angle_joint angle0 joint1)\n(angle_joint angle0 joint2)\n"
                    "(angle_joint angle90 joint3)))")
    assert "downstream" not in text and "increment" not in text


def test_strip_statics_without_free_grippers():
    cfg = ChainConfig()
    p = make_problem(cfg, {1: 0, 2: 0, 3: 0}, {1: 0}, free=(),
                     extra=frozenset({Atom("held", ("joint1", "gleft")), Atom("held", ("joint3", "gright"))}))
    text = strip_statics(p)
    assert "(free" not in text
    assert "(held joint1 gleft)" in text


@pytest.mark.parametrize("macros", [False, True])
def test_reconstitute_inverts_strip_statics(macros):
    cfg = ChainConfig(use_macros=macros)
    d = make_domain(cfg)
    for seed in range(30):
        p = generate_problem(d, cfg, 6, seed=seed).problem
        again = reconstitute(strip_statics(p), cfg, name=p.name)
        assert again == p


def test_joint_angles_of():
    cfg = ChainConfig()
    p = make_problem(cfg, {1: 15, 2: 30, 3: 345})
    assert joint_angles_of(p.init) == {1: 15, 2: 30, 3: 345}


@pytest.mark.parametrize("direction, delta", [("increase", 45), ("decrease", -45)])
def test_rotation_matches_chain_oracle(direction, delta):
    cfg = ChainConfig(use_macros=True)
    d = make_domain(cfg)
    p = make_problem(cfg, {1: 0, 2: 0, 3: 0})
    task = Task(d, p)
    for j in (1, 2, 3):
        a1, a2 = "angle0", f"angle{delta % 360}"
        s = apply(p.init, task.ground(d.action(f"grasp-{direction}-release_45"), (f"joint{j}", a1, a2, "gleft")))
        expected = {k: (delta % 360 if k >= j else 0) for k in (1, 2, 3)}
        assert joint_angles_of(s) == expected
        sim = oracle_chain(p, cfg)
        sim.step_action(f"grasp-{direction}-release_45", (f"joint{j}", a1, a2, "gleft"))
        assert sim.angles == expected
        dynamic = {(a.predicate, a.args) for a in s if a.predicate in ("angle_joint", "free", "held")}
        assert dynamic == oracle.chain_atoms(sim)
