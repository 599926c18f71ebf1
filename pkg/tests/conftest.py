import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import oracle  # noqa: E402
from streamplan.artobj import ChainConfig, make_domain  # noqa: E402


def oracle_chain(problem, cfg: ChainConfig, state=None) -> oracle.Chain:
    return oracle.chain_from_state(problem.init if state is None else state, cfg.n_joints, cfg.angle_step_deg,
                                   cfg.rotation_increments_deg, cfg.use_macros)


def oracle_verdict(problem, cfg: ChainConfig, steps):
    verdict, failing, _ = oracle.simulate(oracle_chain(problem, cfg), steps, oracle.goal_angles(problem.goal.literals))
    return verdict, failing


@pytest.fixture(params=[False, True], ids=["no-macro", "macro"])
def chain_cfg(request) -> ChainConfig:
    return ChainConfig(use_macros=request.param)


@pytest.fixture
def macro_cfg() -> ChainConfig:
    return ChainConfig(use_macros=True)


@pytest.fixture
def nomacro_cfg() -> ChainConfig:
    return ChainConfig(use_macros=False)


@pytest.fixture
def domain_of():
    return make_domain


def pytest_terminal_summary(terminalreporter):
    import report

    if not report.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, 11):
        terminalreporter.write_line(report.line(n) if n in report.RESULTS else f"criterion {n:2d}: FAIL  not run")
