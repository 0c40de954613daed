import numpy as np
import pytest

from asym_sim.config import load_config
from asym_sim.fluid import FluidScenario
from asym_sim.model import KernelSpec, UpdateWeights


def appendix_scenario(rho: float = 0.0, beta: float = 0.93, alpha: float = 0.05) -> FluidScenario:
    """Single-prejudice two-influencer benchmark: z=0.4, x=(0,1), f=(0.3,0.7), linear feedback."""
    return FluidScenario.build([0.0, 1.0], [0.3, 0.7], z=0.4, weights=UpdateWeights(alpha, beta),
                               kernels=KernelSpec(rho=rho), initial_pi=[0.5, 0.5])


def symmetric_scenario(rho: float = 0.0, density=None) -> FluidScenario:
    kw = {"density": density} if density is not None else {"z": 0.5}
    return FluidScenario.build([0.0, 1.0], [0.5, 0.5], weights=UpdateWeights(0.05, 0.93),
                               kernels=KernelSpec(rho=rho), initial_pi=[0.5, 0.5], **kw)


@pytest.fixture
def appendix_cfg():
    return load_config("appendixD")


@pytest.fixture
def small_cfg():
    """Two-dimensional default scenario at toy size."""
    return load_config("default").with_overrides({"population.n_users": 200, "run.n_iter": 2000})


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: dict[int, str] = {}


def report(number: int, ok: bool, detail: str) -> bool:
    """Record and print one acceptance line; returns ``ok`` for the caller's assert."""
    line = f"CRITERION {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
