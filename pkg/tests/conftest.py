import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cfmmw.config import PROFILES, SimConfig

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def desk() -> SimConfig:
    return SimConfig(**PROFILES["desk"])


@pytest.fixture(scope="session")
def small() -> SimConfig:
    """A fast toy network that still has K > L."""
    return SimConfig(M=6, K=6, N=8, L=2, tau_p=4, n_mc=20, n_mc_min=5)


@pytest.fixture(scope="session")
def prepared(desk):
    from cfmmw.harness import DiscardedDrop, prepare_drop
    for seed in range(20):
        try:
            return prepare_drop(desk, seed)
        except DiscardedDrop:
            continue
    raise RuntimeError("no usable drop")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report_line():
    """Record one PASS/FAIL line; the lines are repeated in the terminal summary."""
    def record(number: int, ok: bool, text: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} [{number}] {text}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("[")[1].split("]")[0])):
            terminalreporter.write_line(line)
