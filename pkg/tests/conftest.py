import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from qrobot import EnvironmentSpec, KernelSpec, SystemParams, build_step_operator  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def operators():
    """Build each operator once per session."""
    cache = {}

    def get(L, N, kernel=None, gamma=0.0, delta=1.0):
        kernel = kernel or KernelSpec()
        key = (L, N, kernel, gamma, delta)
        if key not in cache:
            env = EnvironmentSpec("hopping", gamma, delta) if gamma else EnvironmentSpec()
            cache[key] = build_step_operator(SystemParams(L, N), kernel, env)
        return cache[key]

    return get


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
