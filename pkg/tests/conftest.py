import math

import numpy as np
import pytest

from rymflow.grid import build_background
from rymflow.state import FlowState

SQRT_8PI = math.sqrt(8.0 * math.pi)


@pytest.fixture(scope="session")
def torus64():
    return build_background("torus", 64)


@pytest.fixture(scope="session")
def torus32():
    return build_background("torus", 32)


@pytest.fixture(scope="session")
def sphere32():
    return build_background("sphere", (32, 64))


@pytest.fixture(scope="session")
def sphere16():
    return build_background("sphere", (16, 32))


def const_state(bg, u=0.0, psi=0.0, t=0.0):
    return FlowState(bg, np.full(bg.shape, float(u)), np.full(bg.shape, float(psi)), t)


# acceptance tests report "criterion N: PASS|FAIL ..." lines through this
# fixture; they are repeated in the terminal summary


def pytest_configure(config):
    config.acceptance_lines = []


@pytest.fixture
def verdict(request):
    lines = request.config.acceptance_lines

    def record(n, ok, detail):
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}"
        lines.append(line)
        print(line)
        assert ok, line

    return record


def _criterion_key(line):
    tag = line.split()[1].rstrip(":")
    return int("".join(ch for ch in tag if ch.isdigit())), tag


def pytest_terminal_summary(terminalreporter, config):
    if config.acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(config.acceptance_lines, key=_criterion_key):
            terminalreporter.write_line(line)
