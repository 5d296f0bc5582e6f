import numpy as np
import pytest

from projdyn.projective import power_map, quadratic_family, reciprocal_power_map


@pytest.fixture(scope="session")
def power2():
    return power_map(2)


@pytest.fixture(scope="session")
def power3():
    return power_map(3)


@pytest.fixture(scope="session")
def basilica():
    return quadratic_family(-1.0, 0.0)


@pytest.fixture(scope="session")
def recip2():
    return reciprocal_power_map(2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter, config):
    lines = config.__dict__.get("_acceptance_lines")
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
