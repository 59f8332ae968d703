import pytest

from hfsemi.rng import SeedSpec

MASTER = 20240101


@pytest.fixture
def seed():
    return SeedSpec(MASTER)


def pytest_configure(config):
    config.addinivalue_line("markers", "property: invariant and property checks")


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
