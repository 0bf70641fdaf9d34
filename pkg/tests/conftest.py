import pytest

from ruinlab.claims import Exponential
from ruinlab.process import ModelParams

# (criterion, passed, detail) collected by the acceptance module
ACCEPTANCE_LINES: list = []


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: Monte Carlo tests taking more than a few seconds")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in sorted(ACCEPTANCE_LINES, key=lambda r: r[0]):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


@pytest.fixture
def exp_params():
    return ModelParams(x=0.0, sigma=0.5, lam=1.0, claim=Exponential(1.0), c=1.5)
