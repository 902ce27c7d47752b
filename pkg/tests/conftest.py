import numpy as np
import pytest

from afrelay.channel import CorrelationParams, build_model, load_preset
from afrelay.objective import PowerBudget

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture(scope="session")
def preset():
    return load_preset("paper-4x4")


@pytest.fixture(scope="session")
def budget():
    return PowerBudget(4.0, 4.0)


@pytest.fixture(scope="session")
def ref_model(preset):
    """Preset channels with alpha=0.5, beta=0.4, sigma_e2=0.01, 30 dB / 20 dB."""
    return build_model(*preset, CorrelationParams(0.5, 0.4, 0.01), 30.0, 20.0, 4.0, 4.0)


@pytest.fixture
def report():
    """Record a one-line acceptance verdict, shown in the terminal summary."""

    def _report(name, passed, detail=""):
        line = f"{name}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
