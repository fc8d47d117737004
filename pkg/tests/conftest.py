import numpy as np
import pytest

from fwm_filter.pipeline import PipelineSetup
from fwm_filter.pulses import TimeGrid
from fwm_filter.spectra import FilterParams, calibrated_drives, calibrated_scheme


@pytest.fixture(scope="session")
def setup():
    """Calibrated resonant filter on the default pulse grid (FWM spectrum cached)."""
    s = PipelineSetup(calibrated_scheme(), calibrated_drives(),
                      FilterParams(alpha=6.0, gamma=2 * np.pi * 3.0), TimeGrid())
    s.chi3()
    return s


_ACCEPTANCE: list[str] = []


@pytest.fixture
def criterion():
    """Record one acceptance line, print it, then assert it."""

    def check(number: int, ok: bool, detail: str):
        line = f"{'PASS' if ok else 'FAIL'}  criterion {number}: {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
