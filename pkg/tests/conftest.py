import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from marineseg.geometry import CalibrationResult, CameraIntrinsics  # noqa: E402


@pytest.fixture
def intr() -> CameraIntrinsics:
    return CameraIntrinsics(fx=740.0, fy=740.0, cx=638.5, cy=478.5, width=1278, height=958)


@pytest.fixture
def calib() -> CalibrationResult:
    return CalibrationResult.identity()


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE

    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, summary = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {summary}")
