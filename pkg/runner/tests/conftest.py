from __future__ import annotations

import shutil
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"
STUDENTS = FIXTURES / "students"


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(name): acceptance criterion this test implements"
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when != "call":
        return
    marker = item.get_closest_marker("criterion")
    if marker:
        status = "PASS" if report.passed else "FAIL"
        item.config.pluginmanager.get_plugin("terminalreporter").write_line(
            f"ACCEPTANCE {status}: {marker.args[0]} [{item.name}]"
        )


def build_sandbox(tmp_path: Path, suite: str, student: str | None,
                  student_name: str = "training1.py") -> Path:
    """Copy a fixture suite and one student file into a fresh sandbox."""
    sandbox = tmp_path / "sandbox"
    sandbox.mkdir()
    for entry in (FIXTURES / suite).iterdir():
        if entry.is_dir():
            shutil.copytree(entry, sandbox / entry.name)
        else:
            shutil.copy2(entry, sandbox / entry.name)
    if student is not None:
        shutil.copy2(STUDENTS / student, sandbox / student_name)
    return sandbox
