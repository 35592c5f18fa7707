"""Running the instructor suite against an imported student module.

The suite is an ordinary file of ``test_*`` functions built from assert
statements; within a question, execution stops at the first failing
criterion, so the student sees exactly one problem at a time. The
framework's traceback (source lines, the ``>`` marker, ``E`` detail
lines) is captured verbatim for the feedback email, minus the absolute
paths of the testing host.
"""

from __future__ import annotations

import json
import os
import re
import sys
from dataclasses import dataclass
from pathlib import Path

from .loader import SuiteError

_LOCATION_LINE = re.compile(r"^\S.*:\d+:( .*)?$")


@dataclass(frozen=True)
class SuiteSpec:
    suite_id: str
    module_filename: str
    tests_filename: str
    checker_version: str | None = None
    style_ignore: tuple[str, ...] = ()

    @classmethod
    def load(cls, sandbox: Path) -> "SuiteSpec":
        path = sandbox / "suite.json"
        if not path.exists():
            raise SuiteError(f"no suite.json in {sandbox}")
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise SuiteError(f"suite.json is not valid JSON: {exc}") from exc
        if doc.get("schema_version") != 1:
            raise SuiteError(
                f"suite.json has unsupported schema_version "
                f"{doc.get('schema_version')!r}"
            )
        style = doc.get("style") or {}
        try:
            return cls(
                suite_id=doc["suite_id"],
                module_filename=doc["module"],
                tests_filename=doc["tests"],
                checker_version=style.get("checker_version"),
                style_ignore=tuple(style.get("ignore", ())),
            )
        except KeyError as exc:
            raise SuiteError(f"suite.json is missing key {exc}") from exc


@dataclass(frozen=True)
class QuestionOutcome:
    name: str
    passed: bool
    traceback_text: str


class _ResultCollector:
    """Pytest plugin: per-test outcome plus the rendered failure text."""

    def __init__(self) -> None:
        self.outcomes: list[QuestionOutcome] = []
        self.broken: list[str] = []

    def pytest_runtest_logreport(self, report) -> None:
        name = report.nodeid.split("::")[-1]
        if report.when == "call":
            text = "" if report.passed else str(report.longrepr)
            self.outcomes.append(QuestionOutcome(name, report.passed, text))
        elif report.when in ("setup", "teardown") and report.failed:
            self.broken.append(f"{name}: {report.longrepr}")

    def pytest_collectreport(self, report) -> None:
        if report.failed:
            self.broken.append(str(report.longrepr))


def run_suite(sandbox: Path, spec: SuiteSpec) -> list[QuestionOutcome]:
    """Collect and run the suite's test functions in definition order."""
    os.environ.setdefault("PYTEST_DISABLE_PLUGIN_AUTOLOAD", "1")
    import pytest

    tests_path = sandbox / spec.tests_filename
    if not tests_path.exists():
        raise SuiteError(f"suite tests file {spec.tests_filename} is missing")
    collector = _ResultCollector()
    try:
        exit_code = pytest.main(
            [str(tests_path), "-q", "-p", "no:cacheprovider"],
            plugins=[collector],
        )
    finally:
        # allow a later run to import a same-named suite from another path
        sys.modules.pop(tests_path.stem, None)
    if collector.broken:
        raise SuiteError("suite did not run cleanly: " + "; ".join(collector.broken))
    if exit_code not in (0, 1):  # 1 = tests failed, still a completed run
        raise SuiteError(f"test framework exited with code {exit_code}")
    return [
        QuestionOutcome(o.name, o.passed, scrub_traceback(o.traceback_text, sandbox))
        for o in collector.outcomes
    ]


def scrub_traceback(text: str, sandbox: Path) -> str:
    """Strip host paths from a failure rendering.

    Students should never learn the file-system layout of the testing
    machine, so the trailing "file:line: Error" locator and any absolute
    sandbox prefixes are removed.
    """
    if not text:
        return text
    lines = text.rstrip("\n").splitlines()
    while lines and _LOCATION_LINE.match(lines[-1]):
        lines.pop()
        while lines and not lines[-1].strip():
            lines.pop()
    cleaned = "\n".join(lines)
    cleaned = cleaned.replace(str(sandbox) + os.sep, "")
    return cleaned.replace(str(sandbox), "")
