"""Acceptance suite for the runner: the published worked example must
behave end to end, and every report must parse in the pipeline that
launches the runner."""

from __future__ import annotations

import json
import subprocess
import sys

import pytest

from gradepipe_runner.suiteapi import docstring_test

from conftest import STUDENTS, build_sandbox


def run_runner(sandbox):
    return subprocess.run(
        [sys.executable, "-m", "gradepipe_runner",
         "--suite", "training1", "--dir", str(sandbox), "--out", "report.json"],
        capture_output=True,
        text=True,
        cwd=sandbox,
    )


@pytest.mark.criterion("published worked example")
class TestWorkedExample:
    def test_correct_solution_passes_all_questions(self, tmp_path):
        sandbox = build_sandbox(tmp_path, "suite_training1", "training1_correct.py")
        result = run_runner(sandbox)
        assert result.returncode == 0, result.stderr
        report = json.loads((sandbox / "report.json").read_text())
        assert report["status"] == "ok"
        assert [(q["name"], q["passed"]) for q in report["questions"]] == [
            ("test_distance", True),
            ("test_geometric_mean", True),
            ("test_pyramid_volume", True),
        ]

    def test_integer_division_fails_at_integer_criterion(self, tmp_path):
        sandbox = build_sandbox(tmp_path, "suite_training1", "training1_intdiv.py")
        result = run_runner(sandbox)
        assert result.returncode == 0, result.stderr
        report = json.loads((sandbox / "report.json").read_text())
        failed = {q["name"]: q for q in report["questions"]}["test_pyramid_volume"]
        assert not failed["passed"]
        assert "assert 0.3333333333333333 < 1e-14" in failed["traceback"]
        assert "# does this also work if arguments are integers?" in failed["traceback"]

    def test_docstring_check_passes_published_fails_clone(self):
        import importlib.util

        def load(name):
            spec = importlib.util.spec_from_file_location(name, STUDENTS / f"{name}.py")
            module = importlib.util.module_from_spec(spec)
            spec.loader.exec_module(module)
            return module

        documented = load("training1_correct")
        assert docstring_test(documented.pyramid_volume) is True

        undocumented = load("training1_nodoc")
        with pytest.raises(AssertionError):
            docstring_test(undocumented.pyramid_volume)


@pytest.mark.criterion("report schema round-trips in the pipeline parser")
class TestReportRoundTrip:
    @pytest.mark.parametrize(
        "student",
        [
            "training1_correct.py",
            "training1_intdiv.py",
            "training1_nodoc.py",
            "training1_syntax.py",
            "training1_missing_fn.py",
            "training1_import_crash.py",
        ],
    )
    def test_every_fixture_report_parses_losslessly(self, tmp_path, student):
        pytest.importorskip(
            "gradepipe", reason="pipeline package not installed in this env"
        )
        from gradepipe.testexec import parse_report

        sandbox = build_sandbox(tmp_path, "suite_training1", student)
        result = run_runner(sandbox)
        assert result.returncode == 0, result.stderr
        text = (sandbox / "report.json").read_text()
        document = json.loads(text)

        parsed = parse_report(text)
        assert parsed.status.value == document["status"]
        assert len(parsed.question_results) == len(document["questions"])
        for got, want in zip(parsed.question_results, document["questions"]):
            assert got.name == want["name"]
            assert got.passed == want["passed"]
            if not want["passed"]:
                assert got.traceback_text == want["traceback"]
        assert parsed.style_error_count == document["style_error_count"]
        assert parsed.duration_s == document["duration_s"]
        assert parsed.detail == document.get("detail", "")
        assert list(parsed.warnings) == document.get("warnings", [])
