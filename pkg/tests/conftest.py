from __future__ import annotations

import json
import textwrap
from email.message import EmailMessage
from pathlib import Path

import pytest
import yaml

from gradepipe import faults
from gradepipe.cli import Pipeline
from gradepipe.config import load_config

CONTACT = "course-help@uni.email.address"

ROSTER_CSV = """\
student_id,name,site,addresses
s001,Neil O'Brien,S,neil@uni.email.address;neil.alt@uni.email.address
s002,Ada Wong,S,ada@uni.email.address
s003,Kim Lee,M,kim@usmc.email.address
"""

PASS_REPORT = {
    "schema_version": 1,
    "status": "ok",
    "questions": [
        {"name": "test_distance", "passed": True, "traceback": ""},
        {"name": "test_geometric_mean", "passed": True, "traceback": ""},
        {"name": "test_pyramid_volume", "passed": True, "traceback": ""},
    ],
    "style_error_count": 0,
    "duration_s": 0.01,
}

FAIL_TRACEBACK = textwrap.dedent(
    """\
    def test_pyramid_volume():

        # does this also work if arguments are integers?
    >   assert abs(s.pyramid_volume(1, 1) - 1. / 3.) < eps
    E   assert 0.3333333333333333 < 1e-14"""
)

FAIL_REPORT = {
    "schema_version": 1,
    "status": "ok",
    "questions": [
        {"name": "test_distance", "passed": True, "traceback": ""},
        {"name": "test_geometric_mean", "passed": True, "traceback": ""},
        {"name": "test_pyramid_volume", "passed": False, "traceback": FAIL_TRACEBACK},
    ],
    "style_error_count": 0,
    "duration_s": 0.01,
}

SYNTAX_REPORT = {
    "schema_version": 1,
    "status": "syntax_error",
    "questions": [],
    "style_error_count": 0,
    "duration_s": 0.01,
    "detail": "SyntaxError: unmatched ')' (lab4.py, line 2)",
}


@pytest.fixture(autouse=True)
def _disarm_faults():
    yield
    faults.disarm_all()


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


def write_course(
    base: Path,
    cpu_seconds: int = 5,
    extra_assignments: list[dict] | None = None,
    extra_runners: dict | None = None,
) -> Path:
    """Lay out a complete course directory and return the config path."""
    (base / "inbox").mkdir(parents=True, exist_ok=True)
    (base / "outbox").mkdir(exist_ok=True)
    (base / "dropbox").mkdir(exist_ok=True)
    (base / "roster.csv").write_text(ROSTER_CSV)

    suite = base / "suites" / "lab4"
    replies = suite / "replies"
    replies.mkdir(parents=True, exist_ok=True)
    (replies / "default.json").write_text(json.dumps(PASS_REPORT))
    (replies / "allpass.json").write_text(json.dumps(PASS_REPORT))
    (replies / "onefail.json").write_text(json.dumps(FAIL_REPORT))
    (replies / "syntax.json").write_text(json.dumps(SYNTAX_REPORT))

    assignments = [
        {
            "key": "lab 4",
            "kind": "laboratory",
            "required_files": ["lab4.py"],
            "suite": "lab4",
            "runner": "fixture",
            "deadlines": {
                "S": "2014-11-14 16:00:00",
                "M": "2014-11-21 16:00:00",
            },
            "questions": [
                {"name": "test_distance", "weight": 1},
                {"name": "test_geometric_mean", "weight": 1},
                {"name": "test_pyramid_volume", "weight": 1},
            ],
        },
        {
            "key": "training 1",
            "kind": "training",
            "required_files": ["training1.py"],
            "suite": "lab4",
            "runner": "fixture",
            "questions": [
                {"name": "test_distance", "weight": 1},
                {"name": "test_geometric_mean", "weight": 1},
                {"name": "test_pyramid_volume", "weight": 1},
            ],
        },
    ]
    assignments.extend(extra_assignments or [])
    manifest = {"schema_version": 1, "assignments": assignments}
    (base / "assignments.yaml").write_text(yaml.safe_dump(manifest))

    config = {
        "schema_version": 1,
        "course": "ABC",
        "year": 2014,
        "contact": CONTACT,
        "admin_address": "admin@uni.email.address",
        "timezone": "Europe/London",
        "root": ".",
        "inbox": "inbox",
        "dropbox": "dropbox",
        "suites": "suites",
        "roster": "roster.csv",
        "manifest": "assignments.yaml",
        "transport": {"kind": "filedrop", "dir": "outbox"},
        "sandbox": {
            "cpu_seconds": cpu_seconds,
            "address_space_mib": 512,
            "file_size_mib": 5,
            "open_files": 64,
        },
        "policies": {"late": "record_zero", "stale_lock_minutes": 5},
    }
    if extra_runners:
        config["runners"] = extra_runners
    path = base / "course.yaml"
    path.write_text(yaml.safe_dump(config))
    return path


@pytest.fixture
def course(tmp_path):
    config_path = write_course(tmp_path)
    return load_config(config_path)


@pytest.fixture
def pipeline(course):
    return Pipeline.from_config(course)


def make_email(
    sender: str,
    subject: str,
    attachments: dict[str, bytes],
    date: str = "Fri, 14 Nov 2014 10:00:00 +0000",
) -> bytes:
    msg = EmailMessage()
    msg["From"] = sender
    msg["Subject"] = subject
    msg["Date"] = date
    msg.set_content("submission attached")
    for name, data in attachments.items():
        msg.add_attachment(
            data, maintype="text", subtype="x-python", filename=name
        )
    return bytes(msg)


def drop_email(inbox: Path, name: str, raw: bytes) -> Path:
    path = inbox / name
    path.write_bytes(raw)
    return path


STUDENT_PASS = b"# reply: allpass\ndef f():\n    pass\n"
STUDENT_FAIL = b"# reply: onefail\ndef f():\n    pass\n"
STUDENT_SYNTAX = b"# reply: syntax\ndef f(:\n"
