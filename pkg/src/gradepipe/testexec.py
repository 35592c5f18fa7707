"""Testing-queue processing: sandbox, resource limits, scoring, feedback.

Each job is staged into a fresh per-job directory and the runner is
launched as a child process with a scrubbed environment and hard POSIX
resource limits (CPU, address space, file size, open files). A child
that exceeds a limit dies; the job is scored as resource_killed and the
student is invited to re-submit. A wall-clock ceiling of three times the
CPU limit backstops anything the CPU limit cannot catch.
"""

from __future__ import annotations

import json
import logging
import os
import re
import resource
import shutil
import signal
import subprocess
import sys
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from . import faults
from .config import CourseConfig, RunnerConfig, SandboxConfig
from .fsqueue import FsQueue, deterministic_item_id
from .messages import render_message
from .model import (
    AssignmentKind,
    AssignmentSpec,
    MarkRecord,
    MessageCategory,
    QuestionResult,
    ReportStatus,
    SubmissionStatus,
    TestReport,
    parse_instant,
)
from .scoring import apply_style_penalty, compute_assignment_mark, compute_lateness
from .store import ResultsStore

logger = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1

ENCODING_DECLARATION = re.compile(rb"coding[:=]\s*([-\w.]+)")


class SandboxError(Exception):
    """Sandbox staging or the runner contract failed."""


@dataclass(frozen=True)
class TestJob:
    __test__ = False  # keep pytest from collecting this as a test class

    item_id: str
    submission_id: str
    student_id: str
    assignment_key: str
    attempt: int
    files: tuple[Path, ...]
    received_at: str

    @classmethod
    def from_payload(cls, item_id: str, payload: dict) -> "TestJob":
        return cls(
            item_id=item_id,
            submission_id=payload["submission_id"],
            student_id=payload["student_id"],
            assignment_key=payload["assignment_key"],
            attempt=payload["attempt"],
            files=tuple(Path(p) for p in payload["files"]),
            received_at=payload["received_at"],
        )


def preflight_checks(files: list[Path]) -> str | None:
    """Return the name of a file using non-ASCII bytes without declaring
    an encoding in its first two lines, or None when all files are fine."""
    for path in files:
        data = path.read_bytes()
        if all(b < 128 for b in data):
            continue
        head = b"\n".join(data.splitlines()[:2])
        if not ENCODING_DECLARATION.search(head):
            return path.name
    return None


def prepare_sandbox(
    job: TestJob,
    suite_dir: Path | None,
    config: SandboxConfig,
) -> Path:
    """Fresh per-job directory holding only the student files and the suite."""
    sandbox = config.root / job.item_id
    if sandbox.exists():
        shutil.rmtree(sandbox)
    sandbox.mkdir(parents=True)
    for src in job.files:
        if not src.exists():
            raise SandboxError(f"submission file missing from archive: {src}")
        shutil.copy2(src, sandbox / src.name)
    if suite_dir is not None:
        if not suite_dir.exists():
            raise SandboxError(f"suite directory missing: {suite_dir}")
        for entry in suite_dir.iterdir():
            target = sandbox / entry.name
            if entry.is_dir():
                shutil.copytree(entry, target)
            else:
                shutil.copy2(entry, target)
    os.chmod(sandbox, 0o700)
    if config.runner_user:
        _chown_tree(sandbox, config.runner_user)
    return sandbox


def _chown_tree(root: Path, user: str) -> None:
    import pwd

    record = pwd.getpwnam(user)
    for path in [root, *root.rglob("*")]:
        os.chown(path, record.pw_uid, record.pw_gid)


def _child_setup(config: SandboxConfig):
    """Runs in the child between fork and exec: limits, then privileges."""

    def setup() -> None:
        cpu = config.cpu_seconds
        resource.setrlimit(resource.RLIMIT_CPU, (cpu, cpu + 1))
        resource.setrlimit(
            resource.RLIMIT_AS,
            (config.address_space_bytes, config.address_space_bytes),
        )
        resource.setrlimit(
            resource.RLIMIT_FSIZE,
            (config.file_size_bytes, config.file_size_bytes),
        )
        resource.setrlimit(
            resource.RLIMIT_NOFILE, (config.open_files, config.open_files)
        )
        if config.runner_user:
            import pwd

            record = pwd.getpwnam(config.runner_user)
            os.setgroups([])
            os.setgid(record.pw_gid)
            os.setuid(record.pw_uid)

    return setup


def scrubbed_environment(sandbox: Path, config: SandboxConfig) -> dict[str, str]:
    """Only allowlisted variables survive; HOME and TMPDIR point into the
    sandbox so nothing outside it is probed via those paths."""
    env = {
        name: os.environ[name]
        for name in config.env_allowlist
        if name in os.environ
    }
    env["HOME"] = str(sandbox)
    env["TMPDIR"] = str(sandbox)
    return env


def run_sandboxed(
    sandbox: Path,
    runner: RunnerConfig,
    config: SandboxConfig,
    suite_id: str,
) -> TestReport:
    """Launch the runner on a prepared sandbox and parse its report.

    Abnormal termination (signal, wall-clock ceiling, or a nonzero exit
    without the reserved malfunction codes) is classified as
    resource_killed. Exit codes 2 and 3 are reserved for runner
    malfunction and raise instead, so a broken runner never turns into a
    student-visible mark.
    """
    argv = [
        arg.format(
            python=sys.executable,
            sandbox=str(sandbox),
            suite_id=suite_id,
            out=runner.report_name,
        )
        for arg in runner.argv
    ]
    report_path = sandbox / runner.report_name
    if report_path.exists():
        report_path.unlink()
    wall_limit = 3 * config.cpu_seconds
    started = time.monotonic()
    with open(sandbox / "stdout.txt", "wb") as out, \
            open(sandbox / "stderr.txt", "wb") as err:
        proc = subprocess.Popen(
            argv,
            cwd=sandbox,
            env=scrubbed_environment(sandbox, config),
            stdout=out,
            stderr=err,
            stdin=subprocess.DEVNULL,
            start_new_session=True,
            preexec_fn=_child_setup(config),
        )
        try:
            returncode = proc.wait(timeout=wall_limit)
        except subprocess.TimeoutExpired:
            _kill_group(proc)
            duration = time.monotonic() - started
            logger.warning("runner hit the wall-clock ceiling (%ss)", wall_limit)
            return TestReport(
                status=ReportStatus.RESOURCE_KILLED, duration_s=duration
            )
    duration = time.monotonic() - started

    if returncode in (2, 3):
        stderr_tail = (sandbox / "stderr.txt").read_text(errors="replace")[-2000:]
        raise SandboxError(
            f"runner {runner.identifier} malfunctioned (exit {returncode}): "
            f"{stderr_tail}"
        )
    if returncode != 0:
        logger.info("runner terminated abnormally (code %s)", returncode)
        return TestReport(status=ReportStatus.RESOURCE_KILLED, duration_s=duration)
    if not report_path.exists():
        raise SandboxError(
            f"runner {runner.identifier} exited 0 but wrote no {runner.report_name}"
        )
    return parse_report(report_path.read_text(), fallback_duration=duration)


def _kill_group(proc: subprocess.Popen) -> None:
    try:
        os.killpg(proc.pid, signal.SIGKILL)
    except ProcessLookupError:
        pass
    proc.wait()


def parse_report(text: str, fallback_duration: float = 0.0) -> TestReport:
    """Parse a runner report document into a TestReport.

    Schema: {schema_version, status, questions: [{name, passed,
    traceback}], style_error_count, duration_s} with optional detail and
    warnings fields.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SandboxError(f"report is not valid JSON: {exc}") from exc
    if doc.get("schema_version") != REPORT_SCHEMA_VERSION:
        raise SandboxError(
            f"report has unsupported schema_version {doc.get('schema_version')!r}"
        )
    try:
        status = ReportStatus(doc["status"])
        questions = tuple(
            QuestionResult(
                name=q["name"],
                passed=bool(q["passed"]),
                traceback_text=q.get("traceback", "") if not q["passed"] else "",
            )
            for q in doc.get("questions", [])
        )
        return TestReport(
            status=status,
            question_results=questions,
            style_error_count=int(doc.get("style_error_count", 0)),
            duration_s=float(doc.get("duration_s", fallback_duration)),
            detail=str(doc.get("detail", "")),
            warnings=tuple(str(w) for w in doc.get("warnings", [])),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SandboxError(f"report is malformed: {exc}") from exc


class TestProcessor:
    def __init__(self, config: CourseConfig, store: ResultsStore,
                 testing_queue: FsQueue, outgoing_queue: FsQueue):
        self.config = config
        self.store = store
        self.testing_queue = testing_queue
        self.outgoing_queue = outgoing_queue

    # -- scoring and feedback -------------------------------------------------

    def score_and_feedback(
        self,
        job: TestJob,
        report: TestReport,
        spec: AssignmentSpec,
    ) -> tuple[MarkRecord | None, dict]:
        """Turn a report into an optional MarkRecord and one outbound message.

        Only a clean run yields a mark; syntax, resource and encoding
        outcomes invite a re-submission instead, and the invited
        re-submission becomes the graded attempt for a laboratory.
        """
        student = self.config.roster[job.student_id]
        name = student.display_name
        recipients = [student.primary_address]
        base_context = {
            "recipients": recipients,
            "contact": self.config.contact,
            "name": name,
            "assignment_key": spec.subject_key,
        }
        if report.status is ReportStatus.SYNTAX_ERROR:
            context = dict(base_context, reason="syntax", detail=report.detail)
            return None, dict(kind=MessageCategory.INVITE, context=context,
                              status=SubmissionStatus.INVALID_SYNTAX)
        if report.status is ReportStatus.RESOURCE_KILLED:
            context = dict(base_context, reason="resource")
            return None, dict(kind=MessageCategory.INVITE, context=context,
                              status=SubmissionStatus.KILLED)
        if report.status is ReportStatus.ENCODING_UNDECLARED:
            context = dict(base_context, reason="encoding", filename=report.detail)
            return None, dict(kind=MessageCategory.INVITE, context=context,
                              status=SubmissionStatus.ACCEPTED)

        by_name = {q.name: q for q in report.question_results}
        rows = []
        failures = []
        weighted = []
        terms = []
        for question in spec.questions:
            result = by_name.get(
                question.name, QuestionResult(question.name, False, "no result reported")
            )
            rows.append((question.name, result.passed))
            weighted.append((question.weight, result.passed))
            terms.append(question.weight if result.passed else Fraction(0))
            if not result.passed:
                failures.append((question.name, result.traceback_text))
        points, total, raw_percent = compute_assignment_mark(weighted)
        percent = apply_style_penalty(
            raw_percent, report.style_error_count, spec.style_policy, spec.style_base
        )
        received_at = parse_instant(job.received_at)
        deadline = spec.deadlines.get(student.site)
        late = bool(deadline and compute_lateness(deadline, received_at))
        recorded = (
            spec.kind is AssignmentKind.LABORATORY
            and not self.store.has_tested(job.student_id, spec.subject_key)
        )
        mark = MarkRecord(
            submission_id=job.submission_id,
            student_id=job.student_id,
            assignment_key=spec.subject_key,
            attempt=job.attempt,
            points=points,
            total=total,
            percent=percent,
            recorded_for_grade=recorded,
            late=late,
        )
        style_errors = (
            report.style_error_count
            if spec.style_policy.value == "penalize"
            else 0
        )
        context = dict(
            base_context,
            rows=rows,
            points=points,
            total=total,
            percent=percent,
            terms=terms,
            failures=failures,
            style_errors=style_errors,
        )
        return mark, dict(kind=MessageCategory.FEEDBACK, context=context,
                          status=SubmissionStatus.TESTED)

    # -- the queue pass -----------------------------------------------------------

    def process_testing_queue(self) -> dict:
        summary = {"tested": 0, "failed": 0, "skipped": False}
        lock = self.testing_queue.acquire_lock()
        if lock is None:
            summary["skipped"] = True
            return summary
        try:
            # snapshot: jobs arriving during the pass wait for the next tick
            for item in self.testing_queue.list_items():
                try:
                    job = TestJob.from_payload(item.item_id, item.payload)
                    self._run_job(job)
                except faults.InjectedCrash:
                    raise
                except Exception as exc:
                    logger.exception("job %s failed", item.item_id)
                    summary["failed"] += 1
                    flagged = self.testing_queue.record_failure(
                        item.item_id, f"{type(exc).__name__}: {exc}"
                    )
                    if flagged:
                        self._admin_alert(
                            f"test job {item.item_id} flagged after repeated failures",
                            f"{type(exc).__name__}: {exc}",
                        )
                    continue
                summary["tested"] += 1
        finally:
            self.testing_queue.release_lock(lock)
        return summary

    def _run_job(self, job: TestJob) -> None:
        spec = self.config.manifest.get(job.assignment_key)
        if spec is None:
            raise SandboxError(f"job names unknown assignment {job.assignment_key!r}")
        runner = self.config.runners[spec.runner]
        suite_dir = (
            self.config.suites_dir / spec.suite_id if spec.suite_id else None
        )
        sandbox = prepare_sandbox(job, suite_dir, self.config.sandbox)
        try:
            encoding_problem = preflight_checks(
                [sandbox / p.name for p in job.files]
            )
            if encoding_problem is not None:
                report = TestReport(
                    status=ReportStatus.ENCODING_UNDECLARED, detail=encoding_problem
                )
            else:
                report = run_sandboxed(
                    sandbox, runner, self.config.sandbox, spec.suite_id or ""
                )
            self._archive_run(job, sandbox)
            mark, feedback = self.score_and_feedback(job, report, spec)
            if mark is not None:
                self.store.add_mark(mark)
            if feedback["status"] is not SubmissionStatus.ACCEPTED:
                self.store.set_status(job.submission_id, feedback["status"])
            faults.fire("testexec:after_persist_results")
            message = render_message(feedback["kind"], feedback["context"])
            feedback_id = deterministic_item_id(
                parse_instant(job.received_at), f"f{job.submission_id[-5:]}"
            )
            self.outgoing_queue.enqueue(
                "outbound_message", message.to_payload(), feedback_id
            )
            faults.fire("testexec:after_enqueue_feedback")
            self.testing_queue.remove(job.item_id)
        finally:
            shutil.rmtree(sandbox, ignore_errors=True)

    def _archive_run(self, job: TestJob, sandbox: Path) -> None:
        """Keep the report, the captured output, and testing logs."""
        archive = (
            self.config.root / "archive" / "runs"
            / job.submission_id / str(job.attempt)
        )
        archive.mkdir(parents=True, exist_ok=True)
        for name in ("report.json", "stdout.txt", "stderr.txt"):
            src = sandbox / name
            if src.exists():
                shutil.copy2(src, archive / name)

    def _admin_alert(self, summary: str, detail: str = "") -> None:
        message = render_message(
            MessageCategory.ADMIN_ALERT,
            {
                "recipients": [self.config.admin_address],
                "contact": self.config.contact,
                "summary": summary,
                "detail": detail,
            },
        )
        self.outgoing_queue.enqueue("outbound_message", message.to_payload())
