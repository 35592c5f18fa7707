"""Derived outputs over the results store: summaries, reminders,
spreadsheet export, submission statistics, and exam pre-marking."""

from __future__ import annotations

import csv
import logging
import random
import re
import shutil
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

from .config import CourseConfig
from .messages import OutboundMessage, SummaryLine, render_message
from .model import (
    AssignmentKind,
    AssignmentSpec,
    MessageCategory,
    ReportStatus,
    Student,
    format_instant,
    utcnow,
)
from .scoring import compute_average, compute_lateness, format_lateness
from .stats import submission_histogram, submission_timelines
from .store import ResultsStore

logger = logging.getLogger(__name__)


def _labs_with_passed_deadline(
    config: CourseConfig, student: Student, as_of: datetime
) -> list[AssignmentSpec]:
    due = []
    for spec in config.manifest.values():
        if spec.kind is not AssignmentKind.LABORATORY:
            continue
        deadline = spec.deadlines.get(student.site)
        if deadline is not None and deadline <= as_of:
            due.append((deadline, spec))
    return [spec for _, spec in sorted(due, key=lambda pair: pair[0])]


def current_recorded_mark(
    config: CourseConfig, store: ResultsStore, student: Student, spec: AssignmentSpec
) -> tuple[int, SummaryLine] | None:
    """The grade that counts for one (student, lab), with its summary row.

    Under the record_zero late policy a late recorded submission counts
    as 0; the stored mark itself is untouched so the actual score stays
    auditable.
    """
    mark = store.recorded_mark(student.student_id, spec.subject_key)
    if mark is None:
        return None
    submission = store.submissions.get(mark.submission_id)
    deadline = spec.deadlines.get(student.site)
    late_by = None
    submitted_local = None
    if submission is not None and deadline is not None:
        delta = compute_lateness(deadline, submission.received_at)
        if delta is not None:
            late_by = format_lateness(delta)
            submitted_local = config.local(submission.received_at).replace(tzinfo=None)
    value = mark.percent
    if late_by is not None and config.late_policy.value == "record_zero":
        value = 0
    line = SummaryLine(
        assignment_key=spec.subject_key,
        mark=value,
        late_by=late_by,
        submitted_at_local=submitted_local,
    )
    return value, line


def weekly_summary(
    config: CourseConfig,
    store: ResultsStore,
    student_id: str,
    as_of: datetime | None = None,
) -> OutboundMessage:
    """Listing of marks for every lab whose deadline has passed, plus the
    running average; students with no submissions at all get a reminder."""
    as_of = as_of or utcnow()
    student = config.roster[student_id]
    has_submissions = any(
        s.student_id == student_id for s in store.submissions.values()
    )
    lines: list[SummaryLine] = []
    marks: list[int] = []
    if has_submissions:
        for spec in _labs_with_passed_deadline(config, student, as_of):
            current = current_recorded_mark(config, store, student, spec)
            if current is None:
                lines.append(SummaryLine(spec.subject_key, 0, missing=True))
                marks.append(0)
            else:
                value, line = current
                lines.append(line)
                marks.append(value)
    context = {
        "recipients": [student.primary_address],
        "contact": config.contact,
        "name": student.display_name,
        "course_code": config.course_code,
        "as_of_local": config.local(as_of).replace(tzinfo=None),
        "lines": lines,
        "average": compute_average(marks) if marks else None,
        "has_submissions": has_submissions,
    }
    return render_message(MessageCategory.WEEKLY_SUMMARY, context)


def missing_submission_scan(
    config: CourseConfig,
    store: ResultsStore,
    as_of: datetime | None = None,
) -> list[OutboundMessage]:
    """One reminder per enrolled student who has submitted nothing for any
    assignment whose deadline (at their site) has passed."""
    as_of = as_of or utcnow()
    reminders = []
    for student in sorted(config.roster.values(), key=lambda s: s.student_id):
        overdue = _labs_with_passed_deadline(config, student, as_of)
        if not overdue:
            continue
        if any(
            store.accepted_count(student.student_id, spec.subject_key) > 0
            for spec in overdue
        ):
            continue
        reminders.append(
            render_message(
                MessageCategory.REMINDER,
                {
                    "recipients": [student.primary_address],
                    "contact": config.contact,
                    "name": student.display_name,
                    "course_code": config.course_code,
                },
            )
        )
    return reminders


def export_marks_csv(
    config: CourseConfig,
    store: ResultsStore,
    out_path: Path,
    assignment_key: str | None = None,
) -> Path:
    """Current recorded mark per (student, assignment), RFC-4180 quoted."""
    rows = []
    for student in config.roster.values():
        for spec in config.manifest.values():
            if assignment_key and spec.subject_key != assignment_key:
                continue
            current = current_recorded_mark(config, store, student, spec)
            if current is None:
                continue
            value, line = current
            rows.append((
                student.student_id,
                student.display_name,
                spec.subject_key,
                value,
                "late" if line.late_by else "on_time",
            ))
    rows.sort(key=lambda r: (r[2], r[0]))
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["student_id", "name", "assignment", "mark", "timeliness"])
        writer.writerows(rows)
    return out_path


def stats_bundle(
    config: CourseConfig,
    store: ResultsStore,
    out_dir: Path,
    assignment_key: str | None = None,
) -> list[Path]:
    """Emit plot-ready CSVs: per-assignment histogram, unique and
    non-unique timelines, and deadline annotations from the manifest."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    specs = [
        spec
        for spec in config.manifest.values()
        if assignment_key is None or spec.subject_key == assignment_key
    ]
    event_log = [
        (s.student_id, s.assignment_key) for s in store.submission_log()
    ]
    for spec in specs:
        slug_dir = out_dir / spec.slug
        slug_dir.mkdir(exist_ok=True)
        bins = submission_histogram(event_log, spec.subject_key)
        path = slug_dir / "histogram.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["submission_count", "students"])
            writer.writerows(sorted(bins.items()))
        written.append(path)

        events = [
            (s.received_at, s.student_id)
            for s in store.submission_log(spec.subject_key)
        ]
        unique, nonunique = submission_timelines(events)
        for series, stem in ((unique, "timeline_unique"), (nonunique, "timeline_nonunique")):
            path = slug_dir / f"{stem}.csv"
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["timestamp", "cumulative"])
                writer.writerows(
                    (format_instant(instant), count) for instant, count in series
                )
            written.append(path)

        path = slug_dir / "annotations.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["kind", "label", "site", "timestamp"])
            for site, deadline in sorted(spec.deadlines.items()):
                writer.writerow(
                    ["deadline", spec.subject_key, site, format_instant(deadline)]
                )
        written.append(path)
    return written


def render_stats_plots(out_dir: Path) -> list[Path]:
    """Optional thin rendering step over the stats CSVs; needs matplotlib."""
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        logger.warning("matplotlib is not installed; skipping plot rendering")
        return []
    rendered = []
    for histogram in sorted(out_dir.glob("*/histogram.csv")):
        slug_dir = histogram.parent
        with open(histogram, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if rows:
            fig, ax = plt.subplots()
            ax.bar(
                [int(r["submission_count"]) for r in rows],
                [int(r["students"]) for r in rows],
            )
            ax.set_xlabel("submissions per student")
            ax.set_ylabel("students")
            ax.set_title(slug_dir.name)
            fig.savefig(slug_dir / "histogram.png")
            plt.close(fig)
            rendered.append(slug_dir / "histogram.png")
        fig, ax = plt.subplots()
        for stem in ("timeline_unique", "timeline_nonunique"):
            with open(slug_dir / f"{stem}.csv", newline="") as fh:
                series = list(csv.DictReader(fh))
            if not series:
                continue
            xs = [datetime.strptime(r["timestamp"], "%Y-%m-%dT%H:%M:%SZ") for r in series]
            ys = [int(r["cumulative"]) for r in series]
            ax.step(xs, ys, where="post", label=stem.removeprefix("timeline_"))
        ax.legend()
        ax.set_ylabel("cumulative submissions")
        ax.set_title(slug_dir.name)
        fig.autofmt_xdate()
        fig.savefig(slug_dir / "timelines.png")
        plt.close(fig)
        rendered.append(slug_dir / "timelines.png")
    return rendered


# -- exam pre-marking ---------------------------------------------------------


def premark_batch(
    config: CourseConfig,
    batch_dir: Path,
    assignment_key: str,
    out_dir: Path,
) -> Path:
    """Grade a directory of offline-collected file sets, one subdirectory
    per student, without email and without touching recorded grades.

    With no suite configured the batch runs in receive-only mode: each
    submission is logged with its timestamp and no marks are produced.
    Failures for one student are noted in errors.txt and do not stop the
    batch. Returns the path of the marks CSV.
    """
    from .testexec import (
        SandboxError,
        TestJob,
        preflight_checks,
        prepare_sandbox,
        run_sandboxed,
    )
    from .scoring import apply_style_penalty, compute_assignment_mark

    spec = config.manifest.get(assignment_key)
    if spec is None:
        raise ValueError(f"unknown assignment {assignment_key!r}")
    out_dir.mkdir(parents=True, exist_ok=True)
    marks_path = out_dir / "marks.csv"
    errors: list[str] = []
    rows: list[tuple[str, str]] = []

    suite_dir = config.suites_dir / spec.suite_id if spec.suite_id else None
    receive_only = suite_dir is None or not suite_dir.exists()

    student_dirs = sorted(p for p in batch_dir.iterdir() if p.is_dir()) \
        if batch_dir.exists() else []
    for student_dir in student_dirs:
        student_id = student_dir.name
        files = sorted(p for p in student_dir.iterdir() if p.is_file())
        if receive_only:
            newest = max((f.stat().st_mtime for f in files), default=0)
            received = datetime.fromtimestamp(newest, tz=config.timezone)
            rows.append((student_id, "RECEIVED",
                         received.strftime("%Y-%m-%d %H:%M:%S")))
            logger.info("receive-only: logged %s at %s", student_id, received)
            continue
        try:
            job = TestJob(
                item_id=f"premark-{spec.slug}-{student_id}",
                submission_id=f"premark-{student_id}",
                student_id=student_id,
                assignment_key=spec.subject_key,
                attempt=1,
                files=tuple(files),
                received_at=format_instant(utcnow()),
            )
            sandbox = prepare_sandbox(job, suite_dir, config.sandbox)
            try:
                problem = preflight_checks([sandbox / f.name for f in files])
                if problem is not None:
                    rows.append((student_id, "ENCODING", problem))
                    continue
                report = run_sandboxed(
                    sandbox, config.runners[spec.runner], config.sandbox,
                    spec.suite_id or "",
                )
            finally:
                report_dir = out_dir / student_id
                report_dir.mkdir(exist_ok=True)
                for name in ("report.json", "stdout.txt", "stderr.txt"):
                    src = sandbox / name
                    if src.exists():
                        shutil.copy2(src, report_dir / name)
                shutil.rmtree(sandbox, ignore_errors=True)
            if report.status is ReportStatus.SYNTAX_ERROR:
                rows.append((student_id, "SYNTAX", ""))
            elif report.status is ReportStatus.RESOURCE_KILLED:
                rows.append((student_id, "KILLED", ""))
            else:
                by_name = {q.name: q.passed for q in report.question_results}
                weighted = [
                    (q.weight, by_name.get(q.name, False)) for q in spec.questions
                ]
                _, _, raw = compute_assignment_mark(weighted)
                percent = apply_style_penalty(
                    raw, report.style_error_count, spec.style_policy, spec.style_base
                )
                rows.append((student_id, str(percent), ""))
        except (SandboxError, OSError, ValueError) as exc:
            errors.append(f"{student_id}: {type(exc).__name__}: {exc}")
            rows.append((student_id, "ERROR", str(exc)))

    with open(marks_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if receive_only:
            writer.writerow(["student_id", "status", "received_at"])
        else:
            writer.writerow(["student_id", "mark", "note"])
        writer.writerows(rows)
    if errors:
        (out_dir / "errors.txt").write_text("\n".join(errors) + "\n")
    return marks_path


# -- anonymized sampling --------------------------------------------------------


def sample_submissions(
    config: CourseConfig,
    store: ResultsStore,
    assignment_key: str,
    out_dir: Path,
    count: int,
    anonymize: bool = True,
    seed: int | None = None,
) -> list[Path]:
    """Copy N randomly chosen submissions for review, stripping roster
    names, addresses, and ids from the file contents when anonymizing."""
    rng = random.Random(seed)
    subs = store.submission_log(assignment_key)
    chosen = rng.sample(subs, min(count, len(subs)))
    needles = []
    if anonymize:
        for student in config.roster.values():
            needles.append(student.display_name)
            needles.append(student.student_id)
            needles.extend(student.email_addresses)
        needles = [n for n in needles if n]
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for index, sub in enumerate(chosen, start=1):
        for ref in sub.files:
            source = Path(ref.path)
            if not source.exists():
                continue
            text = source.read_text(errors="replace")
            if anonymize:
                for needle in needles:
                    text = re.sub(re.escape(needle), "ANON", text, flags=re.IGNORECASE)
            target = out_dir / f"sample{index:02d}_{ref.name}"
            target.write_text(text)
            written.append(target)
    return written


@dataclass(frozen=True)
class InspectResult:
    submission_id: str
    archive_paths: list[str]
    attempts: list[dict]


def inspect_submission(store: ResultsStore, submission_id: str) -> InspectResult | None:
    sub = store.submissions.get(submission_id)
    if sub is None:
        return None
    history = [
        {
            "attempt": m.attempt,
            "percent": m.percent,
            "recorded_for_grade": m.recorded_for_grade,
        }
        for m in store.marks_for(sub.student_id, sub.assignment_key)
    ]
    return InspectResult(
        submission_id=submission_id,
        archive_paths=[f.path for f in sub.files],
        attempts=history,
    )


def replay_matches(store_path: Path, config: CourseConfig, reference_csv: Path) -> bool:
    """Rebuild the derived table from the journal and compare CSV exports."""
    import tempfile

    rebuilt = ResultsStore.open(store_path)
    with tempfile.TemporaryDirectory() as tmp:
        again = Path(tmp) / "replay.csv"
        export_marks_csv(config, rebuilt, again)
        return again.read_bytes() == reference_csv.read_bytes()
