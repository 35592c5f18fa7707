"""Core domain types shared by all processors."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from fractions import Fraction


class AssignmentKind(str, Enum):
    TRAINING = "training"
    LABORATORY = "laboratory"
    EXAM = "exam"


class StylePolicy(str, Enum):
    OFF = "off"
    PENALIZE = "penalize"


class LatePolicy(str, Enum):
    RECORD_ZERO = "record_zero"
    RECORD_ACTUAL = "record_actual"


class SubmissionStatus(str, Enum):
    ACCEPTED = "accepted"
    REJECTED = "rejected"
    TESTED = "tested"
    INVALID_SYNTAX = "invalid_syntax"
    KILLED = "killed"


class ReportStatus(str, Enum):
    OK = "ok"
    SYNTAX_ERROR = "syntax_error"
    RESOURCE_KILLED = "resource_killed"
    ENCODING_UNDECLARED = "encoding_undeclared"


class MessageCategory(str, Enum):
    RECEIPT = "receipt"
    REJECTION = "rejection"
    FEEDBACK = "feedback"
    INVITE = "invite"
    WEEKLY_SUMMARY = "weekly_summary"
    REMINDER = "reminder"
    ADMIN_ALERT = "admin_alert"


@dataclass(frozen=True)
class Student:
    """One enrolled student.

    ``site`` selects the deadline group (e.g. "S" or "M" for two campuses
    teaching to different schedules). Addresses keep their roster order;
    the first one is where replies go.
    """

    student_id: str
    display_name: str
    email_addresses: tuple[str, ...]
    site: str

    def __post_init__(self) -> None:
        if not self.email_addresses:
            raise ValueError(f"student {self.student_id} has no email addresses")
        if len(set(self.email_addresses)) != len(self.email_addresses):
            raise ValueError(f"student {self.student_id} lists an address twice")

    @property
    def primary_address(self) -> str:
        return self.email_addresses[0]


@dataclass(frozen=True)
class Question:
    """One named, all-or-nothing test unit within an assignment."""

    name: str
    weight: Fraction

    def __post_init__(self) -> None:
        if self.weight <= 0:
            raise ValueError(f"question {self.name}: weight must be positive")


@dataclass(frozen=True)
class AssignmentSpec:
    """One exercise set: subject key, required files, deadlines, questions."""

    subject_key: str
    kind: AssignmentKind
    required_files: tuple[str, ...]
    questions: tuple[Question, ...]
    suite_id: str | None = None
    deadlines: dict[str, datetime] = field(default_factory=dict)
    style_policy: StylePolicy = StylePolicy.OFF
    style_base: int = 2
    runner: str = "fixture"

    def __post_init__(self) -> None:
        if not self.required_files:
            raise ValueError(f"{self.subject_key}: required_files must not be empty")
        names = [q.name for q in self.questions]
        if len(set(names)) != len(names):
            raise ValueError(f"{self.subject_key}: duplicate question names")

    @property
    def slug(self) -> str:
        """File-system-safe name, e.g. "lab 4" -> "lab_4"."""
        return self.subject_key.replace(" ", "_")


@dataclass(frozen=True)
class FileRef:
    """A stored submission file: original name, content digest, archive path."""

    name: str
    sha256: str
    path: str


@dataclass(frozen=True)
class SubmissionRecord:
    """One received, accepted attempt."""

    submission_id: str
    student_id: str
    assignment_key: str
    received_at: datetime
    files: tuple[FileRef, ...]
    attempt: int
    status: SubmissionStatus = SubmissionStatus.ACCEPTED

    def __post_init__(self) -> None:
        if self.attempt < 1:
            raise ValueError("attempt numbering starts at 1")
        if self.received_at.tzinfo is None:
            raise ValueError("received_at must be timezone-aware")


@dataclass(frozen=True)
class QuestionResult:
    name: str
    passed: bool
    traceback_text: str = ""

    def __post_init__(self) -> None:
        if self.passed and self.traceback_text:
            raise ValueError(f"{self.name}: passed result must carry no traceback")


@dataclass(frozen=True)
class TestReport:
    """Machine-readable outcome of one sandbox run."""

    status: ReportStatus
    question_results: tuple[QuestionResult, ...] = ()
    style_error_count: int = 0
    duration_s: float = 0.0
    detail: str = ""
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.style_error_count < 0:
            raise ValueError("style_error_count must be non-negative")
        if self.duration_s < 0:
            raise ValueError("duration_s must be non-negative")


@dataclass(frozen=True)
class MarkRecord:
    """Scored result for one submission."""

    submission_id: str
    student_id: str
    assignment_key: str
    attempt: int
    points: Fraction
    total: Fraction
    percent: int
    recorded_for_grade: bool
    late: bool = False

    def __post_init__(self) -> None:
        if not 0 <= self.points <= self.total:
            raise ValueError("points must lie in [0, total]")
        if not 0 <= self.percent <= 100:
            raise ValueError("percent must lie in [0, 100]")


def utcnow() -> datetime:
    return datetime.now(tz=timezone.utc).replace(microsecond=0)


def to_utc_second(dt: datetime) -> datetime:
    """Normalize an aware datetime to UTC with second precision."""
    if dt.tzinfo is None:
        raise ValueError("naive datetime; attach a timezone first")
    return dt.astimezone(timezone.utc).replace(microsecond=0)


def format_instant(dt: datetime) -> str:
    return to_utc_second(dt).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_instant(text: str) -> datetime:
    dt = datetime.strptime(text, "%Y-%m-%dT%H:%M:%SZ")
    return dt.replace(tzinfo=timezone.utc)
