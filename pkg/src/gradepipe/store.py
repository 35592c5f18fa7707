"""Results store: an append-only journal plus a derived marks table.

The journal (one JSON document per line) is the source of truth; the
in-memory index is rebuilt by replaying it, so any derived output can be
reproduced from the file alone. Appends are flushed before the caller
continues. The recorded grade for a (student, assignment) pair is
write-once: once set it is never overwritten, whatever arrives later.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .model import (
    FileRef,
    MarkRecord,
    SubmissionRecord,
    SubmissionStatus,
    format_instant,
    parse_instant,
)

logger = logging.getLogger(__name__)

JOURNAL_SCHEMA_VERSION = 1


class StoreError(Exception):
    """A journal invariant was violated."""


@dataclass
class ResultsStore:
    path: Path
    submissions: dict[str, SubmissionRecord] = field(default_factory=dict)
    marks: list[MarkRecord] = field(default_factory=list)
    _recorded: dict[tuple[str, str], MarkRecord] = field(default_factory=dict)
    _dedup: set[str] = field(default_factory=set)

    @classmethod
    def open(cls, path: Path | str) -> "ResultsStore":
        store = cls(path=Path(path))
        store.path.parent.mkdir(parents=True, exist_ok=True)
        if store.path.exists():
            with open(store.path) as fh:
                for line_no, line in enumerate(fh, start=1):
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        record = json.loads(line)
                    except json.JSONDecodeError as exc:
                        raise StoreError(
                            f"{store.path}:{line_no}: corrupt journal line"
                        ) from exc
                    store._apply(record)
        return store

    # -- journal plumbing ---------------------------------------------------

    def _append(self, record: dict) -> None:
        record["schema_version"] = JOURNAL_SCHEMA_VERSION
        line = json.dumps(record, sort_keys=True)
        with open(self.path, "a") as fh:
            fh.write(line + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        self._apply(record)

    def _apply(self, record: dict) -> None:
        if record.get("schema_version") != JOURNAL_SCHEMA_VERSION:
            raise StoreError(
                f"journal record has unsupported schema_version "
                f"{record.get('schema_version')!r}"
            )
        kind = record["type"]
        if kind == "submission":
            sub = SubmissionRecord(
                submission_id=record["submission_id"],
                student_id=record["student_id"],
                assignment_key=record["assignment"],
                received_at=parse_instant(record["received_at"]),
                files=tuple(
                    FileRef(f["name"], f["sha256"], f["path"])
                    for f in record["files"]
                ),
                attempt=record["attempt"],
                status=SubmissionStatus(record["status"]),
            )
            self.submissions[sub.submission_id] = sub
        elif kind == "status":
            sub = self.submissions[record["submission_id"]]
            self.submissions[sub.submission_id] = SubmissionRecord(
                submission_id=sub.submission_id,
                student_id=sub.student_id,
                assignment_key=sub.assignment_key,
                received_at=sub.received_at,
                files=sub.files,
                attempt=sub.attempt,
                status=SubmissionStatus(record["status"]),
            )
        elif kind == "mark":
            mark = MarkRecord(
                submission_id=record["submission_id"],
                student_id=record["student_id"],
                assignment_key=record["assignment"],
                attempt=record["attempt"],
                points=Fraction(record["points"]),
                total=Fraction(record["total"]),
                percent=record["percent"],
                recorded_for_grade=record["recorded_for_grade"],
                late=record.get("late", False),
            )
            key = (mark.student_id, mark.assignment_key)
            if mark.recorded_for_grade:
                if key in self._recorded:
                    raise StoreError(
                        f"recorded grade for {key} would be overwritten"
                    )
                self._recorded[key] = mark
            self.marks.append(mark)
        elif kind == "ingested":
            self._dedup.add(record["dedup_key"])
        else:
            raise StoreError(f"unknown journal record type {kind!r}")

    # -- writes ---------------------------------------------------------------

    def add_submission(self, sub: SubmissionRecord) -> None:
        if sub.submission_id in self.submissions:
            logger.info("submission %s already journaled, skipping", sub.submission_id)
            return
        self._append({
            "type": "submission",
            "submission_id": sub.submission_id,
            "student_id": sub.student_id,
            "assignment": sub.assignment_key,
            "received_at": format_instant(sub.received_at),
            "files": [
                {"name": f.name, "sha256": f.sha256, "path": f.path}
                for f in sub.files
            ],
            "attempt": sub.attempt,
            "status": sub.status.value,
        })

    def set_status(self, submission_id: str, status: SubmissionStatus) -> None:
        current = self.submissions[submission_id]
        if current.status is status:
            return
        self._append({
            "type": "status",
            "submission_id": submission_id,
            "status": status.value,
        })

    def add_mark(self, mark: MarkRecord) -> None:
        if any(m.submission_id == mark.submission_id for m in self.marks):
            logger.info("mark for %s already journaled, skipping", mark.submission_id)
            return
        self._append({
            "type": "mark",
            "submission_id": mark.submission_id,
            "student_id": mark.student_id,
            "assignment": mark.assignment_key,
            "attempt": mark.attempt,
            "points": str(mark.points),
            "total": str(mark.total),
            "percent": mark.percent,
            "recorded_for_grade": mark.recorded_for_grade,
            "late": mark.late,
        })

    def mark_ingested(self, dedup_key: str) -> None:
        if dedup_key not in self._dedup:
            self._append({"type": "ingested", "dedup_key": dedup_key})

    # -- queries ----------------------------------------------------------------

    def was_ingested(self, dedup_key: str) -> bool:
        return dedup_key in self._dedup

    def accepted_count(self, student_id: str, assignment_key: str) -> int:
        return sum(
            1
            for s in self.submissions.values()
            if s.student_id == student_id and s.assignment_key == assignment_key
        )

    def submissions_for(self, student_id: str, assignment_key: str) -> list[SubmissionRecord]:
        found = [
            s
            for s in self.submissions.values()
            if s.student_id == student_id and s.assignment_key == assignment_key
        ]
        return sorted(found, key=lambda s: s.attempt)

    def has_tested(self, student_id: str, assignment_key: str) -> bool:
        return any(
            s.status is SubmissionStatus.TESTED
            for s in self.submissions_for(student_id, assignment_key)
        )

    def recorded_mark(self, student_id: str, assignment_key: str) -> MarkRecord | None:
        return self._recorded.get((student_id, assignment_key))

    def marks_for(self, student_id: str, assignment_key: str) -> list[MarkRecord]:
        return [
            m
            for m in self.marks
            if m.student_id == student_id and m.assignment_key == assignment_key
        ]

    def submission_log(self, assignment_key: str | None = None) -> list[SubmissionRecord]:
        """All accepted submissions in received order."""
        subs = [
            s
            for s in self.submissions.values()
            if assignment_key is None or s.assignment_key == assignment_key
        ]
        return sorted(subs, key=lambda s: (s.received_at, s.submission_id))
