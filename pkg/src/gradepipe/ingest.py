"""Incoming-queue processing: parse, validate, archive, enqueue.

Every polled message is archived verbatim before anything else happens,
then ends in exactly one of three outcomes: accepted (files persisted, a
test job and a receipt enqueued), rejected (an explanation enqueued for
the sender), or quarantined (unreadable; an administrator is alerted).

Crash safety: test jobs, receipts and the ingest marker are written with
ids derived from stable submission data, so re-processing a message
after a crash overwrites the earlier artifacts instead of duplicating
them, and a marker in the journal stops a fully-ingested message from
consuming a second attempt.
"""

from __future__ import annotations

import email
import email.utils
import hashlib
import logging
import shutil
from dataclasses import dataclass
from datetime import datetime
from email.policy import default as email_policy
from pathlib import Path

from . import faults
from .config import CourseConfig
from .fsqueue import FsQueue, deterministic_item_id, new_item_id
from .messages import render_message
from .model import (
    AssignmentSpec,
    FileRef,
    MessageCategory,
    Student,
    SubmissionRecord,
    to_utc_second,
    utcnow,
)
from .store import ResultsStore

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class IncomingMessage:
    message_id: str
    sender: str
    subject: str
    attachments: tuple[tuple[str, bytes], ...]
    received_at: datetime
    source_path: Path  # inbox file or bundle directory, removed after processing
    archive_path: Path


@dataclass(frozen=True)
class Accepted:
    student: Student
    assignment: AssignmentSpec
    files: tuple[tuple[str, bytes], ...]


@dataclass(frozen=True)
class Rejected:
    reason: str  # not_enrolled | unknown_assignment | missing_files | malformed
    explanation: str
    missing: tuple[str, ...] = ()


def validate_submission(
    message: IncomingMessage,
    config: CourseConfig,
) -> Accepted | Rejected:
    """Checks run in order: enrollment, assignment, files. First failure wins."""
    student = config.student_by_address(message.sender)
    if student is None:
        logger.warning(
            "submission from unknown address %s (subject %r) logged for admin review",
            message.sender, message.subject,
        )
        return Rejected(
            "not_enrolled",
            f"the sending address {message.sender} is not registered for "
            f"course {config.course_code}. If you believe this is wrong, "
            "please contact the course team.",
        )
    if not message.subject.strip():
        return Rejected(
            "malformed",
            "the message has no subject line, so it cannot be matched to "
            "an exercise. Please use the subject given in the instructions.",
        )
    assignment = config.assignment_for_subject(message.subject)
    if assignment is None:
        return Rejected(
            "unknown_assignment",
            f"the subject line {message.subject.strip()!r} does not name a "
            f"valid exercise for course {config.course_code}.",
        )
    by_name = {name.strip(): data for name, data in message.attachments}
    missing = [f for f in assignment.required_files if f not in by_name]
    if missing:
        return Rejected(
            "missing_files",
            "the following required file(s) were not attached: "
            + ", ".join(missing)
            + ". Please attach every file named in the instructions.",
            missing=tuple(missing),
        )
    files = tuple((name, by_name[name.strip()]) for name in assignment.required_files)
    return Accepted(student=student, assignment=assignment, files=files)


def content_digest(files: tuple[tuple[str, bytes], ...]) -> str:
    h = hashlib.sha256()
    for name, data in files:
        h.update(name.encode())
        h.update(b"\x00")
        h.update(data)
        h.update(b"\x00")
    return h.hexdigest()


class IngestProcessor:
    def __init__(self, config: CourseConfig, store: ResultsStore,
                 testing_queue: FsQueue, outgoing_queue: FsQueue):
        self.config = config
        self.store = store
        self.testing_queue = testing_queue
        self.outgoing_queue = outgoing_queue
        self.incoming_queue = FsQueue(config.root, "incoming")
        self.archive_dir = (
            config.root / "archive" / config.course_code / str(config.year)
        )
        self.quarantine_dir = config.root / "archive" / "malformed"

    # -- polling ------------------------------------------------------------

    def poll_inbox(self, now: datetime | None = None) -> list[IncomingMessage]:
        """Read mailbox files and drop-directory bundles, oldest first.

        Each message is archived before it is returned; unreadable input
        is quarantined and reported, and polling continues.
        """
        now = now or utcnow()
        self.archive_dir.mkdir(parents=True, exist_ok=True)
        self.quarantine_dir.mkdir(parents=True, exist_ok=True)
        messages: list[IncomingMessage] = []
        for path in self._inbox_paths():
            try:
                if path.is_dir():
                    messages.append(self._read_bundle(path, now))
                else:
                    messages.append(self._read_mail_file(path, now))
            except Exception as exc:
                self._quarantine(path, exc)
        messages.sort(key=lambda m: (m.received_at, m.message_id))
        return messages

    def _inbox_paths(self) -> list[Path]:
        paths: list[Path] = []
        if self.config.inbox_dir.exists():
            paths.extend(p for p in self.config.inbox_dir.iterdir() if p.is_file())
        if self.config.drop_dir and self.config.drop_dir.exists():
            paths.extend(p for p in self.config.drop_dir.iterdir() if p.is_dir())
        return sorted(paths, key=lambda p: (p.stat().st_mtime, p.name))

    def _read_mail_file(self, path: Path, now: datetime) -> IncomingMessage:
        raw = path.read_bytes()
        message_id = new_item_id()
        archive_path = self.archive_dir / f"{message_id}.eml"
        archive_path.write_bytes(raw)

        parsed = email.message_from_bytes(raw, policy=email_policy)
        _, sender = email.utils.parseaddr(str(parsed.get("From", "")))
        if not sender or "@" not in sender:
            raise ValueError(f"message {path.name} has no parseable sender address")
        received_at = now
        if parsed.get("Date"):
            try:
                received_at = to_utc_second(
                    email.utils.parsedate_to_datetime(str(parsed["Date"]))
                )
            except (TypeError, ValueError):
                pass
        attachments = []
        for part in parsed.walk():
            if part.get_content_maintype() == "multipart":
                continue
            filename = part.get_filename()
            if not filename:
                continue
            payload = part.get_payload(decode=True)
            if payload is None:
                raise ValueError(f"attachment {filename!r} could not be decoded")
            attachments.append((filename, payload))
        return IncomingMessage(
            message_id=message_id,
            sender=sender.strip().lower(),
            subject=str(parsed.get("Subject", "")),
            attachments=tuple(attachments),
            received_at=received_at,
            source_path=path,
            archive_path=archive_path,
        )

    def _read_bundle(self, path: Path, now: datetime) -> IncomingMessage:
        """Drop-directory bundle: <id>/meta.json plus the submitted files."""
        import json

        meta_path = path / "meta.json"
        meta = json.loads(meta_path.read_text())
        message_id = new_item_id()
        archive_path = self.archive_dir / message_id
        shutil.copytree(path, archive_path)

        sender = meta.get("sender", "")
        if not sender and meta.get("student_id"):
            student = self.config.roster.get(str(meta["student_id"]))
            if student:
                sender = student.primary_address
            else:
                sender = f"unknown-id-{meta['student_id']}@invalid"
        if not sender:
            raise ValueError(f"bundle {path.name} names no sender or student_id")
        received_at = now
        if meta.get("received_at"):
            received_at = to_utc_second(
                datetime.fromisoformat(str(meta["received_at"]))
            )
        attachments = tuple(
            (p.name, p.read_bytes())
            for p in sorted(path.iterdir())
            if p.is_file() and p.name != "meta.json"
        )
        return IncomingMessage(
            message_id=message_id,
            sender=str(sender).strip().lower(),
            subject=str(meta.get("subject", "")),
            attachments=attachments,
            received_at=received_at,
            source_path=path,
            archive_path=archive_path,
        )

    def _quarantine(self, path: Path, exc: Exception) -> None:
        logger.error("quarantining unreadable message %s: %s", path.name, exc)
        target = self.quarantine_dir / path.name
        if path.is_dir():
            if target.exists():
                shutil.rmtree(target)
            shutil.move(str(path), target)
        else:
            shutil.move(str(path), target)
        self._admin_alert(
            f"unreadable submission quarantined: {path.name}", str(exc)
        )

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

    # -- processing -----------------------------------------------------------

    def process_incoming(self, now: datetime | None = None) -> dict:
        """One ingest pass under the incoming lock.

        A failure while handling one message leaves it in the inbox for
        the next pass and alerts the administrator; later messages are
        still processed.
        """
        summary = {"polled": 0, "accepted": 0, "rejected": 0, "skipped": False}
        lock = self.incoming_queue.acquire_lock()
        if lock is None:
            summary["skipped"] = True
            return summary
        try:
            for message in self.poll_inbox(now=now):
                summary["polled"] += 1
                try:
                    outcome = self._process_one(message)
                except faults.InjectedCrash:
                    raise
                except Exception as exc:
                    logger.exception("failed to process message %s", message.message_id)
                    self._admin_alert(
                        f"message {message.message_id} left in inbox after error",
                        f"{type(exc).__name__}: {exc}",
                    )
                    continue
                summary[outcome] += 1
        finally:
            self.incoming_queue.release_lock(lock)
        return summary

    def _process_one(self, message: IncomingMessage) -> str:
        outcome = validate_submission(message, self.config)
        if isinstance(outcome, Rejected):
            self._enqueue_rejection(message, outcome)
            self._remove_source(message)
            return "rejected"
        self._ingest_accepted(message, outcome)
        self._remove_source(message)
        return "accepted"

    def _enqueue_rejection(self, message: IncomingMessage, outcome: Rejected) -> None:
        student = self.config.student_by_address(message.sender)
        name = student.display_name if student else message.sender
        reply = render_message(
            MessageCategory.REJECTION,
            {
                "recipients": [message.sender],
                "contact": self.config.contact,
                "name": name,
                "explanation": outcome.explanation,
            },
        )
        raw_digest = hashlib.sha256(
            message.archive_path.read_bytes()
            if message.archive_path.is_file()
            else message.message_id.encode()
        ).hexdigest()
        item_id = deterministic_item_id(message.received_at, raw_digest[:6])
        self.outgoing_queue.enqueue("outbound_message", reply.to_payload(), item_id)

    def _ingest_accepted(self, message: IncomingMessage, outcome: Accepted) -> None:
        student = outcome.student
        assignment = outcome.assignment
        digest = content_digest(outcome.files)
        dedup_key = f"{message.sender}|{assignment.subject_key}|{digest}"
        if self.store.was_ingested(dedup_key):
            logger.info(
                "duplicate submission from %s for %s (digest %.12s), not re-enqueued",
                student.student_id, assignment.subject_key, digest,
            )
            return

        submission_id = f"{student.student_id}-{assignment.slug}-{digest[:12]}"
        existing = self.store.submissions.get(submission_id)
        attempt = (
            existing.attempt
            if existing
            else self.store.accepted_count(student.student_id, assignment.subject_key) + 1
        )

        sub_dir = (
            self.config.root / "submissions" / assignment.slug
            / student.student_id / str(attempt)
        )
        sub_dir.mkdir(parents=True, exist_ok=True)
        refs = []
        for name, data in outcome.files:
            target = sub_dir / name
            target.write_bytes(data)
            refs.append(FileRef(name=name, sha256=content_digest(((name, data),)),
                                path=str(target)))
        faults.fire("ingest:after_persist_files")

        record = SubmissionRecord(
            submission_id=submission_id,
            student_id=student.student_id,
            assignment_key=assignment.subject_key,
            received_at=message.received_at,
            files=tuple(refs),
            attempt=attempt,
        )
        self.store.add_submission(record)
        faults.fire("ingest:after_record_submission")

        job_payload = {
            "submission_id": submission_id,
            "student_id": student.student_id,
            "assignment_key": assignment.subject_key,
            "attempt": attempt,
            "files": [r.path for r in refs],
            "received_at": record.received_at.strftime("%Y-%m-%dT%H:%M:%SZ"),
        }
        job_id = deterministic_item_id(message.received_at, digest[:6])
        self.testing_queue.enqueue("test_job", job_payload, job_id)
        faults.fire("ingest:after_enqueue_test_job")

        receipt = render_message(
            MessageCategory.RECEIPT,
            {
                "recipients": [message.sender],
                "contact": self.config.contact,
                "name": student.display_name,
                "assignment_key": assignment.subject_key,
                "filenames": [r.name for r in refs],
                "received_at_local": self.config.local(record.received_at),
            },
        )
        receipt_id = deterministic_item_id(message.received_at, f"r{digest[:5]}")
        self.outgoing_queue.enqueue("outbound_message", receipt.to_payload(), receipt_id)
        faults.fire("ingest:after_enqueue_receipt")

        self.store.mark_ingested(dedup_key)

    def _remove_source(self, message: IncomingMessage) -> None:
        if message.source_path.is_dir():
            shutil.rmtree(message.source_path, ignore_errors=True)
        else:
            try:
                message.source_path.unlink()
            except FileNotFoundError:
                pass
