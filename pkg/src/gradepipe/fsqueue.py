"""Durable file-system task queues with lock files and a stale-lock watchdog.

A queue is a directory of single-document JSON files:

    <root>/queues/<name>/
        staging/        incomplete writes, never read by consumers
        items/          one file per queue item, named <item_id>.json
        flagged/        items parked after repeated failures
        lock            present while a processor pass is running

Items become visible through an atomic rename from staging/ into items/,
so a crash mid-write leaves nothing half-visible. Item ids sort in
enqueue order, which gives FIFO processing without any coordination.
"""

from __future__ import annotations

import errno
import json
import logging
import os
import secrets
import time
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path

from . import faults
from .model import format_instant, parse_instant, utcnow

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

_last_issued_usec = 0


class QueueError(Exception):
    """A queue invariant was violated or storage failed."""


def new_item_id(now_usec: int | None = None) -> str:
    """Sortable unique id: zero-padded microseconds + 6 random hex chars."""
    global _last_issued_usec
    usec = time.time_ns() // 1000 if now_usec is None else now_usec
    if usec <= _last_issued_usec:
        usec = _last_issued_usec + 1
    _last_issued_usec = usec
    return f"{usec:020d}{secrets.token_hex(3)}"


def deterministic_item_id(instant: datetime, tag: str) -> str:
    """Id derived from stable inputs, so re-enqueueing after a crash
    overwrites the earlier item instead of duplicating it."""
    usec = int(instant.timestamp()) * 1_000_000
    return f"{usec:020d}{tag}"


@dataclass(frozen=True)
class QueueItem:
    item_id: str
    kind: str
    payload: dict
    enqueued_at: datetime
    attempts: int = 0
    last_error: str | None = None


@dataclass
class LockHandle:
    queue_name: str
    acquired_at: datetime
    owner_pid: int
    path: Path
    released: bool = False


class FsQueue:
    """One named queue rooted at ``<root>/queues/<name>``."""

    def __init__(self, root: Path | str, name: str):
        self.name = name
        self.dir = Path(root) / "queues" / name
        self.staging_dir = self.dir / "staging"
        self.items_dir = self.dir / "items"
        self.flagged_dir = self.dir / "flagged"
        self.lock_path = self.dir / "lock"
        for d in (self.staging_dir, self.items_dir, self.flagged_dir):
            d.mkdir(parents=True, exist_ok=True)

    # -- items ------------------------------------------------------------

    def enqueue(self, kind: str, payload: dict, item_id: str | None = None) -> str:
        item_id = item_id or new_item_id()
        document = {
            "schema_version": SCHEMA_VERSION,
            "item_id": item_id,
            "kind": kind,
            "enqueued_at": format_instant(utcnow()),
            "attempts": 0,
            "payload": payload,
        }
        staged = self.staging_dir / f"{item_id}.json"
        final = self.items_dir / f"{item_id}.json"
        data = json.dumps(document, sort_keys=True).encode()
        fd = os.open(staged, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o644)
        try:
            os.write(fd, data)
            os.fsync(fd)
        finally:
            os.close(fd)
        faults.fire(f"fsqueue:{self.name}:after_stage")
        os.replace(staged, final)
        return item_id

    def _read_item(self, path: Path) -> QueueItem:
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise QueueError(f"unreadable queue item {path.name}: {exc}") from exc
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise QueueError(
                f"queue item {path.name} has unsupported schema_version "
                f"{doc.get('schema_version')!r}"
            )
        return QueueItem(
            item_id=doc["item_id"],
            kind=doc["kind"],
            payload=doc["payload"],
            enqueued_at=parse_instant(doc["enqueued_at"]),
            attempts=doc.get("attempts", 0),
            last_error=doc.get("last_error"),
        )

    def list_items(self) -> list[QueueItem]:
        paths = sorted(self.items_dir.glob("*.json"))
        return [self._read_item(p) for p in paths]

    def list_flagged(self) -> list[QueueItem]:
        return [self._read_item(p) for p in sorted(self.flagged_dir.glob("*.json"))]

    def dequeue_next(self, lock: LockHandle) -> tuple[str, dict] | None:
        """Peek at the lowest-id item; removal is a separate, explicit step."""
        self._check_owner(lock)
        paths = sorted(self.items_dir.glob("*.json"))
        if not paths:
            return None
        item = self._read_item(paths[0])
        return item.item_id, item.payload

    def remove(self, item_id: str) -> None:
        try:
            os.unlink(self.items_dir / f"{item_id}.json")
        except FileNotFoundError:
            logger.info("queue %s: item %s already removed", self.name, item_id)

    def record_failure(self, item_id: str, error: str, max_attempts: int = 3) -> bool:
        """Bump the attempt counter; park the item once attempts reach the cap.

        Returns True when the item was flagged (moved out of the live queue).
        """
        path = self.items_dir / f"{item_id}.json"
        doc = json.loads(path.read_text())
        doc["attempts"] = doc.get("attempts", 0) + 1
        doc["last_error"] = error
        tmp = self.staging_dir / f"{item_id}.json"
        tmp.write_text(json.dumps(doc, sort_keys=True))
        os.replace(tmp, path)
        if doc["attempts"] >= max_attempts:
            os.replace(path, self.flagged_dir / f"{item_id}.json")
            logger.warning("queue %s: item %s flagged after %d attempts: %s",
                           self.name, item_id, doc["attempts"], error)
            return True
        return False

    def requeue_flagged(self, item_id: str) -> None:
        src = self.flagged_dir / f"{item_id}.json"
        if not src.exists():
            raise QueueError(f"no flagged item {item_id} in queue {self.name}")
        os.replace(src, self.items_dir / f"{item_id}.json")

    # -- locking ----------------------------------------------------------

    def acquire_lock(self) -> LockHandle | None:
        """Create the lock file exclusively; None (and a log line) if held."""
        now = utcnow()
        meta = {
            "queue": self.name,
            "acquired_at": format_instant(now),
            "pid": os.getpid(),
        }
        try:
            fd = os.open(self.lock_path, os.O_WRONLY | os.O_CREAT | os.O_EXCL, 0o644)
        except OSError as exc:
            if exc.errno == errno.EEXIST:
                logger.warning("queue %s: lock already held, skipping pass", self.name)
                return None
            raise
        try:
            os.write(fd, json.dumps(meta).encode())
        finally:
            os.close(fd)
        return LockHandle(self.name, now, os.getpid(), self.lock_path)

    def release_lock(self, lock: LockHandle) -> None:
        self._check_owner(lock)
        lock.released = True
        try:
            os.unlink(lock.path)
        except FileNotFoundError as exc:
            raise QueueError(f"lock file for {self.name} vanished while held") from exc

    def _check_owner(self, lock: LockHandle) -> None:
        if lock.queue_name != self.name or lock.released:
            raise QueueError(
                f"caller does not hold a live lock on queue {self.name}"
            )


@dataclass(frozen=True)
class StaleLockAlert:
    queue_name: str
    age: timedelta
    owner_pid: int | None


def watchdog_scan(
    queues: list[FsQueue],
    max_age: timedelta,
    now: datetime | None = None,
) -> list[StaleLockAlert]:
    """One alert per lock file older than max_age.

    The watchdog never removes locks; a human investigates and cleans up.
    """
    now = now or utcnow()
    alerts = []
    for queue in queues:
        if not queue.lock_path.exists():
            continue
        pid = None
        try:
            meta = json.loads(queue.lock_path.read_text())
            acquired = parse_instant(meta["acquired_at"])
            pid = meta.get("pid")
        except (OSError, json.JSONDecodeError, KeyError, ValueError):
            acquired = datetime.fromtimestamp(
                queue.lock_path.stat().st_mtime, tz=now.tzinfo
            )
        age = now - acquired
        if age > max_age:
            alerts.append(StaleLockAlert(queue.name, age, pid))
    return alerts
