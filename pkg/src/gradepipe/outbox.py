"""Outgoing-message queue processing: durable at-least-once delivery.

Items stay in the queue until the transport confirms the send, so an
unavailable mail service only delays delivery; messages accumulate and
go out together once the service is back. A crash between a successful
send and the queue removal redelivers that one message on restart.
"""

from __future__ import annotations

import logging
import smtplib
from dataclasses import dataclass
from email.message import EmailMessage
from pathlib import Path
from typing import Protocol

from . import faults
from .fsqueue import FsQueue
from .messages import OutboundMessage

logger = logging.getLogger(__name__)


class TransportError(Exception):
    """The transport could not accept the message; the item is retained."""


class Transport(Protocol):
    def send(self, item_id: str, message: OutboundMessage) -> None: ...


class FileDropTransport:
    """Writes each message as ``<outdir>/<item_id>.eml``.

    Redelivery of the same item overwrites the same file, so duplicates
    collapse at the transport.
    """

    def __init__(self, directory: Path | str):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def send(self, item_id: str, message: OutboundMessage) -> None:
        text = (
            f"To: {', '.join(message.recipients)}\n"
            f"Subject: {message.subject}\n"
            f"X-Category: {message.category.value}\n"
            "\n"
            f"{message.body}\n"
        )
        try:
            (self.directory / f"{item_id}.eml").write_text(text)
        except OSError as exc:
            raise TransportError(str(exc)) from exc


class SmtpTransport:
    def __init__(self, host: str, port: int, sender: str,
                 username: str | None = None, password: str | None = None,
                 starttls: bool = False, smtp_factory=smtplib.SMTP):
        self.host = host
        self.port = port
        self.sender = sender
        self.username = username
        self.password = password
        self.starttls = starttls
        self.smtp_factory = smtp_factory

    def send(self, item_id: str, message: OutboundMessage) -> None:
        email = EmailMessage()
        email["From"] = self.sender
        email["To"] = ", ".join(message.recipients)
        email["Subject"] = message.subject
        email.set_content(message.body)
        try:
            with self.smtp_factory(self.host, self.port) as smtp:
                if self.starttls:
                    smtp.starttls()
                if self.username:
                    smtp.login(self.username, self.password or "")
                smtp.send_message(email)
        except (smtplib.SMTPException, OSError) as exc:
            raise TransportError(str(exc)) from exc


@dataclass
class DeliverySummary:
    sent: int = 0
    failed: int = 0
    remaining: int = 0


class OutboxProcessor:
    def __init__(self, queue: FsQueue, transport: Transport):
        self.queue = queue
        self.transport = transport

    def enqueue(self, message: OutboundMessage, item_id: str | None = None) -> str:
        return self.queue.enqueue("outbound_message", message.to_payload(), item_id)

    def deliver_pending(self) -> DeliverySummary:
        """One delivery pass under the queue lock, oldest first.

        Failures keep the item (with the error noted) and processing
        continues; a transport that is down entirely produces a single
        log line, never an alert email about email being down.
        """
        summary = DeliverySummary()
        lock = self.queue.acquire_lock()
        if lock is None:
            return summary
        try:
            for item in self.queue.list_items():
                message = OutboundMessage.from_payload(item.payload)
                try:
                    self.transport.send(item.item_id, message)
                except TransportError as exc:
                    summary.failed += 1
                    self.queue.record_failure(
                        item.item_id, str(exc), max_attempts=10**9
                    )
                    continue
                faults.fire("outbox:after_send")
                self.queue.remove(item.item_id)
                summary.sent += 1
        finally:
            self.queue.release_lock(lock)
        summary.remaining = len(self.queue.list_items())
        if summary.failed and not summary.sent:
            logger.error(
                "outgoing transport appears to be down: %d message(s) retained",
                summary.remaining,
            )
        return summary
