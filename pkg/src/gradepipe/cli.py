"""Operator command line: the scheduler tick, queue administration,
reports, and exam pre-marking.

Exit codes: 0 success, 1 operational error, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from .config import ConfigError, CourseConfig, load_config
from .fsqueue import FsQueue, watchdog_scan
from .ingest import IngestProcessor
from .messages import render_message
from .model import MessageCategory
from .outbox import FileDropTransport, OutboxProcessor, SmtpTransport
from .reporting import (
    export_marks_csv,
    inspect_submission,
    missing_submission_scan,
    premark_batch,
    render_stats_plots,
    sample_submissions,
    stats_bundle,
    weekly_summary,
)
from .scoring import format_lateness
from .store import ResultsStore
from .testexec import TestProcessor

logger = logging.getLogger(__name__)

QUEUE_NAMES = ("incoming", "testing", "outgoing")


@dataclass
class Pipeline:
    """Everything a tick needs, wired from one config file."""

    config: CourseConfig
    store: ResultsStore
    testing_queue: FsQueue
    outgoing_queue: FsQueue
    ingest: IngestProcessor
    testexec: TestProcessor
    outbox: OutboxProcessor

    @classmethod
    def from_config(cls, config: CourseConfig) -> "Pipeline":
        store = ResultsStore.open(config.root / "state" / "journal.ndjson")
        testing_queue = FsQueue(config.root, "testing")
        outgoing_queue = FsQueue(config.root, "outgoing")
        if config.transport.kind == "filedrop":
            transport = FileDropTransport(config.transport.directory)
        else:
            transport = SmtpTransport(
                host=config.transport.host,
                port=config.transport.port,
                sender=config.contact,
                username=config.transport.username,
                password=config.transport.password,
                starttls=config.transport.starttls,
            )
        return cls(
            config=config,
            store=store,
            testing_queue=testing_queue,
            outgoing_queue=outgoing_queue,
            ingest=IngestProcessor(config, store, testing_queue, outgoing_queue),
            testexec=TestProcessor(config, store, testing_queue, outgoing_queue),
            outbox=OutboxProcessor(outgoing_queue, transport),
        )

    def all_queues(self) -> list[FsQueue]:
        return [FsQueue(self.config.root, name) for name in QUEUE_NAMES]

    def tick(self) -> dict:
        """One pass of every processor, in pipeline order, then the
        watchdog. Stages whose lock is held elsewhere are skipped and
        reported, never blocked on."""
        ingest_summary = self.ingest.process_incoming()
        test_summary = self.testexec.process_testing_queue()
        delivery = self.outbox.deliver_pending()
        alerts = watchdog_scan(self.all_queues(), self.config.stale_lock_max_age)
        for alert in alerts:
            message = render_message(
                MessageCategory.ADMIN_ALERT,
                {
                    "recipients": [self.config.admin_address],
                    "contact": self.config.contact,
                    "summary": (
                        f"stale lock on queue {alert.queue_name} "
                        f"(age {format_lateness(alert.age)})"
                    ),
                    "detail": f"lock holder pid: {alert.owner_pid}",
                },
            )
            self.outgoing_queue.enqueue("outbound_message", message.to_payload())
        skipped = [
            name
            for name, summary in (
                ("incoming", ingest_summary),
                ("testing", test_summary),
            )
            if summary.get("skipped")
        ]
        return {
            "ingested": ingest_summary["accepted"],
            "rejected": ingest_summary["rejected"],
            "tested": test_summary["tested"],
            "test_failures": test_summary["failed"],
            "delivered": delivery.sent,
            "delivery_failures": delivery.failed,
            "outbox_remaining": delivery.remaining,
            "stale_lock_alerts": len(alerts),
            "skipped_stages": skipped,
        }


def _load(args) -> Pipeline:
    config = load_config(args.config)
    return Pipeline.from_config(config)


def cmd_tick(args) -> int:
    pipeline = _load(args)
    summary = pipeline.tick()
    if args.json:
        print(json.dumps(summary, sort_keys=True))
    else:
        print(
            f"ingested {summary['ingested']}, rejected {summary['rejected']}, "
            f"tested {summary['tested']}, delivered {summary['delivered']}, "
            f"outbox remaining {summary['outbox_remaining']}"
        )
        if summary["skipped_stages"]:
            print(f"skipped (lock held): {', '.join(summary['skipped_stages'])}")
    return 0


def cmd_serve(args) -> int:
    pipeline = _load(args)
    interval = args.interval or pipeline.config.tick_interval_s
    logger.info("serving with a %ss tick; Ctrl-C to stop", interval)
    try:
        while True:
            started = time.monotonic()
            summary = pipeline.tick()
            logger.info("tick: %s", summary)
            elapsed = time.monotonic() - started
            time.sleep(max(0.0, interval - elapsed))
    except KeyboardInterrupt:
        return 0


def cmd_queue(args) -> int:
    pipeline = _load(args)
    if args.queue_command == "ls":
        for queue in pipeline.all_queues():
            items = queue.list_items()
            flagged = queue.list_flagged()
            print(f"{queue.name}: {len(items)} queued, {len(flagged)} flagged")
            for item in items:
                error = f"  last_error={item.last_error}" if item.last_error else ""
                print(f"  {item.item_id}  {item.kind}  attempts={item.attempts}{error}")
            for item in flagged:
                print(f"  [flagged] {item.item_id}  {item.kind}  "
                      f"last_error={item.last_error}")
        return 0
    if args.queue_command == "requeue":
        FsQueue(pipeline.config.root, args.queue_name).requeue_flagged(args.item_id)
        print(f"requeued {args.item_id} into {args.queue_name}")
        return 0
    if args.queue_command == "inspect":
        result = inspect_submission(pipeline.store, args.submission_id)
        if result is None:
            print(f"no submission {args.submission_id}", file=sys.stderr)
            return 1
        print(json.dumps(result.__dict__, indent=2))
        return 0
    raise AssertionError(f"unhandled queue command {args.queue_command}")


def cmd_report(args) -> int:
    pipeline = _load(args)
    config, store = pipeline.config, pipeline.store
    if args.report_command == "weekly":
        students = [args.student] if args.student else sorted(config.roster)
        sent = 0
        for student_id in students:
            message = weekly_summary(config, store, student_id)
            pipeline.outbox.enqueue(message)
            sent += 1
        print(f"enqueued {sent} weekly summaries")
        return 0
    if args.report_command == "remind":
        reminders = missing_submission_scan(config, store)
        for message in reminders:
            pipeline.outbox.enqueue(message)
        print(f"enqueued {len(reminders)} reminders")
        return 0
    if args.report_command == "export":
        path = export_marks_csv(config, store, Path(args.out), args.assignment)
        print(f"wrote {path}")
        return 0
    if args.report_command == "stats":
        written = stats_bundle(config, store, Path(args.out), args.assignment)
        if args.plot:
            written += render_stats_plots(Path(args.out))
        for path in written:
            print(f"wrote {path}")
        return 0
    if args.report_command == "sample":
        written = sample_submissions(
            config, store, args.assignment, Path(args.out), args.n,
            anonymize=args.anonymize, seed=args.seed,
        )
        for path in written:
            print(f"wrote {path}")
        return 0
    if args.report_command == "premark":
        return cmd_premark(args)
    raise AssertionError(f"unhandled report command {args.report_command}")


def cmd_premark(args) -> int:
    pipeline = _load(args)
    marks = premark_batch(
        pipeline.config, Path(args.batch_dir), args.assignment, Path(args.out)
    )
    print(f"wrote {marks}")
    return 0


def cmd_roster(args) -> int:
    pipeline = _load(args)
    if args.roster_command == "ls":
        for student in sorted(pipeline.config.roster.values(),
                              key=lambda s: s.student_id):
            addresses = ";".join(sorted(student.email_addresses))
            print(f"{student.student_id}\t{student.display_name}\t"
                  f"{student.site}\t{addresses}")
        return 0
    if args.roster_command == "check":
        # load_config already validated uniqueness; report totals
        sites = {s.site for s in pipeline.config.roster.values()}
        print(f"{len(pipeline.config.roster)} students across sites "
              f"{', '.join(sorted(sites))}")
        return 0
    raise AssertionError(f"unhandled roster command {args.roster_command}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gradepipe",
        description="Automatic assessment pipeline for programming exercises.",
    )
    parser.add_argument(
        "--config", default="course.yaml", help="course configuration file"
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    tick = sub.add_parser("tick", help="run one pass of all processors")
    tick.add_argument("--json", action="store_true", help="machine-readable summary")
    tick.set_defaults(func=cmd_tick)

    serve = sub.add_parser("serve", help="run the tick loop in the foreground")
    serve.add_argument("--interval", type=int, default=None, help="seconds between ticks")
    serve.set_defaults(func=cmd_serve)

    queue = sub.add_parser("queue", help="inspect and repair queues")
    queue_sub = queue.add_subparsers(dest="queue_command", required=True)
    queue_sub.add_parser("ls", help="list queue contents")
    requeue = queue_sub.add_parser("requeue", help="return a flagged item to its queue")
    requeue.add_argument("queue_name", choices=QUEUE_NAMES)
    requeue.add_argument("item_id")
    inspect = queue_sub.add_parser("inspect", help="show a submission's history")
    inspect.add_argument("submission_id")
    queue.set_defaults(func=cmd_queue)

    report = sub.add_parser("report", help="generate summaries and exports")
    report_sub = report.add_subparsers(dest="report_command", required=True)
    weekly = report_sub.add_parser("weekly", help="enqueue weekly summary emails")
    weekly.add_argument("--student", help="one student id; default all")
    report_sub.add_parser("remind", help="enqueue missing-submission reminders")
    export = report_sub.add_parser("export", help="write the marks spreadsheet")
    export.add_argument("--out", required=True)
    export.add_argument("--assignment", default=None)
    stats = report_sub.add_parser("stats", help="write histogram and timeline CSVs")
    stats.add_argument("--out", required=True)
    stats.add_argument("--assignment", default=None)
    stats.add_argument("--plot", action="store_true", help="also render PNGs")
    sample = report_sub.add_parser("sample", help="copy random submissions for review")
    sample.add_argument("--assignment", required=True)
    sample.add_argument("--out", required=True)
    sample.add_argument("-n", type=int, default=10)
    sample.add_argument("--anonymize", action="store_true", default=True)
    sample.add_argument("--seed", type=int, default=None)
    premark_sub = report_sub.add_parser("premark", help="grade an offline batch")
    premark_sub.add_argument("--assignment", required=True)
    premark_sub.add_argument("--batch-dir", required=True)
    premark_sub.add_argument("--out", required=True)
    report.set_defaults(func=cmd_report)

    premark = sub.add_parser("premark", help="grade an offline exam batch")
    premark.add_argument("--assignment", required=True)
    premark.add_argument("--batch-dir", required=True)
    premark.add_argument("--out", required=True)
    premark.set_defaults(func=cmd_premark)

    roster = sub.add_parser("roster", help="roster utilities")
    roster_sub = roster.add_subparsers(dest="roster_command", required=True)
    roster_sub.add_parser("ls", help="print the roster")
    roster_sub.add_parser("check", help="validate the roster")
    roster.set_defaults(func=cmd_roster)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # operational failure
        logger.exception("command failed")
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
