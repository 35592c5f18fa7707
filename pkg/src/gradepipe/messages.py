"""Outbound message bodies.

Every student-facing message ends with the same footer inviting the
student to contact the course team. The feedback and weekly-summary
layouts are load-bearing: downstream course material quotes them, so
the formatting here is exact, down to column widths and rules.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from fractions import Fraction
from typing import Sequence

from .model import MessageCategory, utcnow
from .scoring import format_number

TRACEBACK_LINE_LIMIT = 200

FOOTER = """\
-----------------------------------------------

This message has been generated  automatically. Should
you feel that you observe a malfunction of the system,
or if you wish to speak to a human, please contact the
course team ({contact})."""


@dataclass(frozen=True)
class OutboundMessage:
    recipients: tuple[str, ...]
    subject: str
    body: str
    category: MessageCategory
    created_at: datetime = field(default_factory=utcnow)

    def to_payload(self) -> dict:
        return {
            "recipients": list(self.recipients),
            "subject": self.subject,
            "body": self.body,
            "category": self.category.value,
            "created_at": self.created_at.strftime("%Y-%m-%dT%H:%M:%SZ"),
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "OutboundMessage":
        from .model import parse_instant

        return cls(
            recipients=tuple(payload["recipients"]),
            subject=payload["subject"],
            body=payload["body"],
            category=MessageCategory(payload["category"]),
            created_at=parse_instant(payload["created_at"]),
        )


def _footer(contact: str) -> str:
    return FOOTER.format(contact=contact)


def feedback_body(
    name: str,
    rows: Sequence[tuple[str, bool]],
    points: Fraction,
    total: Fraction,
    percent: int,
    terms: Sequence[Fraction],
    failures: Sequence[tuple[str, str]],
    contact: str,
    style_errors: int = 0,
) -> str:
    """Test-result email: overview table, total mark, failure reports.

    ``rows`` pairs each question name with its pass flag, in assignment
    order; ``terms`` are the per-question point contributions; ``failures``
    pairs failed question names with their traceback text.
    """
    width = max(len(q) for q, _ in rows)
    lines = [
        f"Dear {name},",
        "",
        "Testing of your submitted code has been completed:",
        "",
        "Overview",
        "========",
        "",
    ]
    for question, passed in rows:
        verdict = "passed" if passed else "failed"
        score = 100 if passed else 0
        lines.append(f"{question:<{width}} : {verdict} -> {score:>3}")
    lines.append("")
    lines.append(
        f"Total mark for this assignment: {format_number(points)}"
        f" / {format_number(total)} = {percent}"
    )
    lines.append("")
    term_text = " + ".join(format_number(t) for t in terms)
    lines.append(f"(Points computed as {term_text} = {format_number(points)})")
    if style_errors > 0:
        lines.append("")
        lines.append(f"Style check: {style_errors} PEP 8 issue(s), penalty applied")
    if failures:
        lines.append("")
        lines.append("Test failure report")
        lines.append("====================")
        for question, traceback_text in failures:
            lines.append("")
            lines.append(question)
            lines.append("-" * len(question))
            lines.append(_truncate_traceback(traceback_text))
    lines.append("")
    lines.append(_footer(contact))
    return "\n".join(lines)


def _truncate_traceback(text: str) -> str:
    tb_lines = text.rstrip("\n").splitlines()
    if len(tb_lines) <= TRACEBACK_LINE_LIMIT:
        return "\n".join(tb_lines)
    kept = tb_lines[:TRACEBACK_LINE_LIMIT]
    kept.append(f"[... {len(tb_lines) - TRACEBACK_LINE_LIMIT} more lines omitted ...]")
    return "\n".join(kept)


def receipt_body(
    name: str,
    assignment_key: str,
    filenames: Sequence[str],
    received_at_local: datetime,
    contact: str,
) -> str:
    files = ", ".join(filenames)
    return (
        f"Dear {name},\n"
        "\n"
        f"Your submission for {assignment_key} has been received and has\n"
        "entered the testing queue. All required files were present:\n"
        f"{files}\n"
        "\n"
        f"Received at: {received_at_local:%Y-%m-%d %H:%M:%S}\n"
        "\n"
        "You will get your results and feedback in a separate message\n"
        "shortly.\n"
        "\n" + _footer(contact)
    )


def rejection_body(name: str, explanation: str, contact: str) -> str:
    return (
        f"Dear {name},\n"
        "\n"
        "Your submission could not be accepted:\n"
        "\n"
        f"{explanation}\n"
        "\n"
        "Please correct the problem and re-submit your work.\n"
        "\n" + _footer(contact)
    )


def syntax_invite_body(name: str, assignment_key: str, detail: str, contact: str) -> str:
    lines = [
        f"Dear {name},",
        "",
        f"Your submission for {assignment_key} could not be tested:",
        "importing your file failed, which usually means it contains",
        "a syntax error.",
    ]
    if detail:
        lines += ["", detail.rstrip()]
    lines += [
        "",
        "Please fix the problem and re-submit your work; the new",
        "submission will be tested in full.",
        "",
        _footer(contact),
    ]
    return "\n".join(lines)


def resource_invite_body(name: str, assignment_key: str, contact: str) -> str:
    return (
        f"Dear {name},\n"
        "\n"
        f"Your submission for {assignment_key} could not be tested:\n"
        "your code exceeded the resource limits of the testing\n"
        "environment (for example an unterminated loop, or excessive\n"
        "memory or disk use) and was terminated.\n"
        "\n"
        "Please revise your code and re-submit your work.\n"
        "\n" + _footer(contact)
    )


def encoding_suggestion_body(
    name: str, assignment_key: str, filename: str, contact: str
) -> str:
    return (
        f"Dear {name},\n"
        "\n"
        f"Your submission for {assignment_key} could not be tested:\n"
        f"the file {filename} contains non-ASCII characters but does\n"
        "not declare its character encoding in the first two lines.\n"
        "\n"
        "Please add a declaration such as\n"
        "\n"
        "    # -*- coding: utf-8 -*-\n"
        "\n"
        "at the top of the file and re-submit your work.\n"
        "\n" + _footer(contact)
    )


@dataclass(frozen=True)
class SummaryLine:
    """One assignment row of the weekly summary."""

    assignment_key: str
    mark: int
    late_by: str | None = None  # H:MM:SS, set when the submission was late
    submitted_at_local: datetime | None = None
    missing: bool = False


def _summary_label(key: str) -> str:
    # "lab 4" renders as "lab  4" so the numbers line up through "lab 10"
    head, _, tail = key.rpartition(" ")
    if head and tail.isdigit():
        return f"{head}{int(tail):>3}"
    return key


def weekly_summary_body(
    name: str,
    course_code: str,
    as_of_local: datetime,
    lines: Sequence[SummaryLine],
    average: int | None,
    contact: str,
) -> str:
    as_of_text = (
        f"{as_of_local:%a} {as_of_local:%b} {as_of_local.day:2d} "
        f"{as_of_local:%H:%M:%S} {as_of_local:%Y}"
    )
    out = [
        f"Dear {name},",
        "",
        "Please find below your summary of submissions and",
        "preliminary marks for the weekly laboratory sessions",
        f"for course {course_code}, as of {as_of_text}.",
        "",
    ]
    indent = " " * 26
    if not lines:
        out.append("No assignment deadlines have passed yet, so there are")
        out.append("no marks to report.")
    for line in lines:
        out.append(f"{_summary_label(line.assignment_key)} : {line.mark:>3}")
        if line.missing:
            out.append(f"{indent}no submission received")
        elif line.late_by is not None:
            out.append(f"{indent}at {line.submitted_at_local:%Y-%m-%d %H:%M:%S} was")
            out.append(f"{indent}late by {line.late_by}.")
        else:
            out.append(f"{indent}submitted before deadline")
    out.append("")
    if average is not None:
        out.append(f"The average mark over the listed labs is {average}")
        out.append("")
    out.append("With kind regards,")
    out.append("")
    out.append(f"The teaching team ({contact})")
    return "\n".join(out)


def reminder_body(name: str, course_code: str, contact: str) -> str:
    return (
        f"Dear {name},\n"
        "\n"
        f"Our records show no submissions from you for course {course_code}\n"
        "so far. Please submit your work for the exercises that have been\n"
        "set; the instructions explain how to do this by email.\n"
        "\n"
        "If you are experiencing problems with the exercises or with the\n"
        f"submission system, please contact the course leader ({contact}),\n"
        "who will be happy to help.\n"
        "\n"
        "With kind regards,\n"
        "\n"
        f"The teaching team ({contact})"
    )


def admin_alert_body(summary: str, detail: str = "") -> str:
    body = summary
    if detail:
        body += "\n\n" + detail.rstrip()
    return body


def render_message(kind: MessageCategory, context: dict) -> OutboundMessage:
    """Build an OutboundMessage from a context dict.

    Raises KeyError when a required context field is missing.
    """
    contact = context["contact"]
    if kind is MessageCategory.FEEDBACK:
        body = feedback_body(
            name=context["name"],
            rows=context["rows"],
            points=context["points"],
            total=context["total"],
            percent=context["percent"],
            terms=context["terms"],
            failures=context["failures"],
            style_errors=context.get("style_errors", 0),
            contact=contact,
        )
        subject = f"Results for {context['assignment_key']}"
    elif kind is MessageCategory.RECEIPT:
        body = receipt_body(
            name=context["name"],
            assignment_key=context["assignment_key"],
            filenames=context["filenames"],
            received_at_local=context["received_at_local"],
            contact=contact,
        )
        subject = f"Submission received: {context['assignment_key']}"
    elif kind is MessageCategory.REJECTION:
        body = rejection_body(context["name"], context["explanation"], contact)
        subject = "Problem with your submission"
    elif kind is MessageCategory.INVITE:
        reason = context["reason"]
        if reason == "syntax":
            body = syntax_invite_body(
                context["name"], context["assignment_key"],
                context.get("detail", ""), contact,
            )
        elif reason == "resource":
            body = resource_invite_body(
                context["name"], context["assignment_key"], contact
            )
        elif reason == "encoding":
            body = encoding_suggestion_body(
                context["name"], context["assignment_key"],
                context["filename"], contact,
            )
        else:
            raise ValueError(f"unknown invite reason {reason!r}")
        subject = f"Please re-submit: {context['assignment_key']}"
    elif kind is MessageCategory.WEEKLY_SUMMARY:
        if not context["lines"] and not context.get("has_submissions", False):
            return render_message(MessageCategory.REMINDER, context)
        body = weekly_summary_body(
            name=context["name"],
            course_code=context["course_code"],
            as_of_local=context["as_of_local"],
            lines=context["lines"],
            average=context["average"],
            contact=contact,
        )
        subject = f"Weekly summary for course {context['course_code']}"
    elif kind is MessageCategory.REMINDER:
        body = reminder_body(context["name"], context["course_code"], contact)
        subject = f"Course {context['course_code']}: please submit your work"
    elif kind is MessageCategory.ADMIN_ALERT:
        body = admin_alert_body(context["summary"], context.get("detail", ""))
        subject = f"[gradepipe] {context['summary']}"
    else:
        raise ValueError(f"no template for message kind {kind}")
    return OutboundMessage(
        recipients=tuple(context["recipients"]),
        subject=subject,
        body=body,
        category=kind,
    )
