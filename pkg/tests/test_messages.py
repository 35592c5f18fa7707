from __future__ import annotations

from datetime import datetime
from fractions import Fraction

import pytest

from gradepipe.messages import (
    OutboundMessage,
    SummaryLine,
    feedback_body,
    render_message,
    weekly_summary_body,
)
from gradepipe.model import MessageCategory

CONTACT = "course-help@uni.email.address"

ALL_PASS_BODY = """\
Dear Neil O'Brien,

Testing of your submitted code has been completed:

Overview
========

test_distance       : passed -> 100
test_geometric_mean : passed -> 100
test_pyramid_volume : passed -> 100

Total mark for this assignment: 3 / 3 = 100

(Points computed as 1 + 1 + 1 = 3)

-----------------------------------------------

This message has been generated  automatically. Should
you feel that you observe a malfunction of the system,
or if you wish to speak to a human, please contact the
course team (course-help@uni.email.address)."""

TRACEBACK = """\
def test_pyramid_volume():

    # if height h is zero, expect volume zero
    assert s.pyramid_volume(1.0, 0.0) == 0.

    # tolerance for floating point answers
    eps = 1e-14

    # if we have base area A=1, height h=1,
    # we expect a volume of 1/3.:
    assert abs(s.pyramid_volume(1., 1.) - 1./3.) < eps

    # another example
    h = 2.
    A = 4.
    assert abs(s.pyramid_volume(A, h) -
               correct_pyramid_volume(A, h)) < eps

    # does this also work if arguments are integers?
>   assert abs(s.pyramid_volume(1, 1) - 1. / 3.) < eps
E   assert 0.3333333333333333 < 1e-14
E    + where 0.3333333333333333 = abs((0 - (1.0/3.0)))"""

ONE_FAIL_BODY = f"""\
Dear Neil O'Brien,

Testing of your submitted code has been completed:

Overview
========

test_distance       : passed -> 100
test_geometric_mean : passed -> 100
test_pyramid_volume : failed ->   0

Total mark for this assignment: 2 / 3 = 67

(Points computed as 1 + 1 + 0 = 2)

Test failure report
====================

test_pyramid_volume
-------------------
{TRACEBACK}

-----------------------------------------------

This message has been generated  automatically. Should
you feel that you observe a malfunction of the system,
or if you wish to speak to a human, please contact the
course team (course-help@uni.email.address)."""

WEEKLY_BODY = """\
Dear Neil O'Brien,

Please find below your summary of submissions and
preliminary marks for the weekly laboratory sessions
for course ABC, as of Fri Jan 30 17:06:44 2015.

lab  2 :  25
                          submitted before deadline
lab  3 :  31
                          submitted before deadline
lab  4 :   0
                          at 2014-11-14 20:39:02 was
                          late by 4:39:02.
lab  5 :  80
                          submitted before deadline
lab  6 :  77
                          submitted before deadline
lab  7 :  75
                          submitted before deadline

The average mark over the listed labs is 48

With kind regards,

The teaching team (course-help@uni.email.address)"""


def one(n):
    return Fraction(n)


class TestFeedbackBody:
    def test_all_pass_exact(self):
        body = feedback_body(
            name="Neil O'Brien",
            rows=[("test_distance", True), ("test_geometric_mean", True),
                  ("test_pyramid_volume", True)],
            points=one(3),
            total=one(3),
            percent=100,
            terms=[one(1), one(1), one(1)],
            failures=[],
            contact=CONTACT,
        )
        assert body == ALL_PASS_BODY

    def test_one_fail_exact(self):
        body = feedback_body(
            name="Neil O'Brien",
            rows=[("test_distance", True), ("test_geometric_mean", True),
                  ("test_pyramid_volume", False)],
            points=one(2),
            total=one(3),
            percent=67,
            terms=[one(1), one(1), one(0)],
            failures=[("test_pyramid_volume", TRACEBACK)],
            contact=CONTACT,
        )
        assert body == ONE_FAIL_BODY

    def test_style_penalty_line(self):
        body = feedback_body(
            name="A",
            rows=[("test_a", True)],
            points=one(1),
            total=one(1),
            percent=50,
            terms=[one(1)],
            failures=[],
            contact=CONTACT,
            style_errors=1,
        )
        assert "Style check: 1 PEP 8 issue(s), penalty applied" in body

    def test_weighted_terms(self):
        body = feedback_body(
            name="A",
            rows=[("test_a", True), ("test_b", False)],
            points=one(2),
            total=one(3),
            percent=67,
            terms=[one(2), one(0)],
            failures=[],
            contact=CONTACT,
        )
        assert "(Points computed as 2 + 0 = 2)" in body

    def test_long_traceback_truncated(self):
        tb = "\n".join(f"line {i}" for i in range(400))
        body = feedback_body(
            name="A",
            rows=[("test_a", False)],
            points=one(0),
            total=one(1),
            percent=0,
            terms=[one(0)],
            failures=[("test_a", tb)],
            contact=CONTACT,
        )
        assert "line 199" in body
        assert "line 200" not in body
        assert "200 more lines omitted" in body


class TestWeeklySummary:
    def test_published_layout_exact(self):
        lines = [
            SummaryLine("lab 2", 25),
            SummaryLine("lab 3", 31),
            SummaryLine("lab 4", 0, late_by="4:39:02",
                        submitted_at_local=datetime(2014, 11, 14, 20, 39, 2)),
            SummaryLine("lab 5", 80),
            SummaryLine("lab 6", 77),
            SummaryLine("lab 7", 75),
        ]
        body = weekly_summary_body(
            name="Neil O'Brien",
            course_code="ABC",
            as_of_local=datetime(2015, 1, 30, 17, 6, 44),
            lines=lines,
            average=48,
            contact=CONTACT,
        )
        assert body == WEEKLY_BODY

    def test_two_digit_label_alignment(self):
        body = weekly_summary_body(
            name="A", course_code="ABC",
            as_of_local=datetime(2015, 1, 30, 17, 6, 44),
            lines=[SummaryLine("lab 10", 99)],
            average=99, contact=CONTACT,
        )
        assert "lab 10 :  99" in body

    def test_single_digit_day_padded_like_ctime(self):
        body = weekly_summary_body(
            name="A", course_code="ABC",
            as_of_local=datetime(2015, 1, 5, 8, 6, 4),
            lines=[], average=None, contact=CONTACT,
        )
        assert "as of Mon Jan  5 08:06:04 2015." in body

    def test_no_deadlines_passed_variant(self):
        body = weekly_summary_body(
            name="A", course_code="ABC",
            as_of_local=datetime(2015, 1, 30, 17, 6, 44),
            lines=[], average=None, contact=CONTACT,
        )
        assert "no marks to report" in body


class TestRenderMessage:
    def _weekly_context(self, lines, has_submissions=False):
        return {
            "recipients": ["x@y"],
            "contact": CONTACT,
            "name": "A",
            "course_code": "ABC",
            "as_of_local": datetime(2015, 1, 30, 17, 6, 44),
            "lines": lines,
            "average": 48 if lines else None,
            "has_submissions": has_submissions,
        }

    def test_weekly_with_marks(self):
        msg = render_message(
            MessageCategory.WEEKLY_SUMMARY,
            self._weekly_context([SummaryLine("lab 2", 48)]),
        )
        assert msg.category is MessageCategory.WEEKLY_SUMMARY
        assert "lab  2 :  48" in msg.body

    def test_weekly_without_any_submissions_becomes_reminder(self):
        msg = render_message(MessageCategory.WEEKLY_SUMMARY, self._weekly_context([]))
        assert msg.category is MessageCategory.REMINDER
        assert "no submissions from you" in msg.body
        assert CONTACT in msg.body

    def test_weekly_no_deadlines_yet_stays_summary(self):
        msg = render_message(
            MessageCategory.WEEKLY_SUMMARY,
            self._weekly_context([], has_submissions=True),
        )
        assert msg.category is MessageCategory.WEEKLY_SUMMARY
        assert "no marks to report" in msg.body

    def test_missing_context_field_rejected(self):
        with pytest.raises(KeyError):
            render_message(
                MessageCategory.REJECTION,
                {"recipients": ["x@y"], "contact": CONTACT, "name": "A"},
            )

    @pytest.mark.parametrize("reason", ["syntax", "resource", "encoding"])
    def test_invites(self, reason):
        context = {
            "recipients": ["x@y"],
            "contact": CONTACT,
            "name": "A",
            "assignment_key": "lab 4",
            "reason": reason,
            "detail": "SyntaxError: invalid syntax",
            "filename": "lab4.py",
        }
        msg = render_message(MessageCategory.INVITE, context)
        assert "re-submit" in msg.body
        assert msg.subject == "Please re-submit: lab 4"

    def test_round_trips_through_payload(self):
        msg = render_message(
            MessageCategory.ADMIN_ALERT,
            {"recipients": ["admin@y"], "contact": CONTACT,
             "summary": "stale lock on queue testing", "detail": "age 0:31:00"},
        )
        again = OutboundMessage.from_payload(msg.to_payload())
        assert again == msg
