"""Submission statistics: per-student count histograms and timelines."""

from __future__ import annotations

from collections import Counter
from datetime import datetime
from typing import Sequence


def submission_histogram(
    log: Sequence[tuple[str, str]],
    assignment_key: str,
) -> dict[int, int]:
    """Distribution of submission counts per student for one assignment.

    ``log`` holds (student_id, assignment_key) events. Bin k of the result
    holds the number of students who submitted exactly k times; the sum
    over all bins is the number of distinct participating students.
    """
    per_student = Counter(s for s, a in log if a == assignment_key)
    bins: Counter[int] = Counter(per_student.values())
    return dict(sorted(bins.items()))


Series = list[tuple[datetime, int]]


def submission_timelines(
    events: Sequence[tuple[datetime, str]],
) -> tuple[Series, Series]:
    """Cumulative (unique, nonunique) submission counts over time.

    The nonunique series gains a point at every event; the unique series
    only at a student's first event. Events are ordered by instant with
    ties broken by input order.
    """
    ordered = sorted(enumerate(events), key=lambda item: (item[1][0], item[0]))
    unique: Series = []
    nonunique: Series = []
    seen: set[str] = set()
    for _, (instant, student) in ordered:
        nonunique.append((instant, len(nonunique) + 1))
        if student not in seen:
            seen.add(student)
            unique.append((instant, len(seen)))
    return unique, nonunique
