"""Pure scoring arithmetic: marks, style penalty, averages, lateness.

All percentages are integers rounded to nearest, with ties rounded away
from zero (2/3 of 100 prints as 67). Fractions keep the arithmetic exact
until the final rounding step.
"""

from __future__ import annotations

from datetime import datetime, timedelta
from fractions import Fraction
from typing import Iterable, Sequence

from .model import StylePolicy

Number = int | float | Fraction


def round_half_away_from_zero(value: Number) -> int:
    """Round to the nearest integer; ties go away from zero."""
    frac = Fraction(value)
    if frac >= 0:
        return int((2 * frac + 1) // 2)
    return -int((2 * -frac + 1) // 2)


def compute_assignment_mark(
    results: Sequence[tuple[Number, bool]],
) -> tuple[Fraction, Fraction, int]:
    """Combine weighted per-question pass/fail results.

    Returns (points, total, percent) where points is the sum of the
    weights of the passed questions and percent = 100 * points / total,
    rounded half away from zero.
    """
    if not results:
        raise ValueError("cannot mark an empty result list")
    weights = [Fraction(w) for w, _ in results]
    if any(w <= 0 for w in weights):
        raise ValueError("question weights must be positive")
    points = sum((w for w, (_, p) in zip(weights, results) if p), Fraction(0))
    total = sum(weights, Fraction(0))
    percent = round_half_away_from_zero(100 * points / total)
    return points, total, percent


def apply_style_penalty(
    raw_percent: int,
    n_err: int,
    policy: StylePolicy,
    base: int = 2,
) -> int:
    """Scale a percent mark by base**(-n_err) when the policy penalizes."""
    if not 0 <= raw_percent <= 100:
        raise ValueError("raw_percent must lie in [0, 100]")
    if n_err < 0:
        raise ValueError("n_err must be non-negative")
    if policy is StylePolicy.OFF or n_err == 0:
        return raw_percent
    return round_half_away_from_zero(Fraction(raw_percent, base**n_err))


def compute_average(marks: Iterable[int]) -> int:
    """Mean of integer marks, rounded half away from zero."""
    marks = list(marks)
    if not marks:
        raise ValueError("cannot average an empty mark list")
    return round_half_away_from_zero(Fraction(sum(marks), len(marks)))


def compute_lateness(deadline: datetime, submitted_at: datetime) -> timedelta | None:
    """How late a submission is, or None when on time.

    Submitting exactly at the deadline counts as on time.
    """
    if submitted_at <= deadline:
        return None
    return submitted_at - deadline


def format_lateness(delta: timedelta) -> str:
    """Render a positive duration as H:MM:SS with unpadded, unbounded hours."""
    seconds = int(delta.total_seconds())
    if seconds < 0:
        raise ValueError("lateness must be non-negative")
    hours, rest = divmod(seconds, 3600)
    minutes, secs = divmod(rest, 60)
    return f"{hours}:{minutes:02d}:{secs:02d}"


def format_number(value: Fraction) -> str:
    """Render a Fraction the way a human writes marks: 3, 2.5, 1/3."""
    if value.denominator == 1:
        return str(value.numerator)
    as_float = float(value)
    if Fraction(str(as_float)) == value:
        return str(as_float)
    return f"{value.numerator}/{value.denominator}"
