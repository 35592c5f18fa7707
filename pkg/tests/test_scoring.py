from __future__ import annotations

from datetime import datetime, timedelta, timezone
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from gradepipe.model import StylePolicy
from gradepipe.scoring import (
    apply_style_penalty,
    compute_assignment_mark,
    compute_average,
    compute_lateness,
    format_lateness,
    format_number,
    round_half_away_from_zero,
)


def _utc(*args):
    return datetime(*args, tzinfo=timezone.utc)


class TestRounding:
    @pytest.mark.parametrize(
        "value,expected",
        [
            (Fraction(200, 3), 67),
            (Fraction(25, 2), 13),
            (Fraction(3, 2), 2),
            (Fraction(1, 2), 1),
            (Fraction(-1, 2), -1),
            (0, 0),
            (100, 100),
            (66.4, 66),
        ],
    )
    def test_half_away_from_zero(self, value, expected):
        assert round_half_away_from_zero(value) == expected


class TestAssignmentMark:
    def test_all_pass_equal_weights(self):
        points, total, percent = compute_assignment_mark(
            [(1, True), (1, True), (1, True)]
        )
        assert (points, total, percent) == (3, 3, 100)

    def test_one_fail_equal_weights(self):
        points, total, percent = compute_assignment_mark(
            [(1, True), (1, True), (1, False)]
        )
        assert (points, total, percent) == (2, 3, 67)

    def test_weighted(self):
        points, total, percent = compute_assignment_mark([(2, False), (1, True)])
        assert (points, total, percent) == (1, 3, 33)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            compute_assignment_mark([])

    def test_non_positive_weight_rejected(self):
        with pytest.raises(ValueError):
            compute_assignment_mark([(0, True)])

    @given(
        st.lists(
            st.tuples(st.fractions(min_value=Fraction(1, 100), max_value=100),
                      st.booleans()),
            min_size=1,
            max_size=12,
        ),
        st.randoms(),
    )
    def test_permutation_invariant(self, results, rng):
        _, _, before = compute_assignment_mark(results)
        shuffled = list(results)
        rng.shuffle(shuffled)
        _, _, after = compute_assignment_mark(shuffled)
        assert before == after

    @given(
        st.lists(
            st.tuples(st.fractions(min_value=Fraction(1, 100), max_value=100),
                      st.booleans()),
            min_size=1,
            max_size=12,
        ),
        st.fractions(min_value=Fraction(1, 7), max_value=50),
    )
    def test_scale_invariant(self, results, scale):
        _, _, before = compute_assignment_mark(results)
        scaled = [(w * scale, p) for w, p in results]
        _, _, after = compute_assignment_mark(scaled)
        assert before == after

    @given(
        st.lists(st.fractions(min_value=Fraction(1, 100), max_value=100),
                 min_size=1, max_size=12)
    )
    def test_all_pass_is_100_all_fail_is_0(self, weights):
        _, _, all_pass = compute_assignment_mark([(w, True) for w in weights])
        _, _, all_fail = compute_assignment_mark([(w, False) for w in weights])
        assert all_pass == 100
        assert all_fail == 0


class TestStylePenalty:
    @pytest.mark.parametrize(
        "raw,n_err,expected",
        [(80, 0, 80), (80, 1, 40), (100, 3, 13), (0, 5, 0), (100, 0, 100)],
    )
    def test_penalize_base_2(self, raw, n_err, expected):
        assert apply_style_penalty(raw, n_err, StylePolicy.PENALIZE, base=2) == expected

    def test_policy_off_is_identity(self):
        assert apply_style_penalty(73, 9, StylePolicy.OFF) == 73

    @given(st.integers(min_value=0, max_value=100), st.integers(min_value=0, max_value=20))
    def test_never_exceeds_raw(self, raw, n_err):
        assert apply_style_penalty(raw, n_err, StylePolicy.PENALIZE) <= raw

    @given(st.integers(min_value=0, max_value=100), st.integers(min_value=0, max_value=19))
    def test_monotone_in_n_err(self, raw, n_err):
        worse = apply_style_penalty(raw, n_err + 1, StylePolicy.PENALIZE)
        better = apply_style_penalty(raw, n_err, StylePolicy.PENALIZE)
        assert worse <= better


class TestAverage:
    def test_published_example(self):
        assert compute_average([25, 31, 0, 80, 77, 75]) == 48

    def test_singleton(self):
        assert compute_average([100]) == 100

    def test_tie_rounds_up(self):
        assert compute_average([1, 2]) == 2

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            compute_average([])


class TestLateness:
    def test_published_example(self):
        delta = compute_lateness(_utc(2014, 11, 14, 16, 0, 0), _utc(2014, 11, 14, 20, 39, 2))
        assert delta is not None
        assert format_lateness(delta) == "4:39:02"

    def test_exactly_on_deadline_is_on_time(self):
        d = _utc(2014, 11, 14, 16, 0, 0)
        assert compute_lateness(d, d) is None

    def test_one_second_early_is_on_time(self):
        d = _utc(2014, 11, 14, 16, 0, 0)
        assert compute_lateness(d, d - timedelta(seconds=1)) is None

    def test_hours_unbounded_and_unpadded(self):
        assert format_lateness(timedelta(days=1, hours=4, minutes=5, seconds=9)) == "28:05:09"
        assert format_lateness(timedelta(seconds=59)) == "0:00:59"


class TestFormatNumber:
    @pytest.mark.parametrize(
        "value,expected",
        [(Fraction(3), "3"), (Fraction(5, 2), "2.5"), (Fraction(1, 3), "1/3")],
    )
    def test_render(self, value, expected):
        assert format_number(value) == expected
