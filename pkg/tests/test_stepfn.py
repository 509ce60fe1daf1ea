import math

import pytest
from hypothesis import given, strategies as st

from ecosched.stepfn import StepFunction, integrate, pointwise_sum


def const(v, a, b):
    return StepFunction.constant(v, a, b)


class TestIntegrate:
    def test_full_overlap(self):
        assert integrate(const(2.0, 0, 1), 0, 1) == 2.0

    def test_partial_overlap(self):
        assert integrate(const(2.0, 0, 1), 0.5, 3) == 1.0

    def test_empty_interval_is_zero(self):
        assert integrate(const(5.0, 0, 2), 1.3, 1.3) == 0.0

    def test_reversed_bounds_rejected(self):
        with pytest.raises(ValueError):
            integrate(const(1.0, 0, 1), 2, 1)

    def test_additive_over_adjacent_intervals(self):
        f = StepFunction.from_segments([(0, 1, 2.0), (1, 3, 0.5), (4, 5, 1.0)])
        whole = integrate(f, 0, 5)
        assert whole == pytest.approx(integrate(f, 0, 2.2) + integrate(f, 2.2, 5))


class TestPointwiseSum:
    def test_empty_sum_is_zero_function(self):
        z = pointwise_sum([])
        assert z.is_zero()
        assert z.value_at(17.0) == 0.0

    def test_overlapping_pair(self):
        s = pointwise_sum([const(1.0, 0, 2), const(1.0, 1, 3)])
        assert list(s.segments()) == [(0, 1, 1.0), (1, 2, 2.0), (2, 3, 1.0)]

    def test_reversed_list_gives_identical_canonical_form(self):
        fs = [const(0.3, 0, 5), const(1.7, 2, 3), const(0.11, 1, 4)]
        assert pointwise_sum(fs) == pointwise_sum(list(reversed(fs)))

    def test_singleton_round_trip(self):
        f = StepFunction.from_segments([(0, 1, 1.0), (2, 3, 4.0)])
        assert pointwise_sum([f]) == f


class TestCanonicalForm:
    def test_equal_neighbours_merged(self):
        f = pointwise_sum([const(1.0, 0, 1), const(1.0, 1, 2)])
        assert f.breakpoints == (0, 2)

    def test_zero_edges_stripped(self):
        f = const(2.0, 1, 2).minus(const(2.0, 1, 2))
        assert f.is_zero()

    def test_rejects_negative_values(self):
        with pytest.raises(ValueError):
            StepFunction((0.0, 1.0), (-1.0,))

    def test_rejects_unsorted_breakpoints(self):
        with pytest.raises(ValueError):
            StepFunction((1.0, 0.0), (2.0,))


class TestQueries:
    def test_value_at_is_right_continuous(self):
        f = StepFunction.from_segments([(0, 1, 2.0), (1, 2, 3.0)])
        assert f.value_at(1.0) == 3.0
        assert f.value_at(2.0) == 0.0
        assert f.value_at(-0.5) == 0.0

    def test_min_on_counts_gaps_as_zero(self):
        f = const(2.0, 0, 1)
        assert f.min_on(0, 1) == 2.0
        assert f.min_on(0, 1.5) == 0.0
        assert f.min_on(-1, 0.5) == 0.0

    def test_support_measure(self):
        f = StepFunction.from_segments([(0, 1, 2.0), (3, 4, 1.0)])
        assert f.support_measure() == pytest.approx(2.0)

    def test_minus_clamps_at_zero(self):
        d = const(1.0, 0, 1).minus(const(3.0, 0, 2))
        assert d.is_zero()

    def test_sup_norm_diff(self):
        a = const(1.0, 0, 2)
        b = const(1.5, 1, 2)
        assert a.sup_norm_diff(b) == pytest.approx(1.0)


@st.composite
def step_functions(draw):
    triples = draw(
        st.lists(
            st.tuples(
                st.floats(0.0, 5.0),  # gap before the piece
                st.floats(0.1, 10.0),  # piece width
                st.floats(0.0, 50.0, allow_nan=False),
            ),
            max_size=6,
        )
    )
    segs = []
    t = 0.0
    for gap, width, value in triples:
        t += gap
        segs.append((t, t + width, value))
        t += width
    return StepFunction.from_segments(segs)


@given(step_functions())
def test_round_trip_through_sum(f):
    assert pointwise_sum([f]) == f


@given(step_functions(), st.floats(0, 500), st.floats(0, 500), st.floats(0, 500))
def test_integral_additivity(f, a, b, c):
    lo, mid, hi = sorted([a, b, c])
    total = integrate(f, lo, hi)
    split = integrate(f, lo, mid) + integrate(f, mid, hi)
    assert math.isclose(total, split, rel_tol=1e-12, abs_tol=1e-12)


@given(st.lists(step_functions(), max_size=4), st.floats(0, 500))
def test_sum_matches_pointwise_values(fs, t):
    s = pointwise_sum(fs)
    assert math.isclose(
        s.value_at(t), math.fsum(f.value_at(t) for f in fs), abs_tol=1e-12
    )
