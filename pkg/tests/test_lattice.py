import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latticebounds.lattice import (
    DimensionMismatch,
    EmptySet,
    NotClosed,
    Relation,
    close_under_meet_join,
    compare,
    enumerate_diamonds,
    grid_lattice,
    incomparable,
    join,
    leq,
    meet,
    validate_lattice,
)


class TestCompare:
    def test_dominance(self):
        assert compare((0, 0), (1, 1)) is Relation.LESS

    def test_incomparable(self):
        assert compare((1, 0), (0, 1)) is Relation.INCOMPARABLE

    def test_equal_reported_distinctly(self):
        assert compare((2, 0), (2, 0)) is Relation.EQUAL

    def test_greater(self):
        assert compare((3, 1), (2, 1)) is Relation.GREATER

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            compare((1, 2), (1, 2, 3))


class TestMeetJoin:
    def test_join_picks_componentwise_max(self):
        assert join((2, 0), (1, 1)) == (2, 1)

    def test_meet_picks_componentwise_min(self):
        assert meet((1, 0), (0, 1)) == (0, 0)

    def test_idempotent(self):
        assert meet((3, 2), (3, 2)) == (3, 2)
        assert join((3, 2), (3, 2)) == (3, 2)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            meet((1,), (1, 2))


class TestValidateLattice:
    def test_full_two_by_two(self):
        lat = validate_lattice([(0, 0), (1, 0), (0, 1), (1, 1)])
        assert len(lat) == 4
        assert lat.dimension == 2

    def test_missing_join_named(self):
        with pytest.raises(NotClosed) as exc:
            validate_lattice([(0, 0), (1, 0), (0, 1)])
        assert exc.value.pair == ((0, 1), (1, 0))
        assert exc.value.missing == (1, 1)

    def test_two_by_four_grid(self):
        lat = grid_lattice([[0, 1], [1, 2, 3, 4]])
        assert len(lat) == 8
        revalidated = validate_lattice(lat.points)
        assert revalidated.points == lat.points

    def test_empty_rejected(self):
        with pytest.raises(EmptySet):
            validate_lattice([])

    def test_points_sorted_and_deduplicated(self):
        lat = validate_lattice([(1, 1), (0, 0), (1, 0), (0, 1), (0, 0)])
        assert lat.points == ((0, 0), (0, 1), (1, 0), (1, 1))


class TestEnumerateDiamonds:
    def test_two_by_two_has_single_diamond(self):
        lat = grid_lattice([[0, 1], [0, 1]])
        diamonds = enumerate_diamonds(lat)
        assert len(diamonds) == 1
        d = diamonds[0]
        assert d.bottom == (0, 0)
        assert d.top == (1, 1)
        assert {d.left, d.right} == {(0, 1), (1, 0)}
        assert d.id == 0

    def test_two_by_four_has_six_diamonds(self):
        lat = grid_lattice([[0, 1], [1, 2, 3, 4]])
        diamonds = enumerate_diamonds(lat)
        # Independent count: scan all unordered pairs for incomparability
        # with meet/join distinct from both members.
        expected = 0
        for a, b in itertools.combinations(lat.points, 2):
            if incomparable(a, b):
                m, j = meet(a, b), join(a, b)
                if m not in (a, b) and j not in (a, b):
                    expected += 1
        assert expected == 6
        assert len(diamonds) == 6

    def test_chain_has_no_diamonds(self):
        lat = validate_lattice([(0,), (1,), (2,)])
        assert enumerate_diamonds(lat) == ()

    def test_ids_stable_and_lexicographic(self):
        lat = grid_lattice([[0, 1], [1, 2, 3, 4]])
        diamonds = enumerate_diamonds(lat)
        keys = [(d.bottom, d.top, d.left) for d in diamonds]
        assert keys == sorted(keys)
        assert [d.id for d in diamonds] == list(range(6))

    def test_diamond_structure(self):
        for lat in (grid_lattice([[0, 1], [0, 1, 2]]), grid_lattice([[0, 1]] * 3)):
            for d in enumerate_diamonds(lat):
                assert incomparable(d.left, d.right)
                assert meet(d.left, d.right) == d.bottom
                assert join(d.left, d.right) == d.top
                assert len(d.members) == 4
                assert all(p in lat for p in d.members)


points_2d = st.tuples(st.integers(0, 3), st.integers(0, 3))
points_3d = st.tuples(st.integers(0, 2), st.integers(0, 2), st.integers(0, 2))


@settings(max_examples=200, derandomize=True)
@given(a=points_3d, b=points_3d)
def test_meet_join_bracket_both_arguments(a, b):
    m, j = meet(a, b), join(a, b)
    assert leq(m, a) and leq(m, b)
    assert leq(a, j) and leq(b, j)


@settings(max_examples=200, derandomize=True)
@given(pts=st.lists(points_2d, min_size=1, max_size=6))
def test_closure_produces_valid_lattice(pts):
    closed = close_under_meet_join(pts)
    lat = validate_lattice(closed)
    assert set(pts) <= set(lat.points)


@settings(max_examples=300, derandomize=True)
@given(t1=points_3d, t3=points_3d, t5=points_3d)
def test_overlapping_diamonds_share_meet_and_join(t1, t3, t5):
    # Configuration: {t2,t1,t3,t4} and {t3,t4,t5,t6} are stacked diamonds
    # sharing the edge (t3, t4).  Then t5 and t1 must themselves span the
    # outer corners t2 and t6.
    if not incomparable(t1, t3):
        return
    t2, t4 = meet(t1, t3), join(t1, t3)
    if not incomparable(t4, t5):
        return
    if meet(t4, t5) != t3:
        return
    t6 = join(t4, t5)
    assert meet(t5, t1) == t2
    assert join(t5, t1) == t6
