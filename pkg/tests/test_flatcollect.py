import random
from fractions import Fraction

import pytest

from flatbeck.flats import AffineFlat, join
from flatbeck.flatcollect import (
    FlatCollection,
    NotNonConcentrated,
    PartitionSpaceTooLarge,
    bell_number,
    find_minimal_subfamily,
    is_minimal,
    iter_partitions,
    normalize_partition,
)


def line(base, direction):
    return AffineFlat(base, [direction])


X_AXIS2 = line([0, 0], [1, 0])
Y_AXIS2 = line([0, 0], [0, 1])


class TestPartitionEnumeration:
    def test_counts_match_bell_numbers(self):
        for m in range(7):
            assert len(list(iter_partitions(m))) == bell_number(m)

    def test_partitions_are_canonical_and_distinct(self):
        got = list(iter_partitions(4))
        assert len(set(got)) == len(got)
        for p in got:
            assert p == normalize_partition(p, 4)

    def test_normalize_rejects_overlap(self):
        with pytest.raises(ValueError):
            normalize_partition([[0, 1], [1, 2]], 3)

    def test_normalize_rejects_gap(self):
        with pytest.raises(ValueError):
            normalize_partition([[0], [2]], 3)


class TestCost:
    def test_two_axes_either_partition_costs_two(self):
        v = FlatCollection([X_AXIS2, Y_AXIS2])
        assert v.cost_of_partition([[0], [1]]) == 2
        assert v.cost_of_partition([[0, 1]]) == 2

    def test_single_flat_partition(self):
        v = FlatCollection([line([0, 0, 0], [1, 2, 0])])
        assert v.cost_of_partition([[0]]) == 1

    def test_empty_collection_costs_zero(self):
        assert FlatCollection([]).cost() == 0

    def test_two_axes_cost(self):
        assert FlatCollection([X_AXIS2, Y_AXIS2]).cost() == 2

    def test_one_line_in_q3(self):
        assert FlatCollection([line([0, 0, 0], [1, 0, 0])]).cost() == 1

    def test_cap_enforced(self):
        pts = [AffineFlat.point([i, 0]) for i in range(5)]
        with pytest.raises(PartitionSpaceTooLarge):
            FlatCollection(pts, cap=4).cost()

    def test_monotone_under_extension(self):
        rng = random.Random(11)
        flats = []
        for _ in range(5):
            d = [Fraction(rng.randint(-3, 3)) for _ in range(3)]
            if all(x == 0 for x in d):
                d = [Fraction(1), Fraction(0), Fraction(0)]
            b = [Fraction(rng.randint(-3, 3)) for _ in range(3)]
            flats.append(line(b, d))
        prev = FlatCollection([])
        for f in flats:
            ext = prev.extended(f)
            assert ext.cost() >= prev.cost()
            prev = ext


class TestCensus:
    def test_two_axes_census(self):
        n, parts = FlatCollection([X_AXIS2, Y_AXIS2]).minimizing_census()
        assert n == 2
        assert ((0,), (1,)) in parts and ((0, 1),) in parts

    def test_single_flat(self):
        n, parts = FlatCollection([X_AXIS2]).minimizing_census()
        assert n == 1 and parts == [((0,),)]

    def test_two_identical_lines(self):
        # both on the x-axis: merged partition costs 1, split costs 2
        v = FlatCollection([X_AXIS2, line([1, 0], [2, 0])])
        n, parts = v.minimizing_census()
        assert v.cost() == 1
        assert n == 1 and parts == [((0, 1),)]


class TestIsNC:
    def test_two_axes_nc_in_plane(self):
        assert FlatCollection([X_AXIS2, Y_AXIS2]).is_nc()

    def test_single_line_not_nc_in_plane(self):
        assert not FlatCollection([X_AXIS2]).is_nc()

    def test_three_generic_lines_in_q3(self):
        l1 = line([0, 0, 0], [1, 0, 0])
        l2 = line([0, 1, 0], [0, 0, 1])
        l3 = line([1, 0, 1], [0, 1, 0])
        v = FlatCollection([l1, l2, l3])
        assert v.is_nc() == (v.cost() >= 3)
        assert v.is_nc()

    def test_nc_implies_dimension_sum(self):
        v = FlatCollection([X_AXIS2, Y_AXIS2])
        if v.is_nc():
            assert sum(f.dim for f in v.flats) >= 2


class TestIsMinimal:
    def test_three_pairwise_skew_lines_q3(self):
        l1 = line([0, 0, 0], [1, 0, 0])
        l2 = line([0, 1, 0], [0, 0, 1])
        l3 = line([1, 0, 1], [0, 1, 0])
        assert is_minimal([l1, l2, l3])

    def test_two_intersecting_lines_q3_not_minimal(self):
        l1 = line([0, 0, 0], [1, 0, 0])
        l2 = line([0, 0, 0], [0, 1, 0])
        # spans only a plane: the full-join condition fails
        assert not is_minimal([l1, l2])

    def test_full_space_alone_is_minimal(self):
        assert is_minimal([AffineFlat.full_space(3)])

    def test_three_coplanar_lines_break_proper_subfamily_condition(self):
        l1 = line([0, 0, 0], [1, 0, 0])
        l2 = line([0, 0, 0], [0, 1, 0])
        l3 = line([1, 1, 0], [1, -1, 0])  # all three in the plane z = 0
        l4 = line([0, 0, 1], [0, 1, 1])
        assert join([l1, l2, l3, l4]).dim == 3  # full-join condition holds
        # but {l1, l2, l3} joins to dimension 2 < 3
        assert not is_minimal([l1, l2, l3, l4])


class TestFindMinimalSubfamily:
    def three_skew_lines(self):
        return [
            line([0, 0, 0], [1, 0, 0]),
            line([0, 1, 0], [0, 0, 1]),
            line([1, 0, 1], [0, 1, 0]),
        ]

    def test_trivial_partition_of_minimal_collection(self):
        v = FlatCollection(self.three_skew_lines())
        got = find_minimal_subfamily([[0], [1], [2]], v)
        assert got == (0, 1, 2)

    def test_coplanar_pair_found(self):
        l1 = line([0, 0, 0], [1, 0, 0])
        l2 = line([0, 0, 0], [0, 1, 0])  # meets l1: joint span is a plane
        l3 = line([0, 0, 1], [0, 1, 1])
        l4 = line([1, 1, 1], [1, 1, 0])
        v = FlatCollection([l1, l2, l3, l4])
        assert v.is_nc()
        got = find_minimal_subfamily([[0], [1], [2], [3]], v)
        assert got == (0, 1)
        joined = [v.flats[i] for i in got]
        # the found subfamily is minimal inside its own span
        assert is_minimal(joined, ambient_dim=join(joined).dim)

    def test_requires_nc(self):
        v = FlatCollection([X_AXIS2])
        with pytest.raises(NotNonConcentrated):
            find_minimal_subfamily([[0]], v)

    def test_randomized_subfamilies_are_minimal_inside_their_span(self):
        from flatbeck.genscenes import nc_line_collection

        rng = random.Random(57)
        for _ in range(10):
            coll = nc_line_collection(rng, 3, rng.choice([3, 4]))
            parts = [[i] for i in range(len(coll.flats))]
            got = find_minimal_subfamily(parts, coll)
            assert len(got) >= 2
            blocks = [coll.flats[i] for i in got]
            assert is_minimal(blocks, ambient_dim=join(blocks).dim)
