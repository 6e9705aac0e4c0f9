import math
import random
from fractions import Fraction

import pytest

from flatbeck.beck import (
    PointConfig,
    concentrated_span_count,
    dichotomy_report,
    enumerate_spanned_flats,
)
from flatbeck.flats import AffineFlat
from flatbeck.genscenes import generic_points


class TestEnumerateSpannedFlats:
    def test_triangle_spans_three_lines(self):
        x = PointConfig([(0, 0), (1, 0), (0, 1)])
        assert len(enumerate_spanned_flats(x, 1)) == 3

    def test_collinear_points_span_one_line(self):
        x = PointConfig([(Fraction(i, 8), Fraction(i, 4)) for i in range(6)])
        assert len(enumerate_spanned_flats(x, 1)) == 1

    def test_four_generic_points_span_four_planes(self):
        x = PointConfig([(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)])
        assert len(enumerate_spanned_flats(x, 2)) == 4

    def test_generic_count_matches_binomial(self):
        rng = random.Random(99)
        pts = generic_points(rng, 3, 10)
        x = PointConfig(pts)
        assert len(enumerate_spanned_flats(x, 2)) == math.comb(10, 3)

    def test_upper_bound_always(self):
        rng = random.Random(5)
        pts = generic_points(rng, 3, 8, no_n_coplanar=False)
        x = PointConfig(pts)
        assert len(enumerate_spanned_flats(x, 2)) <= math.comb(8, 3)


class TestConcentratedSpanCount:
    def test_points_on_a_plane_give_one(self):
        pts = [(Fraction(i, 4), Fraction(j, 4), Fraction(0)) for i in range(2) for j in range(2)]
        x = PointConfig(pts)
        plane = AffineFlat([0, 0, 0], [[1, 0, 0], [0, 1, 0]])
        assert concentrated_span_count(x, plane) == 1

    def test_line_with_generic_points(self):
        # 5 generic points off a line f: each spans one plane through f
        # together with the two line points
        line_pts = [(0, 0, 0), (1, 0, 0)]
        rng = random.Random(17)
        off = generic_points(rng, 3, 5)
        off = [p for p in off if p[1:] != (0, 0)][:5]
        x = PointConfig(line_pts + off)
        f = AffineFlat([0, 0, 0], [[1, 0, 0]])
        got = concentrated_span_count(x, f)
        distinct_planes = {
            AffineFlat.from_points(line_pts + [p]).canon for p in off
        }
        assert got == len(distinct_planes)

    def test_disjoint_flat_gives_zero(self):
        x = PointConfig([(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)])
        far = AffineFlat([5, 5, 5], [[1, 0, 0]])
        assert concentrated_span_count(x, far) == 0


class TestDichotomy:
    def test_coplanar_points_find_the_plane(self):
        pts = [
            (Fraction(i, 4), Fraction(j, 4), Fraction(0))
            for i in range(4)
            for j in range(3)
        ]
        rep = dichotomy_report(PointConfig(pts), epsilon=0.1)
        assert rep.concentrated
        assert sum(f.dim for f in rep.family) <= 2
        assert rep.covered == len(pts)

    def test_generic_points_count_hyperplanes(self):
        rng = random.Random(41)
        pts = generic_points(rng, 3, 12)
        rep = dichotomy_report(PointConfig(pts), epsilon=0.1)
        assert not rep.concentrated
        assert rep.hyperplane_count == math.comb(12, 3)
        assert rep.ratio == pytest.approx(math.comb(12, 3) / 12**3)

    def test_two_skew_lines_concentrate(self):
        l1 = [(Fraction(i, 8), Fraction(0), Fraction(0)) for i in range(8)]
        l2 = [(Fraction(0), Fraction(1), Fraction(i, 8)) for i in range(8)]
        rep = dichotomy_report(PointConfig(l1 + l2), epsilon=0.1)
        assert rep.concentrated
        assert sum(f.dim for f in rep.family) <= 2
        assert rep.covered == 16

    def test_budget_flagged(self):
        pts = [(Fraction(i), Fraction(i * i), Fraction(1)) for i in range(12)]
        rep = dichotomy_report(PointConfig(pts), budget=5)
        assert not rep.complete and rep.note


class TestCoverStructure:
    def test_spanned_hyperplanes_meet_heavy_flat(self):
        # points on two disjoint skew lines: every spanned plane contains
        # a flat holding more points than its dimension
        l1 = [(Fraction(i, 4), Fraction(0), Fraction(0)) for i in range(4)]
        l2 = [(Fraction(0), Fraction(1), Fraction(i, 4)) for i in range(4)]
        x = PointConfig(l1 + l2)
        f1 = AffineFlat([0, 0, 0], [[1, 0, 0]])
        f2 = AffineFlat([0, 1, 0], [[0, 0, 1]])
        for h in enumerate_spanned_flats(x, 2):
            on_h1 = sum(1 for p in l1 if h.contains_point(p))
            on_h2 = sum(1 for p in l2 if h.contains_point(p))
            assert (h.contains_flat(f1) and on_h1 > 1) or (
                h.contains_flat(f2) and on_h2 > 1
            )
