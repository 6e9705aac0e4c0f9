import random
from fractions import Fraction

import pytest

from flatbeck.flats import AffineFlat
from flatbeck.measures import (
    DiscreteMeasure,
    PlateSpec,
    dyadic_scales,
    frostman_fit,
    good_position_margin,
    irreducibility_modulus,
    mass_in_plate,
    max_ball_mass,
    restrict_and_normalize,
    support_dist2,
)

D = Fraction(1, 1024)


def segment_measure(n_atoms=16, y=0):
    pts = [(Fraction(i, n_atoms), Fraction(y)) for i in range(n_atoms)]
    return DiscreteMeasure.uniform(pts, Fraction(1, n_atoms))


class TestMassInPlate:
    def test_plate_containing_everything(self):
        mu = segment_measure()
        plate = PlateSpec(AffineFlat([0, 0], [[1, 0]]), 1)
        assert mass_in_plate(mu, plate) == mu.total_mass

    def test_far_core_zero(self):
        mu = segment_measure()
        plate = PlateSpec(AffineFlat([0, 5], [[1, 0]]), Fraction(1, 100))
        assert mass_in_plate(mu, plate) == 0

    def test_atoms_on_core(self):
        mu = DiscreteMeasure.uniform(
            [(Fraction(i), Fraction(0)) for i in range(4)], Fraction(1, 4)
        )
        plate = PlateSpec(AffineFlat([0, 0], [[1, 0]]), Fraction(1, 10**9))
        assert mass_in_plate(mu, plate) == mu.total_mass

    def test_monotone_in_radius_and_additive(self):
        mu = segment_measure()
        core = AffineFlat.point([0, 0])
        masses = [
            mass_in_plate(mu, PlateSpec(core, Fraction(1, 2**j))) for j in (3, 2, 1)
        ]
        assert masses == sorted(masses)


class TestFrostmanFit:
    def test_uniform_segment_exponent_near_one(self):
        mu = segment_measure(n_atoms=256)
        fit = frostman_fit(mu, dyadic_scales(6, 1))
        assert abs(fit.exponent - 1) <= Fraction(1, 10)

    def test_single_atom_exponent_near_zero(self):
        mu = DiscreteMeasure([((0, 0), 1)], Fraction(1, 16))
        fit = frostman_fit(mu, dyadic_scales(4, 1))
        assert abs(fit.exponent) < 1e-9

    def test_grid_square_exponent_near_two(self):
        g = 32
        pts = [(Fraction(i, g), Fraction(j, g)) for i in range(g) for j in range(g)]
        mu = DiscreteMeasure.uniform(pts, Fraction(1, g))
        fit = frostman_fit(mu, dyadic_scales(4, 1))
        assert abs(fit.exponent - 2) <= Fraction(1, 10)

    def test_single_scale_rejected(self):
        with pytest.raises(ValueError):
            frostman_fit(segment_measure(), [Fraction(1, 2)])

    def test_table_is_exact(self):
        mu = segment_measure(n_atoms=8)
        fit = frostman_fit(mu, [Fraction(1, 2), Fraction(1, 4)])
        for scale, mass in fit.table:
            assert mass == max_ball_mass(mu, scale)
            assert isinstance(mass, Fraction)


class TestIrreducibilityModulus:
    def test_all_atoms_on_one_hyperplane(self):
        v = AffineFlat.full_space(2)
        mu = segment_measure()  # supported on the x-axis inside Q^2
        assert irreducibility_modulus(mu, v, 0) == 1

    def test_four_affinely_independent_atoms_in_q3(self):
        v = AffineFlat.full_space(3)
        pts = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)]
        mu = DiscreteMeasure.uniform(pts, Fraction(1, 16))
        assert irreducibility_modulus(mu, v, 0) == Fraction(3, 4)

    def test_simplex_vertices_in_qn(self):
        for n in (2, 3):
            v = AffineFlat.full_space(n)
            pts = [tuple(Fraction(0) for _ in range(n))] + [
                tuple(Fraction(1 if j == i else 0) for j in range(n)) for i in range(n)
            ]
            mu = DiscreteMeasure.uniform(pts, Fraction(1, 16))
            assert irreducibility_modulus(mu, v, 0) == Fraction(n, n + 1)

    def test_brute_force_oracle_on_random_atoms(self):
        # exhaustive check over all atom-subset hyperplanes at w = 0
        rng = random.Random(5)
        pts = [
            (Fraction(rng.randint(-4, 4), 4), Fraction(rng.randint(-4, 4), 4))
            for _ in range(6)
        ]
        pts = list(dict.fromkeys(pts))
        mu = DiscreteMeasure.uniform(pts, Fraction(1, 16))
        v = AffineFlat.full_space(2)
        got = irreducibility_modulus(mu, v, 0)
        best = Fraction(0)
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                if pts[i] == pts[j]:
                    continue
                f = AffineFlat.from_points([pts[i], pts[j]])
                mass = sum(w for p, w in mu.atoms if f.contains_point(p))
                best = max(best, mass)
        for p in pts:  # single-point flats
            mass = sum(w for q, w in mu.atoms if q == p)
            best = max(best, mass)
        assert got == best / mu.total_mass

    def test_monotone_in_w(self):
        v = AffineFlat.full_space(2)
        pts = [(0, 0), (1, 0), (0, 1), (Fraction(1, 2), Fraction(1, 3))]
        mu = DiscreteMeasure.uniform(pts, Fraction(1, 16))
        vals = [
            irreducibility_modulus(mu, v, w)
            for w in (0, Fraction(1, 8), Fraction(1, 2))
        ]
        assert vals == sorted(vals)

    def test_point_flat_rejected(self):
        mu = DiscreteMeasure([((0, 0), 1)], Fraction(1, 4))
        with pytest.raises(ValueError):
            irreducibility_modulus(mu, AffineFlat.point([0, 0]), 0)


class TestGoodPositionMargin:
    def test_two_distinct_singletons_positive(self):
        a = DiscreteMeasure([((0, 0), 1)], D)
        b = DiscreteMeasure([((Fraction(1, 2), 0), 1)], D)
        assert good_position_margin([a, b]) > 0

    def test_three_collinear_singletons_zero(self):
        mus = [
            DiscreteMeasure([((Fraction(i, 4), Fraction(i, 4)), 1)], D)
            for i in range(3)
        ]
        assert good_position_margin(mus) == 0

    def test_simplex_vertices_exact_value(self):
        a = DiscreteMeasure([((0, 0), 1)], D)
        b = DiscreteMeasure([((1, 0), 1)], D)
        c = DiscreteMeasure([((0, 1), 1)], D)
        margin = good_position_margin([a, b, c])
        # lifted columns (0,0,1),(1,0,1),(0,1,1): det = 1, so gram det = 1;
        # squared column norms are 1, 2, 2
        assert margin == Fraction(1, 4)


class TestRestrictAndNormalize:
    def test_whole_region_normalizes(self):
        mu = DiscreteMeasure([((0, 0), 2), ((1, 0), 2)], D)
        out = restrict_and_normalize(mu, lambda p, w: True)
        assert out.total_mass == 1

    def test_single_atom_becomes_dirac(self):
        mu = DiscreteMeasure([((0, 0), 2), ((1, 0), 2)], D)
        out = restrict_and_normalize(mu, lambda p, w: p[0] == 0)
        assert len(out) == 1 and out.total_mass == 1

    def test_half_mass_region_doubles_weights(self):
        mu = DiscreteMeasure([((0, 0), Fraction(1, 2)), ((1, 0), Fraction(1, 2))], D)
        out = restrict_and_normalize(mu, lambda p, w: p[0] == 0)
        assert out.atoms[0][1] == 1

    def test_empty_region_rejected(self):
        mu = DiscreteMeasure([((0, 0), 1)], D)
        with pytest.raises(ValueError):
            restrict_and_normalize(mu, lambda p, w: False)


class TestSupportDistance:
    def test_parallel_segments(self):
        assert support_dist2(segment_measure(y=0), segment_measure(y=1)) == 1
