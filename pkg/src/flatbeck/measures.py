"""Discrete stand-ins for Frostman measures.

A measure is a finite weighted atom set at a declared resolution.  Ball and
plate masses are exact; only the fitted Frostman constants (C, s) are floats.
"""

from __future__ import annotations

import itertools
import math
import statistics
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

from .exactlin import Vector, frac, gram_det, norm2, vec, vsub
from .flats import (
    AffineFlat,
    FlatChart,
    dist2_point_flat,
    enumerate_subflat_candidates,
    lifted_tuple_matrix,
)

Atom = tuple[Vector, Fraction]


class DiscreteMeasure:
    """Finite weighted atom set at a declared resolution delta."""

    __slots__ = ("ambient_dim", "atoms", "resolution", "total_mass")

    def __init__(self, atoms: Sequence[tuple[Sequence, object]], resolution):
        ats = tuple((vec(p), frac(w)) for p, w in atoms)
        if not ats:
            raise ValueError("measure needs at least one atom")
        n = len(ats[0][0])
        if any(len(p) != n for p, _ in ats):
            raise ValueError("atom dimension mismatch")
        if any(w < 0 for _, w in ats):
            raise ValueError("negative atom weight")
        object.__setattr__(self, "ambient_dim", n)
        object.__setattr__(self, "atoms", ats)
        object.__setattr__(self, "resolution", frac(resolution))
        object.__setattr__(self, "total_mass", sum(w for _, w in ats))

    def __setattr__(self, *a):
        raise AttributeError("DiscreteMeasure is immutable")

    def __len__(self) -> int:
        return len(self.atoms)

    def points(self) -> list[Vector]:
        return [p for p, _ in self.atoms]

    def weights(self) -> list[Fraction]:
        return [w for _, w in self.atoms]

    def support_flat(self) -> AffineFlat:
        return AffineFlat.from_points([p for p, w in self.atoms if w > 0])

    def in_unit_ball(self) -> bool:
        return all(norm2(p) <= 1 for p, _ in self.atoms)

    @classmethod
    def uniform(cls, points: Sequence[Sequence], resolution, total=1) -> "DiscreteMeasure":
        pts = [vec(p) for p in points]
        w = frac(total) / len(pts)
        return cls([(p, w) for p in pts], resolution)


@dataclass(frozen=True)
class PlateSpec:
    """r0-neighborhood of a k-flat; an r-tube is the k = 1 case."""

    core: AffineFlat
    radius: Fraction

    def __post_init__(self):
        object.__setattr__(self, "radius", frac(self.radius))
        if self.radius < 0:
            raise ValueError("plate radius must be >= 0")


def mass_in_plate(mu: DiscreteMeasure, p: PlateSpec) -> Fraction:
    """Total weight of atoms with squared distance to the core <= radius^2."""
    if mu.ambient_dim != p.core.ambient_dim:
        raise ValueError("ambient dimensions differ")
    r2 = p.radius * p.radius
    return sum(
        (w for pt, w in mu.atoms if dist2_point_flat(pt, p.core) <= r2),
        Fraction(0),
    )


def mass_near_flat(mu: DiscreteMeasure, f: AffineFlat, w) -> Fraction:
    return mass_in_plate(mu, PlateSpec(f, frac(w)))


def _integerized_points(points: Sequence[Vector]) -> tuple[list[tuple[int, ...]], int]:
    """Scale all points by a common denominator so distances are integers."""
    den = 1
    for p in points:
        for x in p:
            den = math.lcm(den, x.denominator)
    return [tuple(int(x * den) for x in p) for p in points], den


@dataclass(frozen=True)
class FrostmanFit:
    constant: float
    exponent: float
    table: tuple[tuple[Fraction, Fraction], ...]  # (scale, max ball mass)


def _max_ball_masses(mu: DiscreteMeasure, radii: Sequence[Fraction]) -> dict[Fraction, Fraction]:
    """Per-radius max over atom centers of the closed-ball mass; exact.

    Collinear supports get a sorted sliding-window pass; otherwise integer
    pairwise distances are computed once and reused across radii.
    """
    import bisect
    import math as _math

    pts, den = _integerized_points(mu.points())
    ws = mu.weights()
    out: dict[Fraction, Fraction] = {}
    base = pts[0]
    d = next((tuple(a - b for a, b in zip(p, base)) for p in pts if p != base), None)
    collinear = d is not None
    if collinear:
        for p in pts:
            r = tuple(a - b for a, b in zip(p, base))
            if any(
                r[i] * d[j] != r[j] * d[i]
                for i in range(len(d))
                for j in range(i + 1, len(d))
            ):
                collinear = False
                break
    if d is not None and collinear:
        d2 = sum(x * x for x in d)
        s = [sum(a * b for a, b in zip(tuple(x - y for x, y in zip(p, base)), d)) for p in pts]
        order = sorted(range(len(pts)), key=lambda i: s[i])
        s_sorted = [s[i] for i in order]
        prefix = [Fraction(0)]
        for i in order:
            prefix.append(prefix[-1] + ws[i])
        for radius in radii:
            r2 = radius * radius
            bound = r2 * d2 * den * den  # (s_i - s_j)^2 * d2... see below
            # condition: (si - sj)^2 <= r^2 * d2^2 * den^2 / d2 = r^2 * d2 * den^2
            a_num = bound.numerator
            a_den = bound.denominator
            t_max = _math.isqrt(a_num // a_den)
            best = Fraction(0)
            for pos in s_sorted:
                lo = bisect.bisect_left(s_sorted, pos - t_max)
                hi = bisect.bisect_right(s_sorted, pos + t_max)
                tot = prefix[hi] - prefix[lo]
                if tot > best:
                    best = tot
            out[radius] = best
        return out
    rows = []
    for c in pts:
        rows.append([sum((a - b) ** 2 for a, b in zip(c, q)) for q in pts])
    for radius in radii:
        bound = radius * radius * den * den
        rn, rd = bound.numerator, bound.denominator
        best = Fraction(0)
        for row in rows:
            tot = Fraction(0)
            for d2v, w in zip(row, ws):
                if d2v * rd <= rn:
                    tot += w
            if tot > best:
                best = tot
        out[radius] = best
    return out


def max_ball_mass(mu: DiscreteMeasure, radius: Fraction) -> Fraction:
    """Max over atom centers of the closed-ball mass; exact."""
    radius = frac(radius)
    return _max_ball_masses(mu, [radius])[radius]


def frostman_fit(mu: DiscreteMeasure, scales: Sequence) -> FrostmanFit:
    """Least-squares fit of log max-ball-mass against log scale.

    Centers are restricted to atoms (the max over arbitrary centers is
    attained within one resolution step of an atom, shifting the constant by
    a bounded factor only).  Scales must all be >= the resolution.
    """
    rs = sorted({frac(s) for s in scales})
    if len(rs) < 2:
        raise ValueError("need at least two distinct scales")
    if any(r < mu.resolution for r in rs):
        raise ValueError("scale below the measure resolution")
    masses = _max_ball_masses(mu, rs)
    table = tuple((r, masses[r]) for r in rs)
    xs = [math.log(float(r)) for r, _ in table]
    ys = [math.log(float(m)) for _, m in table if m > 0]
    if len(ys) != len(xs):
        raise ValueError("zero ball mass at some scale; measure is empty?")
    slope, intercept = statistics.linear_regression(xs, ys)
    return FrostmanFit(constant=math.exp(intercept), exponent=slope, table=table)


def random_hyperplane_of(v: AffineFlat, rng) -> AffineFlat:
    """Seeded random hyperplane of the flat v (dim v - 1 subflat)."""
    if v.dim == 0:
        raise ValueError("a point has no hyperplanes")
    chart = FlatChart(v)
    while True:
        normal = [Fraction(rng.randint(-8, 8)) for _ in range(v.dim)]
        if any(x != 0 for x in normal):
            break
    offset = Fraction(rng.randint(-8, 8), 8)
    # solution flat of normal . y = offset inside the chart
    i = next(i for i, x in enumerate(normal) if x != 0)
    base = [Fraction(0)] * v.dim
    base[i] = offset / normal[i]
    dirs = []
    for j in range(v.dim):
        if j == i:
            continue
        d = [Fraction(0)] * v.dim
        d[j] = Fraction(1)
        d[i] = -normal[j] / normal[i]
        dirs.append(d)
    return chart.flat_to_ambient(AffineFlat(base, dirs))


def irreducibility_modulus(
    mu: DiscreteMeasure,
    v: AffineFlat,
    w,
    rng=None,
    sampled_hyperplanes: int = 0,
    support_tolerance=None,
) -> Fraction:
    """tau* = max over candidate proper subflats H of v of mu(H(w)) divided
    by the total mass.  The measure is (w, tau)-irreducible in v for any
    tau >= tau*.

    Candidates are the flats spanned by atom subsets of size <= dim v (exact
    for w = 0: the heaviest proper subflat can be replaced by the span of the
    atoms it captures) plus an optional seeded sample of hyperplanes of v
    (a heuristic upper-risk supplement for w > 0).
    """
    if v.dim == 0:
        raise ValueError("no proper subflats of a point")
    w = frac(w)
    tol = mu.resolution if support_tolerance is None else frac(support_tolerance)
    for p, _ in mu.atoms:
        if dist2_point_flat(p, v) > tol * tol:
            raise ValueError("support leaves the tolerance neighborhood of v")
    best = Fraction(0)
    pts = mu.points()
    for h in enumerate_subflat_candidates(pts, v.dim - 1):
        if not v.contains_flat(h):
            continue
        m = mass_near_flat(mu, h, w)
        if m > best:
            best = m
    if sampled_hyperplanes and rng is not None:
        for _ in range(sampled_hyperplanes):
            h = random_hyperplane_of(v, rng)
            m = mass_near_flat(mu, h, w)
            if m > best:
                best = m
    return best / mu.total_mass


def good_position_margin(mus: Sequence[DiscreteMeasure]) -> Fraction:
    """Minimum over support tuples of the normalized Gram determinant of the
    lifted tuple matrix; 0 exactly when some tuple is affinely dependent
    (the tuple hits the degenerate set).
    """
    if not mus:
        raise ValueError("no measures")
    n = mus[0].ambient_dim
    if any(m.ambient_dim != n for m in mus):
        raise ValueError("ambient dimensions differ")
    for m in mus:
        if not m.in_unit_ball():
            raise ValueError("supports must lie in the closed unit ball")
    best: Optional[Fraction] = None
    supports = [m.points() for m in mus]
    for combo in itertools.product(*supports):
        lifted = lifted_tuple_matrix(combo)
        g = gram_det(lifted)
        norm = Fraction(1)
        for c in range(lifted.cols):
            norm *= norm2(lifted.col(c))
        val = g / norm
        if best is None or val < best:
            best = val
        if best == 0:
            break
    assert best is not None
    return best


def restrict_and_normalize(
    mu: DiscreteMeasure, region: Callable[[Vector, Fraction], bool]
) -> DiscreteMeasure:
    """Filter atoms by the region predicate and rescale weights to mass 1."""
    kept = [(p, w) for p, w in mu.atoms if region(p, w)]
    total = sum((w for _, w in kept), Fraction(0))
    if total == 0:
        raise ValueError("restriction keeps no mass")
    return DiscreteMeasure([(p, w / total) for p, w in kept], mu.resolution)


def support_dist2(a: DiscreteMeasure, b: DiscreteMeasure) -> Fraction:
    """Minimum squared distance between the two supports."""
    best: Optional[Fraction] = None
    for p, _ in a.atoms:
        for q, _ in b.atoms:
            d = norm2(vsub(p, q))
            if best is None or d < best:
                best = d
    assert best is not None
    return best


def dyadic_scales(finest: int, coarsest: int = 1) -> list[Fraction]:
    """Scales 2^-coarsest down to 2^-finest, descending."""
    if finest < coarsest:
        raise ValueError("finest must be <= coarsest as an exponent")
    return [Fraction(1, 2**j) for j in range(coarsest, finest + 1)]
