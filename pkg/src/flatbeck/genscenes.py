"""Seeded constructions of scenes: random flats, certified minimal frames,
segment grids and point clouds.

Everything is driven by a caller-supplied random.Random so a single recorded
seed reproduces a scene byte for byte.  Generic choices are drawn with small
rational coordinates and rejected until the required exact certificates hold
(the exceptional configurations all have measure zero, so rejection stops
quickly).
"""

from __future__ import annotations

import random
from fractions import Fraction
from typing import Sequence

from .exactlin import Matrix, norm2, rank, vec
from .flats import AffineFlat, FlatChart
from .flatcollect import FlatCollection, is_minimal
from .measures import DiscreteMeasure
from .stability import CertificationResult, StableFrame, certify_stability


def rational(rng: random.Random, span: int = 8, den: int = 8) -> Fraction:
    return Fraction(rng.randint(-span, span), den)


def random_point(rng: random.Random, n: int, span: int = 8, den: int = 8):
    return tuple(rational(rng, span, den) for _ in range(n))


def random_flat(
    rng: random.Random,
    n: int,
    dim: int,
    base_span: int = 2,
    base_den: int = 8,
) -> AffineFlat:
    """Random flat with independent small-integer directions."""
    base = random_point(rng, n, base_span, base_den)
    dirs: list[list[Fraction]] = []
    while len(dirs) < dim:
        cand = [Fraction(rng.randint(-3, 3)) for _ in range(n)]
        if any(x != 0 for x in cand) and rank(Matrix(dirs + [cand])) == len(dirs) + 1:
            dirs.append(cand)
    return AffineFlat(base, dirs)


def random_minimal_flats(
    rng: random.Random, n: int, dims: Sequence[int], max_tries: int = 500
) -> list[AffineFlat]:
    """Flats of the given dimensions forming a minimal collection in Q^n."""
    if sum(dims) < n:
        raise ValueError("dimension sum below ambient dimension")
    for _ in range(max_tries):
        flats = [random_flat(rng, n, d) for d in dims]
        if is_minimal(flats, ambient_dim=n):
            return flats
    raise RuntimeError("failed to draw a minimal collection")


def cluster_on_flat(
    rng: random.Random,
    f: AffineFlat,
    count: int,
    center_span: int = 6,
    center_den: int = 32,
    spread_den: int = 512,
) -> list[tuple]:
    """Distinct points of the flat clustered around a random chart point."""
    chart = FlatChart(f)
    center = [Fraction(rng.randint(-center_span, center_span), center_den) for _ in range(f.dim)]
    pts = []
    seen = set()
    guard = 0
    while len(pts) < count:
        guard += 1
        if guard > 100 * count:
            raise RuntimeError("failed to sample distinct cluster points")
        offset = [
            c + Fraction(rng.randint(-4, 4), spread_den) for c in center
        ]
        p = chart.to_ambient(offset)
        if p in seen:
            continue
        seen.add(p)
        pts.append(p)
    return pts


def random_minimal_frame(
    rng: random.Random,
    n: int,
    dims: Sequence[int],
    atoms_per_measure: int = 2,
    resolution: Fraction = Fraction(1, 1024),
    max_tries: int = 200,
) -> tuple[StableFrame, CertificationResult]:
    """Certified frame over a minimal collection: dim V_j cluster measures on
    each flat, certified at the achieved normalized-minor floor."""
    for _ in range(max_tries):
        try:
            flats = random_minimal_flats(rng, n, dims)
            grid = []
            ok = True
            for f in flats:
                row = []
                for _ in range(f.dim):
                    pts = cluster_on_flat(rng, f, atoms_per_measure)
                    if any(norm2(vec(p)) > 1 for p in pts):
                        ok = False
                        break
                    row.append(DiscreteMeasure.uniform(pts, resolution))
                if not ok:
                    break
                grid.append(row)
            if not ok:
                continue
            frame = StableFrame(flats, grid)
        except (ValueError, RuntimeError):
            continue
        cert = certify_stability(frame, Fraction(0))
        if cert.ok and cert.floor and cert.floor > 0:
            return frame, cert
    raise RuntimeError("failed to build a certified minimal frame")


def segment_grid(
    j: int,
    y_offset: Fraction = Fraction(0),
    ambient: int = 2,
    axis: int = 0,
) -> DiscreteMeasure:
    """Uniform measure on the 2^-j grid of the unit segment at height y."""
    count = 2**j
    pts = []
    for i in range(count):
        p = [Fraction(0)] * ambient
        p[axis] = Fraction(i, count)
        p[(axis + 1) % ambient] = y_offset
        pts.append(tuple(p))
    return DiscreteMeasure.uniform(pts, Fraction(1, count))


def parallel_segments(j: int, separation: Fraction = Fraction(1)) -> tuple[DiscreteMeasure, DiscreteMeasure]:
    """Two parallel unit segments discretized at 2^-j, the classic thin-tube
    scene."""
    return segment_grid(j, Fraction(0)), segment_grid(j, separation)


def square_grid(j: int) -> DiscreteMeasure:
    """Uniform measure on the 2^-j grid of the unit square."""
    g = 2**j
    pts = [
        (Fraction(a, g), Fraction(b, g)) for a in range(g) for b in range(g)
    ]
    return DiscreteMeasure.uniform(pts, Fraction(1, g))


def generic_points(
    rng: random.Random,
    n: int,
    count: int,
    span: int = 16,
    den: int = 16,
    no_n_coplanar: bool = True,
    max_tries: int = 100_000,
) -> list[tuple]:
    """Distinct random rational points; optionally in general position (no
    n + 1 of them on a common hyperplane), verified exactly."""
    import itertools as it

    pts: list[tuple] = []
    tries = 0
    while len(pts) < count:
        tries += 1
        if tries > max_tries:
            raise RuntimeError("rejection sampling exhausted")
        p = random_point(rng, n, span, den)
        if p in pts:
            continue
        if no_n_coplanar and len(pts) >= n:
            bad = False
            for combo in it.combinations(pts, n):
                lifted = [vec(q) + (Fraction(1),) for q in combo] + [vec(p) + (Fraction(1),)]
                if rank(Matrix(lifted)) < n + 1:
                    bad = True
                    break
            if bad:
                continue
        pts.append(p)
    return pts


def psi_scene(
    rng: random.Random,
    n: int = 3,
    dims: Sequence[int] = (2, 1, 1),
    p: int = 1,
    max_tries: int = 100,
):
    """A full hyperplane-map context: random flats of the given dimensions,
    fixed atoms on every flat but the last, and an exactly aligned screen.

    Requires dims[0] >= p + 1 and sum(dims[:-1]) <= n (the joint flat must
    fit in the ambient space); the dimension surplus p = sum(dims) - n.
    """
    from .project import NonGenericConfiguration, make_psi_context

    if sum(dims) - n != p:
        raise ValueError("dimension surplus does not match p")
    if dims[0] < p + 1 or sum(dims[:-1]) > n:
        raise ValueError("infeasible dimension profile")
    for _ in range(max_tries):
        flats = [random_flat(rng, n, d) for d in dims]
        fixed: dict[tuple[int, int], tuple] = {}
        try:
            for i, pt in enumerate(cluster_on_flat(rng, flats[0], dims[0] - p)):
                fixed[(0, p + i)] = pt
            for j in range(1, len(dims) - 1):
                for i, pt in enumerate(cluster_on_flat(rng, flats[j], dims[j])):
                    fixed[(j, i)] = pt
            return make_psi_context(flats, fixed, p, rng)
        except (NonGenericConfiguration, ValueError, RuntimeError):
            continue
    raise RuntimeError("failed to draw a psi scene")


def nc_line_collection(rng: random.Random, n: int = 3, count: int = 3) -> FlatCollection:
    """Random lines forming an NC collection in Q^n (rejection until exact)."""
    for _ in range(200):
        lines = [random_flat(rng, n, 1) for _ in range(count)]
        coll = FlatCollection(lines)
        if coll.is_nc():
            return coll
    raise RuntimeError("failed to draw an NC line collection")
