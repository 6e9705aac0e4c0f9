"""Affine flats of Q^n: linearization, join, meet, exact distances and the
squared-sine angle surrogate.

A flat is stored as basepoint + direction basis, but identity (equality,
hashing, dedup) goes through the canonical reduced row-echelon basis of its
linearization, the linear span of F x {1} in Q^(n+1).  All metric predicates
compare squared quantities so everything stays inside Q.
"""

from __future__ import annotations

import functools
import itertools
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .exactlin import (
    Matrix,
    Vector,
    dot,
    frac,
    gram_det,
    norm2,
    rank,
    row_space_basis,
    solve,
    unit_vec,
    vec,
    vsub,
    vadd,
    vscale,
    zero_vec,
)


class AffineFlat:
    """Affine subspace of Q^n with a canonical form for identity."""

    __slots__ = ("ambient_dim", "basepoint", "directions", "canon")

    def __init__(self, basepoint: Sequence, directions: Iterable[Sequence] = ()):
        bp = vec(basepoint)
        dirs = tuple(vec(d) for d in directions)
        n = len(bp)
        if any(len(d) != n for d in dirs):
            raise ValueError("direction length mismatch")
        if dirs and rank(Matrix(dirs)) != len(dirs):
            raise ValueError("directions are linearly dependent")
        object.__setattr__(self, "ambient_dim", n)
        object.__setattr__(self, "basepoint", bp)
        object.__setattr__(self, "directions", dirs)
        lifted = [d + (Fraction(0),) for d in dirs] + [bp + (Fraction(1),)]
        object.__setattr__(self, "canon", row_space_basis(Matrix(lifted)))

    def __setattr__(self, *a):
        raise AttributeError("AffineFlat is immutable")

    @property
    def dim(self) -> int:
        return len(self.directions)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, AffineFlat)
            and self.ambient_dim == other.ambient_dim
            and self.canon == other.canon
        )

    def __hash__(self) -> int:
        return hash((self.ambient_dim, self.canon))

    def __repr__(self) -> str:
        return f"AffineFlat(dim={self.dim}, ambient={self.ambient_dim})"

    @classmethod
    def point(cls, p: Sequence) -> "AffineFlat":
        return cls(p, ())

    @classmethod
    def full_space(cls, n: int) -> "AffineFlat":
        return cls(zero_vec(n), [unit_vec(n, i) for i in range(n)])

    @classmethod
    def from_points(cls, points: Sequence[Sequence]) -> "AffineFlat":
        """Affine span of a nonempty point list."""
        pts = [vec(p) for p in points]
        if not pts:
            raise ValueError("empty point list")
        base = pts[0]
        diffs = [vsub(p, base) for p in pts[1:]]
        basis = [v for v in row_space_basis(Matrix(diffs))] if diffs else []
        return cls(base, basis)

    def contains_point(self, p: Sequence) -> bool:
        return dist2_point_flat(vec(p), self) == 0

    def contains_flat(self, other: "AffineFlat") -> bool:
        if self.ambient_dim != other.ambient_dim:
            raise ValueError("ambient dimensions differ")
        mine = Matrix(list(self.canon))
        both = Matrix(list(self.canon) + list(other.canon))
        return rank(both) == rank(mine)

    def translate(self, offset: Sequence) -> "AffineFlat":
        return AffineFlat(vadd(self.basepoint, vec(offset)), self.directions)


def linearize(f: AffineFlat) -> Matrix:
    """(n+1)-row matrix whose column space is span(F x {1}).

    Column count is dim F + 1: the direction vectors padded with 0, then the
    lifted basepoint.
    """
    cols = [d + (Fraction(0),) for d in f.directions] + [f.basepoint + (Fraction(1),)]
    return Matrix.from_cols(cols, rows=f.ambient_dim + 1)


def flat_from_linear_span(span_rows: Sequence[Vector], ambient_dim: int) -> Optional[AffineFlat]:
    """Flat whose linearization is the given linear subspace of Q^(n+1).

    Returns None when the subspace holds no vector with nonzero last
    coordinate (no affine points: the 'empty flat').
    """
    rows = [list(r) for r in row_space_basis(Matrix(span_rows))] if span_rows else []
    if not rows:
        return None
    pivot = next((i for i, r in enumerate(rows) if r[-1] != 0), None)
    if pivot is None:
        return None
    base_row = [x / rows[pivot][-1] for x in rows[pivot]]
    dirs = []
    for i, r in enumerate(rows):
        if i == pivot:
            continue
        f = r[-1]
        d = [a - f * b for a, b in zip(r, base_row)]
        dirs.append(tuple(d[:-1]))
    return AffineFlat(tuple(base_row[:-1]), dirs)


def join(fs: Sequence[AffineFlat]) -> AffineFlat:
    """Smallest flat containing every flat in the (nonempty) list."""
    if not fs:
        raise ValueError("join of an empty family")
    n = fs[0].ambient_dim
    if any(f.ambient_dim != n for f in fs):
        raise ValueError("ambient dimensions differ")
    rows: list[Vector] = []
    for f in fs:
        rows.extend(f.canon)
    out = flat_from_linear_span(rows, n)
    assert out is not None  # every flat contributes an affine point
    return out


def meet(f: AffineFlat, g: AffineFlat) -> Optional[AffineFlat]:
    """Intersection flat, or None when the flats do not meet."""
    if f.ambient_dim != g.ambient_dim:
        raise ValueError("ambient dimensions differ")
    b1 = [list(r) for r in f.canon]
    b2 = [list(r) for r in g.canon]
    # v in both spans: v = B1^T a = B2^T b  <=>  (a, b) in ker [B1^T | -B2^T]
    m = Matrix.from_cols(
        [tuple(r) for r in b1] + [tuple(-x for x in r) for r in b2],
        rows=f.ambient_dim + 1,
    )
    from .exactlin import nullspace

    inter_rows = []
    for coeffs in nullspace(m):
        a = coeffs[: len(b1)]
        v = zero_vec(f.ambient_dim + 1)
        for c, row in zip(a, b1):
            v = vadd(v, vscale(c, tuple(row)))
        if any(x != 0 for x in v):
            inter_rows.append(v)
    if not inter_rows:
        return None
    return flat_from_linear_span(inter_rows, f.ambient_dim)


@functools.lru_cache(maxsize=4096)
def _ortho_basis(f: AffineFlat) -> tuple[tuple[Vector, ...], tuple[Fraction, ...]]:
    """Orthogonal (unnormalized) basis of dir(F) with squared norms."""
    basis: list[Vector] = []
    sq: list[Fraction] = []
    for d in f.directions:
        v = d
        for o, s in zip(basis, sq):
            v = vsub(v, vscale(dot(v, o) / s, o))
        if any(x != 0 for x in v):
            basis.append(v)
            sq.append(norm2(v))
    return tuple(basis), tuple(sq)


def dist2_point_flat(p: Sequence, f: AffineFlat) -> Fraction:
    """Squared Euclidean distance from a point to a flat, exact."""
    r = vsub(vec(p), f.basepoint)
    total = norm2(r)
    basis, sq = _ortho_basis(f)
    for o, s in zip(basis, sq):
        c = dot(r, o)
        total -= c * c / s
    return total


def in_neighborhood(p: Sequence, f: AffineFlat, w) -> bool:
    """True iff dist(p, F)^2 <= w^2."""
    w = frac(w)
    if w < 0:
        raise ValueError("neighborhood width must be >= 0")
    return dist2_point_flat(p, f) <= w * w


def dist2_flats(f: AffineFlat, g: AffineFlat) -> Fraction:
    """Squared distance between two flats (0 iff they intersect)."""
    if f.ambient_dim != g.ambient_dim:
        raise ValueError("ambient dimensions differ")
    r = vsub(g.basepoint, f.basepoint)
    cols = list(f.directions) + [vscale(-1, d) for d in g.directions]
    if not cols:
        return norm2(r)
    m = Matrix.from_cols(cols, rows=f.ambient_dim)
    mt = m.transpose()
    x = solve(mt.mat_mul(m), mt.mat_vec(r))
    assert x is not None  # normal equations are always consistent
    res = vsub(r, m.mat_vec(x))
    return norm2(res)


def wedge_angle_sin2(b: Matrix, a: Matrix) -> Fraction:
    """Squared sine factor between the column blocks b and a:

        det((b,a)^T (b,a)) / (gram_det(b) * gram_det(a))

    which is the square of the |sin| factor in |u_1 ^ ... ^ u_m| =
    |w_wedge| * |v_wedge| * |sin|.  Rank-deficient (b, a) gives 0; a factor
    with degenerate columns is an error.
    """
    if b.rows != a.rows:
        raise ValueError("row counts differ")
    if b.cols + a.cols > b.rows:
        raise ValueError("more columns than rows")
    gb = gram_det(b)
    ga = gram_det(a)
    if gb == 0 or ga == 0:
        raise ValueError("degenerate factor")
    concat = b.hstack(a)
    return gram_det(concat) / (gb * ga)


def flats_canonical_key(f: AffineFlat):
    """Sort key for deterministic orderings of flats."""
    return (f.dim, f.canon)


class FlatChart:
    """Exact affine chart identifying a flat with Q^dim."""

    def __init__(self, f: AffineFlat):
        self.flat = f
        self._dirmat = Matrix.from_cols(list(f.directions), rows=f.ambient_dim)

    def to_coords(self, p: Sequence) -> Vector:
        r = vsub(vec(p), self.flat.basepoint)
        x = solve(self._dirmat, r)
        if x is None or self._dirmat.mat_vec(x) != r:
            raise ValueError("point not on the chart flat")
        return x

    def to_ambient(self, coords: Sequence) -> Vector:
        return vadd(self.flat.basepoint, self._dirmat.mat_vec(vec(coords)))

    def flat_to_coords(self, g: AffineFlat) -> AffineFlat:
        """Image of a subflat g of the chart flat in chart coordinates."""
        base = self.to_coords(g.basepoint)
        dirs = []
        for d in g.directions:
            x = solve(self._dirmat, d)
            if x is None or self._dirmat.mat_vec(x) != vec(d):
                raise ValueError("subflat leaves the chart flat")
            dirs.append(x)
        return AffineFlat(base, dirs)

    def flat_to_ambient(self, g: AffineFlat) -> AffineFlat:
        base = self.to_ambient(g.basepoint)
        dirs = [self._dirmat.mat_vec(d) for d in g.directions]
        return AffineFlat(base, dirs)


def generic_point_off_flats(
    n: int, avoid: Sequence[AffineFlat], rng, box: int = 8
) -> Vector:
    """Seeded rational point avoiding every flat in the list exactly."""
    for _ in range(1000):
        p = tuple(Fraction(rng.randint(-box * 16, box * 16), 16) for _ in range(n))
        if all(dist2_point_flat(p, f) > 0 for f in avoid):
            return p
    raise RuntimeError("rejection sampling failed to leave the given flats")


def perturbations_of(p: Vector, radius: Fraction, rng, count: int) -> list[Vector]:
    """Rational points within the given radius of p (exact check)."""
    n = len(p)
    out = []
    attempts = 0
    while len(out) < count and attempts < 1000 * count:
        attempts += 1
        q = tuple(
            x + Fraction(rng.randint(-64, 64), 1) * radius / 128 for x in p
        )
        if norm2(vsub(q, p)) <= radius * radius:
            out.append(q)
    if len(out) < count:
        raise RuntimeError("failed to sample perturbations")
    return out


def affinely_independent(points: Sequence[Vector]) -> bool:
    """True iff the points span a flat of dimension len(points) - 1."""
    pts = [vec(p) for p in points]
    if not pts:
        return True
    lifted = Matrix([p + (Fraction(1),) for p in pts])
    return rank(lifted) == len(pts)


def lifted_tuple_matrix(points: Sequence[Sequence]) -> Matrix:
    """Columns (x; 1) for each point: the linearized tuple matrix."""
    pts = [vec(p) for p in points]
    return Matrix.from_cols([p + (Fraction(1),) for p in pts], rows=len(pts[0]) + 1)


def spanned_flat(points: Sequence[Sequence]) -> AffineFlat:
    return AffineFlat.from_points(points)


def enumerate_subflat_candidates(
    points: Sequence[Vector], max_dim: int
) -> Iterable[AffineFlat]:
    """All distinct flats of dimension <= max_dim spanned by point subsets.

    Subsets of size d+1 that are affinely independent span exactly d
    dimensions; dependent subsets are skipped because their span already
    arises from a smaller independent subset.
    """
    seen = set()
    for size in range(1, max_dim + 2):
        for combo in itertools.combinations(range(len(points)), size):
            pts = [points[i] for i in combo]
            if not affinely_independent(pts):
                continue
            f = AffineFlat.from_points(pts)
            if f.canon not in seen:
                seen.add(f.canon)
                yield f
