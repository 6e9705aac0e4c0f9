"""Exact rational linear algebra kernel.

Vectors are tuples of ``Fraction``; matrices are immutable row-major grids.
Ranks and determinants run fraction-free (Bareiss) on integerized copies so
intermediate entries stay bounded at the matrix sizes used here (sides up to
a dozen or so).  ``max_minor`` enumerates all r x r submatrices, which is
affordable for the same reason.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from typing import Iterable, Sequence

Scalar = Fraction
Vector = tuple[Fraction, ...]


def frac(x) -> Fraction:
    """Coerce ints, strings like '2/3' and Fractions to Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        raise TypeError("refusing to coerce float %r to an exact rational" % (x,))
    return Fraction(x)


def vec(entries: Iterable) -> Vector:
    return tuple(frac(x) for x in entries)


def vadd(a: Vector, b: Vector) -> Vector:
    return tuple(x + y for x, y in zip(a, b, strict=True))


def vsub(a: Vector, b: Vector) -> Vector:
    return tuple(x - y for x, y in zip(a, b, strict=True))


def vscale(c, a: Vector) -> Vector:
    c = frac(c)
    return tuple(c * x for x in a)


def dot(a: Vector, b: Vector) -> Fraction:
    return sum((x * y for x, y in zip(a, b, strict=True)), Fraction(0))


def norm2(a: Vector) -> Fraction:
    return dot(a, a)


def zero_vec(n: int) -> Vector:
    return (Fraction(0),) * n


def unit_vec(n: int, i: int) -> Vector:
    return tuple(Fraction(1 if j == i else 0) for j in range(n))


class Matrix:
    """Immutable exact matrix over Q."""

    __slots__ = ("rows", "cols", "entries")

    def __init__(self, rows: Iterable[Iterable]):
        ents = tuple(vec(r) for r in rows)
        if ents:
            w = len(ents[0])
            if any(len(r) != w for r in ents):
                raise ValueError("inconsistent row widths")
        else:
            w = 0
        object.__setattr__(self, "entries", ents)
        object.__setattr__(self, "rows", len(ents))
        object.__setattr__(self, "cols", w)

    def __setattr__(self, *a):
        raise AttributeError("Matrix is immutable")

    @classmethod
    def from_cols(cls, cols: Sequence[Sequence], rows: int | None = None) -> "Matrix":
        cols = [vec(c) for c in cols]
        if not cols:
            return cls([() for _ in range(rows or 0)])
        return cls(zip(*cols, strict=True))

    @classmethod
    def identity(cls, n: int) -> "Matrix":
        return cls([unit_vec(n, i) for i in range(n)])

    @classmethod
    def zero(cls, rows: int, cols: int) -> "Matrix":
        return cls([zero_vec(cols) for _ in range(rows)])

    def __eq__(self, other) -> bool:
        return isinstance(other, Matrix) and self.entries == other.entries

    def __hash__(self) -> int:
        return hash(self.entries)

    def __repr__(self) -> str:
        body = "; ".join(" ".join(str(x) for x in r) for r in self.entries)
        return f"Matrix[{self.rows}x{self.cols}]({body})"

    def row(self, i: int) -> Vector:
        return self.entries[i]

    def col(self, j: int) -> Vector:
        return tuple(r[j] for r in self.entries)

    def col_list(self) -> list[Vector]:
        return [self.col(j) for j in range(self.cols)]

    def transpose(self) -> "Matrix":
        return Matrix.from_cols(self.entries, rows=self.cols)

    def hstack(self, other: "Matrix") -> "Matrix":
        if self.rows != other.rows:
            raise ValueError("row counts differ")
        return Matrix(a + b for a, b in zip(self.entries, other.entries))

    def vstack(self, other: "Matrix") -> "Matrix":
        if self.cols != other.cols:
            raise ValueError("column counts differ")
        return Matrix(self.entries + other.entries)

    def mat_vec(self, v: Sequence) -> Vector:
        v = vec(v)
        return tuple(dot(r, v) for r in self.entries)

    def mat_mul(self, other: "Matrix") -> "Matrix":
        if self.cols != other.rows:
            raise ValueError("shape mismatch")
        ocols = other.col_list()
        return Matrix([tuple(dot(r, c) for c in ocols) for r in self.entries])

    def submatrix(self, row_idx: Sequence[int], col_idx: Sequence[int]) -> "Matrix":
        return Matrix([tuple(self.entries[i][j] for j in col_idx) for i in row_idx])


def _integerized_rows(m: Matrix) -> list[list[int]]:
    """Row-scaled integer copy (row scaling preserves rank)."""
    out = []
    for r in m.entries:
        den = math.lcm(*(x.denominator for x in r)) if r else 1
        out.append([int(x * den) for x in r])
    return out


def _bareiss_rank(rows: list[list[int]]) -> int:
    if not rows or not rows[0]:
        return 0
    m = [r[:] for r in rows]
    nr, nc = len(m), len(m[0])
    prev = 1
    pr = 0
    for pc in range(nc):
        if pr >= nr:
            break
        piv = next((i for i in range(pr, nr) if m[i][pc]), None)
        if piv is None:
            continue
        if piv != pr:
            m[pr], m[piv] = m[piv], m[pr]
        mp = m[pr]
        for i in range(pr + 1, nr):
            mi = m[i]
            f = mi[pc]
            if f:
                for j in range(pc + 1, nc):
                    mi[j] = (mi[j] * mp[pc] - f * mp[j]) // prev
            elif prev != 1 or mp[pc] != 1:
                for j in range(pc + 1, nc):
                    mi[j] = (mi[j] * mp[pc]) // prev
            mi[pc] = 0
        prev = mp[pc]
        pr += 1
    return pr


def rank(m: Matrix) -> int:
    """Column-space dimension, exact."""
    return _bareiss_rank(_integerized_rows(m))


def det(m: Matrix) -> Fraction:
    """Exact determinant of a square matrix (fraction-free elimination)."""
    if m.rows != m.cols:
        raise ValueError("determinant of a non-square matrix")
    if m.rows == 0:
        return Fraction(1)
    scale = Fraction(1)
    rows = []
    for r in m.entries:
        den = math.lcm(*(x.denominator for x in r))
        scale *= den
        rows.append([int(x * den) for x in r])
    n = len(rows)
    prev = 1
    sign = 1
    for pc in range(n):
        piv = next((i for i in range(pc, n) if rows[i][pc]), None)
        if piv is None:
            return Fraction(0)
        if piv != pc:
            rows[pc], rows[piv] = rows[piv], rows[pc]
            sign = -sign
        rp = rows[pc]
        for i in range(pc + 1, n):
            ri = rows[i]
            f = ri[pc]
            for j in range(pc + 1, n):
                ri[j] = (ri[j] * rp[pc] - f * rp[j]) // prev
            ri[pc] = 0
        prev = rp[pc]
    return Fraction(sign * prev, 1) / scale


def gram_det(m: Matrix) -> Fraction:
    """det(m^T m): the sum of squared maximal minors, i.e. the squared
    volume of the parallelepiped spanned by the columns.

    Requires cols <= rows so the Gram matrix can be nonsingular at all.
    """
    if m.cols > m.rows:
        raise ValueError("gram_det needs cols <= rows")
    return det(m.transpose().mat_mul(m))


def max_minor(m: Matrix, r: int) -> Fraction:
    """Maximum absolute value of an r x r minor, by enumeration.

    r = 0 returns 1 by convention (the empty minor).
    """
    if r < 0 or r > min(m.rows, m.cols):
        raise ValueError("minor order out of range")
    if r == 0:
        return Fraction(1)
    best = Fraction(0)
    for ri in itertools.combinations(range(m.rows), r):
        for ci in itertools.combinations(range(m.cols), r):
            d = abs(det(m.submatrix(ri, ci)))
            if d > best:
                best = d
    return best


def canonical_rref(m: Matrix) -> Matrix:
    """Reduced row-echelon form; unique, so equal row spaces compare equal
    (after discarding zero rows, which sink to the bottom).
    """
    rows = [list(r) for r in m.entries]
    nr, nc = m.rows, m.cols
    pr = 0
    for pc in range(nc):
        if pr >= nr:
            break
        piv = next((i for i in range(pr, nr) if rows[i][pc] != 0), None)
        if piv is None:
            continue
        rows[pr], rows[piv] = rows[piv], rows[pr]
        inv = 1 / rows[pr][pc]
        rows[pr] = [x * inv for x in rows[pr]]
        for i in range(nr):
            if i != pr and rows[i][pc] != 0:
                f = rows[i][pc]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[pr])]
        pr += 1
    return Matrix(rows)


def row_space_basis(m: Matrix) -> tuple[Vector, ...]:
    """Canonical basis of the row space: nonzero rows of the RREF."""
    red = canonical_rref(m)
    return tuple(r for r in red.entries if any(x != 0 for x in r))


def nullspace(m: Matrix) -> list[Vector]:
    """Basis of the right kernel {x : m x = 0}."""
    red = canonical_rref(m)
    pivots: dict[int, int] = {}
    for i, r in enumerate(red.entries):
        for j, x in enumerate(r):
            if x != 0:
                pivots[j] = i
                break
    free = [j for j in range(m.cols) if j not in pivots]
    basis = []
    for f in free:
        v = [Fraction(0)] * m.cols
        v[f] = Fraction(1)
        for j, i in pivots.items():
            v[j] = -red.entries[i][f]
        basis.append(tuple(v))
    return basis


def solve(m: Matrix, rhs: Sequence) -> Vector | None:
    """One exact solution of m x = rhs, or None when inconsistent."""
    rhs = vec(rhs)
    if len(rhs) != m.rows:
        raise ValueError("rhs length mismatch")
    aug = m.hstack(Matrix.from_cols([rhs], rows=m.rows))
    red = canonical_rref(aug)
    x = [Fraction(0)] * m.cols
    for r in red.entries:
        lead = next((j for j, v in enumerate(r) if v != 0), None)
        if lead is None:
            continue
        if lead == m.cols:
            return None
        x[lead] = r[m.cols]
    return tuple(x)
