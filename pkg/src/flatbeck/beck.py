"""Discrete Beck dichotomy: enumerate spanned flats of a finite point set,
search for low-dimensional concentration families, count hyperplanes through
a given flat.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

from .exactlin import Vector, vec
from .flats import AffineFlat, affinely_independent

DEFAULT_POINT_BUDGET = 60


class EnumerationBudgetExceeded(RuntimeError):
    pass


class PointConfig:
    """Finite set of pairwise distinct rational points."""

    def __init__(self, points: Sequence[Sequence]):
        pts = [vec(p) for p in points]
        if not pts:
            raise ValueError("empty point set")
        n = len(pts[0])
        if any(len(p) != n for p in pts):
            raise ValueError("dimension mismatch")
        if len(set(pts)) != len(pts):
            raise ValueError("points must be pairwise distinct")
        self.ambient_dim = n
        self.points = pts

    def __len__(self) -> int:
        return len(self.points)


def enumerate_spanned_flats(x: PointConfig, k: int) -> set[AffineFlat]:
    """All k-planes spanned by k+1 affinely independent points of x,
    deduplicated through the canonical form."""
    n = x.ambient_dim
    if not 1 <= k <= n - 1:
        raise ValueError("need 1 <= k <= n-1")
    out: dict = {}
    for combo in itertools.combinations(range(len(x.points)), k + 1):
        pts = [x.points[i] for i in combo]
        if not affinely_independent(pts):
            continue
        f = AffineFlat.from_points(pts)
        out[f.canon] = f
    return set(out.values())


def concentrated_span_count(x: PointConfig, f: AffineFlat) -> int:
    """Number of spanned hyperplanes containing the given proper flat."""
    n = x.ambient_dim
    if f.dim >= n:
        raise ValueError("flat must be proper")
    return sum(
        1 for h in enumerate_spanned_flats(x, n - 1) if h.contains_flat(f)
    )


@dataclass
class DichotomyReport:
    concentrated: bool
    family: Optional[list[AffineFlat]]
    covered: Optional[int]
    hyperplane_count: Optional[int]
    ratio: Optional[float]
    complete: bool
    note: Optional[str] = None


def _cover_mask(points: list[Vector], f: AffineFlat) -> int:
    mask = 0
    for i, p in enumerate(points):
        if f.contains_point(p):
            mask |= 1 << i
    return mask


def dichotomy_report(
    x: PointConfig,
    epsilon: float = 0.1,
    budget: int = DEFAULT_POINT_BUDGET,
) -> DichotomyReport:
    """Either exhibit flats with dimension sum <= n-1 covering at least a
    (1 - epsilon) fraction of the points, or report the spanned hyperplane
    count and its ratio to N^n.

    Candidate flats are spanned by point subsets and have dimension >= 1
    (zero-dimensional flats would cover any finite set for free and void the
    dichotomy); the search walks families in decreasing dimension budget.
    """
    n = x.ambient_dim
    big_n = len(x.points)
    if big_n > budget:
        return DichotomyReport(
            False, None, None, None, None, complete=False,
            note=f"point count {big_n} exceeds budget {budget}",
        )
    need = big_n - int(epsilon * big_n)
    # candidate flats of each dimension 1..n-1 with their cover masks
    by_dim: dict[int, list[tuple[int, AffineFlat]]] = {d: [] for d in range(1, n)}
    for d in range(1, n):
        seen = set()
        for combo in itertools.combinations(range(big_n), d + 1):
            pts = [x.points[i] for i in combo]
            if not affinely_independent(pts):
                continue
            f = AffineFlat.from_points(pts)
            if f.canon in seen:
                continue
            seen.add(f.canon)
            by_dim[d].append((_cover_mask(x.points, f), f))
        # dominated masks are useless for covering
        by_dim[d].sort(key=lambda t: -bin(t[0]).count("1"))

    best: Optional[tuple[int, list[AffineFlat]]] = None

    def search(dim_budget: int, mask: int, chosen: list[AffineFlat], start_dim: int):
        nonlocal best
        covered = bin(mask).count("1")
        if covered >= need:
            if best is None or covered > best[0]:
                best = (covered, list(chosen))
            return True
        if dim_budget == 0:
            return False
        found = False
        for d in range(min(start_dim, dim_budget), 0, -1):
            for cov, f in by_dim[d]:
                if cov & ~mask == 0:
                    continue  # adds nothing
                if search(dim_budget - d, mask | cov, chosen + [f], d):
                    found = True
                    return True  # first hit is enough: report it
        return found

    hit = search(n - 1, 0, [], n - 1)
    if hit and best is not None:
        return DichotomyReport(
            True, best[1], best[0], None, None, complete=True
        )
    count = len(enumerate_spanned_flats(x, n - 1))
    return DichotomyReport(
        False, None, None, count, count / float(big_n) ** n, complete=True
    )
