"""Stable-position machinery: augmented point/basis matrices, the rank
function over index pairs, minor-floor certificates, the stabilizing ball
search and stability of join-meet projections.

A frame holds flats V_j with an orthogonal rational basis of each
linearization and a grid of measures mu[j][i] supported on V_j.  For index
sets Ibar (atom slots) and J (flats), the matrix (B_Ibar(x), A_J) stacks
lifted picked atoms next to basis columns; c-stable position means the rank
of that matrix does not depend on the atom picks and some maximal minor is
quantitatively large.  Minor magnitudes are always compared after dividing
by the product of the squared norms of the participating columns, so the
floor is scale-free; with orthogonal (not orthonormal) bases this matches
the orthonormal convention up to recorded factors.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .exactlin import (
    Matrix,
    Vector,
    det,
    dot,
    norm2,
    rank,
    vec,
    vscale,
    vsub,
)
from .flats import (
    AffineFlat,
    FlatChart,
    dist2_point_flat,
    join,
    linearize,
    meet,
    wedge_angle_sin2,
)
from .measures import DiscreteMeasure

AtomSlot = tuple[int, int]  # (flat index j, measure index i)


@dataclass(frozen=True)
class IndexPair:
    atoms_index: frozenset[AtomSlot]
    flats_index: frozenset[int]

    @classmethod
    def of(cls, atoms: Iterable[AtomSlot] = (), flats: Iterable[int] = ()) -> "IndexPair":
        return cls(frozenset(atoms), frozenset(flats))

    def sorted_atoms(self) -> list[AtomSlot]:
        return sorted(self.atoms_index)

    def sorted_flats(self) -> list[int]:
        return sorted(self.flats_index)


def orthogonalize(cols: Sequence[Vector]) -> tuple[list[Vector], list[Fraction]]:
    """Gram-Schmidt without normalization; returns vectors and squared norms."""
    basis: list[Vector] = []
    norms: list[Fraction] = []
    for c in cols:
        v = vec(c)
        for o, s in zip(basis, norms):
            v = vsub(v, vscale(dot(v, o) / s, o))
        if all(x == 0 for x in v):
            raise ValueError("dependent columns in basis input")
        basis.append(v)
        norms.append(norm2(v))
    return basis, norms


class StableFrame:
    """Flats, orthogonal linearization bases and a grid of measures."""

    def __init__(
        self,
        flats: Sequence[AffineFlat],
        measures: Sequence[Sequence[DiscreteMeasure]],
    ):
        if len(flats) != len(measures):
            raise ValueError("one measure list per flat required")
        self.flats = list(flats)
        self.measures = [list(ms) for ms in measures]
        if not self.flats:
            raise ValueError("empty frame")
        n = self.flats[0].ambient_dim
        if any(f.ambient_dim != n for f in self.flats):
            raise ValueError("ambient dimensions differ")
        self.ambient_dim = n
        for j, (f, ms) in enumerate(zip(self.flats, self.measures)):
            if not ms:
                raise ValueError(f"flat {j} carries no measures")
            for i, mu in enumerate(ms):
                for p, _ in mu.atoms:
                    if dist2_point_flat(p, f) != 0:
                        raise ValueError(f"measure ({j},{i}) has an atom off flat {j}")
                    if norm2(p) > 1:
                        raise ValueError(f"measure ({j},{i}) leaves the unit ball")
        self.bases = []
        self.basis_norm2 = []
        for f in self.flats:
            b, s = orthogonalize(linearize(f).col_list())
            self.bases.append(b)
            self.basis_norm2.append(s)

    @property
    def k(self) -> int:
        return len(self.flats)

    def dims(self) -> list[int]:
        return [f.dim for f in self.flats]

    def atom_slots(self) -> list[AtomSlot]:
        return [
            (j, i) for j, ms in enumerate(self.measures) for i in range(len(ms))
        ]

    def full_index(self) -> IndexPair:
        return IndexPair.of(self.atom_slots(), ())

    def block_atoms(self, flats_subset: Iterable[int]) -> frozenset[AtomSlot]:
        sel = set(flats_subset)
        return frozenset(s for s in self.atom_slots() if s[0] in sel)

    def support_sizes(self) -> dict[AtomSlot, int]:
        return {(j, i): len(self.measures[j][i]) for j, i in self.atom_slots()}

    def restricted(self, centers: dict[AtomSlot, Vector], radius: Fraction) -> "StableFrame":
        """Frame with every measure cut down to a closed ball around its
        designated center atom (weights kept as they are)."""
        r2 = radius * radius
        new_measures = []
        for j, ms in enumerate(self.measures):
            row = []
            for i, mu in enumerate(ms):
                c = centers[(j, i)]
                kept = [
                    (p, w) for p, w in mu.atoms if norm2(vsub(p, c)) <= r2
                ]
                row.append(DiscreteMeasure(kept, mu.resolution))
            new_measures.append(row)
        return StableFrame(self.flats, new_measures)


Pick = dict[AtomSlot, int]


def build_matrix(frame: StableFrame, pick: Pick, idx: IndexPair) -> Matrix:
    """Columns: lifted picked atoms over sorted Ibar, then the orthogonal
    basis columns of every flat in sorted J."""
    cols: list[Vector] = []
    for slot in idx.sorted_atoms():
        j, i = slot
        if slot not in pick:
            raise ValueError(f"pick missing atom slot {slot}")
        p = frame.measures[j][i].atoms[pick[slot]][0]
        cols.append(p + (Fraction(1),))
    for j in idx.sorted_flats():
        cols.extend(frame.bases[j])
    return Matrix.from_cols(cols, rows=frame.ambient_dim + 1)


def iter_picks(
    frame: StableFrame,
    slots: Sequence[AtomSlot],
    budget: Optional[int] = None,
    rng=None,
) -> tuple[list[Pick], bool]:
    """All atom picks over the slots; seeded sample when over budget."""
    sizes = [len(frame.measures[j][i]) for j, i in slots]
    total = 1
    for s in sizes:
        total *= s
    if budget is None or total <= budget:
        picks = [
            dict(zip(slots, combo))
            for combo in itertools.product(*(range(s) for s in sizes))
        ]
        return picks, False
    if rng is None:
        raise ValueError(f"{total} picks exceed budget {budget} and no rng given")
    picks = []
    for _ in range(budget):
        picks.append({slot: rng.randrange(s) for slot, s in zip(slots, sizes)})
    return picks, True


@dataclass
class RankInconsistency:
    idx: IndexPair
    pick_a: Pick
    rank_a: int
    pick_b: Pick
    rank_b: int


def rank_r(
    frame: StableFrame,
    idx: IndexPair,
    budget: Optional[int] = 4096,
    rng=None,
) -> int | RankInconsistency:
    """The common rank of (B_Ibar(x), A_J) over atom picks, or an
    inconsistency report naming two picks with different ranks."""
    slots = idx.sorted_atoms()
    picks, _ = iter_picks(frame, slots, budget, rng)
    first_pick = picks[0]
    first_rank = rank(build_matrix(frame, first_pick, idx))
    for p in picks[1:]:
        r = rank(build_matrix(frame, p, idx))
        if r != first_rank:
            return RankInconsistency(idx, first_pick, first_rank, p, r)
    return first_rank


def _pivot_columns(m: Matrix) -> tuple[int, list[int]]:
    """Rank and one set of independent columns (Gaussian pivots)."""
    rows = [list(r) for r in m.entries]
    nr, nc = m.rows, m.cols
    pr = 0
    pivots = []
    for pc in range(nc):
        if pr >= nr:
            break
        piv = next((i for i in range(pr, nr) if rows[i][pc] != 0), None)
        if piv is None:
            continue
        rows[pr], rows[piv] = rows[piv], rows[pr]
        for i in range(pr + 1, nr):
            if rows[i][pc] != 0:
                f = rows[i][pc] / rows[pr][pc]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[pr])]
        pivots.append(pc)
        pr += 1
    return pr, pivots


def minor_floors(m: Matrix, r: int, exact: bool = False) -> tuple[Fraction, Fraction]:
    """(normalized, raw) lower bounds - exact values when exact=True - for
    the largest squared r x r minor, where the normalized form divides each
    det^2 by the product of the participating squared column norms.

    The cheap route fixes the Gaussian pivot columns and maximizes over row
    subsets only; the result is a true lower bound, and since the pivot
    columns are independent at the true rank it is positive.
    """
    if r == 0:
        return Fraction(1), Fraction(1)
    col_norms = [norm2(m.col(c)) for c in range(m.cols)]

    def best_over_rows(col_subset: Sequence[int]) -> tuple[Fraction, Fraction]:
        denom = Fraction(1)
        for c in col_subset:
            denom *= col_norms[c]
        best = Fraction(0)
        for row_subset in itertools.combinations(range(m.rows), r):
            d = det(m.submatrix(row_subset, col_subset))
            if d * d > best:
                best = d * d
        return (best / denom if denom else Fraction(0)), best

    if exact:
        pairs = [
            best_over_rows(cs) for cs in itertools.combinations(range(m.cols), r)
        ]
        return max(p[0] for p in pairs), max(p[1] for p in pairs)
    _, pivots = _pivot_columns(m)
    return best_over_rows(pivots[:r])


def normalized_minor_floor(m: Matrix, r: int, exact: bool = False) -> Fraction:
    return minor_floors(m, r, exact)[0]


@dataclass
class CertificationResult:
    ok: bool
    floor: Optional[Fraction]  # column-normalized squared minor floor
    ranks: dict[IndexPair, int]
    raw_floor: Optional[Fraction] = None  # unnormalized squared minor floor
    witness: Optional[str] = None
    sampled: bool = False

    def __bool__(self) -> bool:
        return self.ok


class CertificationBudgetExceeded(RuntimeError):
    pass


def _index_pairs(frame: StableFrame) -> list[IndexPair]:
    slots = frame.atom_slots()
    flats_range = range(frame.k)
    pairs = []
    for na in range(len(slots) + 1):
        for atoms in itertools.combinations(slots, na):
            for nf in range(frame.k + 1):
                for fl in itertools.combinations(flats_range, nf):
                    pairs.append(IndexPair.of(atoms, fl))
    return pairs


def certify_stability(
    frame: StableFrame,
    c2: Fraction,
    budget: int = 200_000,
    rng=None,
) -> CertificationResult:
    """Certify c-stable position with the squared, column-normalized floor c2:
    every index pair must have a pick-independent rank, and every pick's
    normalized maximal minor must be at least c2."""
    c2 = Fraction(c2)
    pairs = _index_pairs(frame)
    sizes = frame.support_sizes()
    total = 0
    for idx in pairs:
        picks = 1
        for slot in idx.atoms_index:
            picks *= sizes[slot]
        total += picks
    if total > budget:
        raise CertificationBudgetExceeded(
            f"{total} (index, pick) combinations exceed budget {budget}"
        )
    ranks: dict[IndexPair, int] = {}
    floor: Optional[Fraction] = None
    raw_floor: Optional[Fraction] = None
    for idx in pairs:
        got = rank_r(frame, idx, budget=None)
        if isinstance(got, RankInconsistency):
            return CertificationResult(
                False,
                None,
                ranks,
                witness=(
                    f"rank not constant on Ibar={sorted(idx.atoms_index)} "
                    f"J={sorted(idx.flats_index)}: {got.rank_a} vs {got.rank_b}"
                ),
            )
        ranks[idx] = got
        picks, _ = iter_picks(frame, idx.sorted_atoms(), budget=None)
        for p in picks:
            m = build_matrix(frame, p, idx)
            val, raw = minor_floors(m, got)
            if val < c2:
                val, raw = minor_floors(m, got, exact=True)
            if val < c2:
                return CertificationResult(
                    False,
                    val,
                    ranks,
                    raw_floor=raw,
                    witness=(
                        f"normalized minor {val} < c2 {c2} at "
                        f"Ibar={sorted(idx.atoms_index)} J={sorted(idx.flats_index)} pick={p}"
                    ),
                )
            if floor is None or val < floor:
                floor = val
            if raw_floor is None or raw < raw_floor:
                raw_floor = raw
    return CertificationResult(True, floor, ranks, raw_floor=raw_floor)


class StabilizationError(RuntimeError):
    pass


def stabilize(
    frame: StableFrame,
    required_ranks: Optional[dict[IndexPair, int]] = None,
    max_halvings: int = 40,
    budget: int = 200_000,
) -> tuple[StableFrame, Fraction]:
    """Find the atom tuple with the maximum possible rank-vector sum,
    restrict every measure to a ball around its chosen atom, and shrink the
    balls dyadically until certification passes with c2 equal to half the
    normalized-minor floor achieved by the chosen tuple."""
    slots = frame.atom_slots()
    pairs = _index_pairs(frame)
    picks, sampled = iter_picks(frame, slots, budget=budget)
    best_pick: Optional[Pick] = None
    best_score = -1
    for p in picks:
        score = 0
        for idx in pairs:
            sub = {s: p[s] for s in idx.atoms_index}
            score += rank(build_matrix(frame, sub, idx))
        if score > best_score:
            best_score = score
            best_pick = p
    assert best_pick is not None
    if required_ranks:
        for idx, want in required_ranks.items():
            sub = {s: best_pick[s] for s in idx.atoms_index}
            got = rank(build_matrix(frame, sub, idx))
            if got != want:
                raise StabilizationError(
                    f"cannot stabilize: rank {got} != required {want} on "
                    f"Ibar={sorted(idx.atoms_index)} J={sorted(idx.flats_index)}"
                )
    floor: Optional[Fraction] = None
    for idx in pairs:
        sub = {s: best_pick[s] for s in idx.atoms_index}
        m = build_matrix(frame, sub, idx)
        r = rank(m)
        val = normalized_minor_floor(m, r, exact=True)
        if floor is None or val < floor:
            floor = val
    assert floor is not None and floor > 0
    target = floor / 2
    centers = {
        (j, i): frame.measures[j][i].atoms[best_pick[(j, i)]][0] for j, i in slots
    }
    radius = Fraction(1)
    for _ in range(max_halvings):
        restricted = frame.restricted(centers, radius)
        cert = certify_stability(restricted, target, budget=budget)
        if cert.ok:
            return restricted, target
        radius /= 2
    raise StabilizationError("cannot stabilize at configured ball radii")


def dimension_sum(frame: StableFrame, flats_subset: Iterable[int]) -> int:
    return sum(frame.flats[j].dim for j in flats_subset)


@dataclass
class RankRuleViolation:
    rule: str
    i_set: tuple[int, ...]
    j_set: tuple[int, ...]
    got: int
    bound: int


def minimal_rank_report(
    frame: StableFrame, budget: Optional[int] = 4096
) -> tuple[dict[tuple[tuple[int, ...], tuple[int, ...]], int], list[RankRuleViolation]]:
    """Rank table r(I, J) over block-level disjoint index sets, checked
    against the minimal-position rules (dimension sums written n_I):

      r(I, emptyset) = n_I,
      r(I, J) >= n_{I u J} + 1   for J nonempty,
      r(I, [k] \\ I) = n + 1      for I a proper subset.

    Assumes every flat j carries dim V_j measures and the dimension sums
    add up to the ambient dimension (the p = 0 minimal case).
    """
    k = frame.k
    n = frame.ambient_dim
    table: dict[tuple[tuple[int, ...], tuple[int, ...]], int] = {}
    violations: list[RankRuleViolation] = []
    for i_size in range(k + 1):
        for i_set in itertools.combinations(range(k), i_size):
            rest = [j for j in range(k) if j not in i_set]
            for j_size in range(len(rest) + 1):
                for j_set in itertools.combinations(rest, j_size):
                    idx = IndexPair(frame.block_atoms(i_set), frozenset(j_set))
                    got = rank_r(frame, idx, budget=budget)
                    if isinstance(got, RankInconsistency):
                        violations.append(
                            RankRuleViolation("rank-constant", i_set, j_set, got.rank_b, got.rank_a)
                        )
                        continue
                    table[(i_set, j_set)] = got
                    n_i = dimension_sum(frame, i_set)
                    n_ij = dimension_sum(frame, set(i_set) | set(j_set))
                    if not j_set:
                        if got != n_i:
                            violations.append(
                                RankRuleViolation("r(I,0)=n_I", i_set, j_set, got, n_i)
                            )
                    else:
                        if got < n_ij + 1:
                            violations.append(
                                RankRuleViolation("r(I,J)>=n_IJ+1", i_set, j_set, got, n_ij + 1)
                            )
                        if set(i_set) | set(j_set) == set(range(k)) and got != n + 1:
                            violations.append(
                                RankRuleViolation("r(I,[k]-I)=n+1", i_set, j_set, got, n + 1)
                            )
    return table, violations


def rank_inequality_report(
    frame: StableFrame, budget: Optional[int] = 2048
) -> list[RankRuleViolation]:
    """Exhaustive check of the one-step rank inequalities:

      r(Ibar + (j,i), J) <= r(Ibar, J) + 1
      r(Ibar, J + j)     <= r(Ibar, J) + n_j + 1
      r(Ibar + all of flat j's slots, J) >= r(Ibar, J + j) - 1
    """
    violations: list[RankRuleViolation] = []
    slots = frame.atom_slots()

    def rk(idx: IndexPair) -> int:
        got = rank_r(frame, idx, budget=budget)
        if isinstance(got, RankInconsistency):
            raise StabilizationError("rank not pick-independent; certify first")
        return got

    for idx in _index_pairs(frame):
        base = rk(idx)
        for slot in slots:
            if slot in idx.atoms_index:
                continue
            grown = IndexPair(idx.atoms_index | {slot}, idx.flats_index)
            if rk(grown) > base + 1:
                violations.append(
                    RankRuleViolation("atom-step", tuple(sorted(idx.atoms_index)), tuple(sorted(idx.flats_index)), rk(grown), base + 1)
                )
        for j in range(frame.k):
            if j in idx.flats_index:
                continue
            grown_j = IndexPair(idx.atoms_index, idx.flats_index | {j})
            up = rk(grown_j)
            n_j = frame.flats[j].dim
            if up > base + n_j + 1:
                violations.append(
                    RankRuleViolation("flat-step", tuple(sorted(idx.atoms_index)), tuple(sorted(idx.flats_index)), up, base + n_j + 1)
                )
            filled = IndexPair(
                idx.atoms_index | {s for s in slots if s[0] == j}, idx.flats_index
            )
            if rk(filled) < up - 1:
                violations.append(
                    RankRuleViolation("fill-step", tuple(sorted(idx.atoms_index)), tuple(sorted(idx.flats_index)), rk(filled), up - 1)
                )
    return violations


@dataclass
class ProjectedStabilityReport:
    ok: bool
    sin2_theta: Fraction
    achieved_c2: Optional[Fraction]
    image_frame: Optional[StableFrame]
    witness: Optional[str] = None


def projected_stability_check(
    frame: StableFrame,
    i0: Iterable[AtomSlot],
    u: AffineFlat,
    pick: Optional[Pick] = None,
    budget: int = 200_000,
) -> ProjectedStabilityReport:
    """Project the measures outside i0 through the join-meet map with center
    spanned by the picked i0 atoms, re-certify stability of the image frame
    inside the screen u, and report the achieved floor and the squared sine
    between the center span and the screen."""
    from .project import join_meet  # local import to avoid a cycle

    i0 = sorted(set(i0))
    if not i0:
        raise ValueError("i0 must be nonempty")
    if pick is None:
        pick = {slot: 0 for slot in i0}
    pts = [frame.measures[j][i].atoms[pick[(j, i)]][0] for j, i in i0]
    center = AffineFlat.from_points(pts)
    n = frame.ambient_dim
    n0 = center.dim
    if u.ambient_dim != n or u.dim != n - n0 - 1:
        raise ValueError(f"screen must have dimension {n - n0 - 1}")
    if meet(u, center) is not None or join([u, center]).dim != n:
        raise ValueError("screen not transversal to the center span")
    sin2 = wedge_angle_sin2(linearize(center), linearize(u))

    chart = FlatChart(u)
    image_flats = []
    image_measures = []
    for j in range(frame.k):
        remaining = [
            (i, mu)
            for i, mu in enumerate(frame.measures[j])
            if (j, i) not in set(i0)
        ]
        if not remaining:
            continue
        joined = join([frame.flats[j], center])
        img = meet(joined, u)
        if img is None:
            return ProjectedStabilityReport(
                False, sin2, None, None, witness=f"flat {j} projects to nothing"
            )
        image_flats.append(chart.flat_to_coords(img))
        row = []
        for _, mu in remaining:
            atom_imgs = []
            for p, wgt in mu.atoms:
                y = join_meet(center, u, p)
                atom_imgs.append((chart.to_coords(y), wgt))
            row.append(DiscreteMeasure(atom_imgs, mu.resolution))
        image_measures.append(row)
    if not image_flats:
        raise ValueError("i0 covers every measure; nothing to project")
    # exact power-of-two rescale back into the unit ball if projection
    # pushed anything out (mirrors rescaling by ~1/C after projecting)
    peak = max(
        norm2(p) for row in image_measures for mu in row for p, _ in mu.atoms
    )
    lam = Fraction(1)
    while peak * lam * lam > 1:
        lam /= 2
    if lam != 1:
        image_flats = [
            AffineFlat(vscale(lam, f.basepoint), f.directions) for f in image_flats
        ]
        image_measures = [
            [
                DiscreteMeasure(
                    [(vscale(lam, p), w) for p, w in mu.atoms], mu.resolution
                )
                for mu in row
            ]
            for row in image_measures
        ]
    try:
        image = StableFrame(image_flats, image_measures)
    except ValueError as e:
        return ProjectedStabilityReport(False, sin2, None, None, witness=str(e))
    cert = certify_stability(image, Fraction(0), budget=budget)
    if not cert.ok:
        return ProjectedStabilityReport(False, sin2, None, image, witness=cert.witness)
    ok = cert.floor is not None and cert.floor > 0
    return ProjectedStabilityReport(ok, sin2, cert.floor, image)
