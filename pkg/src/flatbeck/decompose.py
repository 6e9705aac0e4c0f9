"""Iterative extraction of minimal-dimension concentration flats.

The loop keeps a collection of flats; while its partition cost stays below
the ambient dimension it removes the w-neighborhood of the blockwise joins
of the lexicographically least minimizing partition, finds the lowest-
dimensional flat capturing a theta-fraction of what is left, and appends it.
The trace records cost and minimizing-partition count at every step; on any
cost plateau the count must drop strictly, which is what forces termination.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .exactlin import frac
from .flats import (
    AffineFlat,
    affinely_independent,
    dist2_point_flat,
    join,
)
from .flatcollect import FlatCollection, Partition
from .measures import DiscreteMeasure, irreducibility_modulus, mass_near_flat

MAX_STEPS = 200


class NotDiscretelyNC(ValueError):
    pass


@dataclass(frozen=True)
class TraceStep:
    step: int
    cost: int
    n_count: int
    chosen_partition: Partition


@dataclass
class DecompositionResult:
    flats: list[AffineFlat]
    pieces: list[DiscreteMeasure]
    trace: list[TraceStep]
    final_cost: int


def minimal_concentration_flat(
    mu: DiscreteMeasure, w, theta, min_dim: int = 0
) -> AffineFlat:
    """Lowest-dimensional flat whose w-neighborhood captures at least a
    theta-fraction of the total mass; candidates are spans of atom subsets,
    searched by dimension then in atom order (deterministic tie-break).

    The full space qualifies at dimension n, so for theta <= 1 this always
    returns.  The extraction loop calls this with min_dim = 1: zero-
    dimensional flats add nothing to the partition cost, so allowing them
    would break both termination and the plateau invariants.
    """
    w = frac(w)
    theta = frac(theta)
    if not 0 < theta <= 1:
        raise ValueError("theta must lie in (0, 1]")
    threshold = theta * mu.total_mass
    n = mu.ambient_dim
    pts = mu.points()
    for d in range(min_dim, n):
        seen = set()
        for combo in itertools.combinations(range(len(pts)), d + 1):
            sel = [pts[i] for i in combo]
            if not affinely_independent(sel):
                continue
            f = AffineFlat.from_points(sel)
            if f.canon in seen:
                continue
            seen.add(f.canon)
            if mass_near_flat(mu, f, w) >= threshold:
                return f
    return AffineFlat.full_space(n)


def decompose(x: DiscreteMeasure, n: int, w, theta) -> DecompositionResult:
    """Extract concentration flats until the collection's cost reaches n."""
    if x.ambient_dim != n:
        raise ValueError("measure ambient dimension differs from n")
    w = frac(w)
    flats: list[AffineFlat] = []
    pieces: list[DiscreteMeasure] = []
    trace: list[TraceStep] = []
    for step in range(MAX_STEPS):
        coll = FlatCollection(flats)
        cost = coll.cost()
        if cost >= n:
            return DecompositionResult(flats, pieces, trace, final_cost=cost)
        n_count, _ = coll.minimizing_census()
        partition = coll.lexicographically_least_minimizer()
        cover = [join([flats[i] for i in block]) for block in partition]
        w2 = w * w
        kept = [
            (p, wt)
            for p, wt in x.atoms
            if all(dist2_point_flat(p, f) > w2 for f in cover)
        ]
        if not kept or sum(wt for _, wt in kept) == 0:
            raise NotDiscretelyNC(
                f"input not discretely NC at scale {w}: nothing remains off the "
                f"cost-{cost} cover at step {step}"
            )
        rest = DiscreteMeasure(kept, x.resolution)
        v = minimal_concentration_flat(rest, w, theta, min_dim=1)
        piece_atoms = [
            (p, wt) for p, wt in rest.atoms if dist2_point_flat(p, v) <= w2
        ]
        total = sum(wt for _, wt in piece_atoms)
        piece = DiscreteMeasure(
            [(p, wt / total) for p, wt in piece_atoms], x.resolution
        )
        trace.append(TraceStep(step, cost, n_count, partition))
        flats.append(v)
        pieces.append(piece)
    raise RuntimeError("decomposition failed to terminate within the step cap")


@dataclass
class ClauseReport:
    name: str
    passed: bool
    witness: Optional[str] = None


@dataclass
class DecompositionReport:
    clauses: list[ClauseReport] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.clauses)

    def add(self, name: str, passed: bool, witness: Optional[str] = None):
        self.clauses.append(ClauseReport(name, passed, witness))


def verify_decomposition(r: DecompositionResult, n: int, w, tau) -> DecompositionReport:
    """Check the three output clauses plus the trace invariants.

    (i) every piece is (w, tau)-irreducible within its flat (pieces on point
    flats pass vacuously: a point has no proper subflat), (ii) supports are
    pairwise disjoint, (iii) the flat collection has cost >= n.  The trace
    must have nondecreasing cost, strictly decreasing minimizing-partition
    count on every plateau, and at most one minimizing extension per
    minimizing partition across each plateau step.
    """
    w = frac(w)
    tau = frac(tau)
    report = DecompositionReport()

    stray = None
    w2 = w * w
    tol2 = max(w2, r.pieces[0].resolution ** 2) if r.pieces else w2
    for i, (piece, flat) in enumerate(zip(r.pieces, r.flats)):
        for p, _ in piece.atoms:
            if dist2_point_flat(p, flat) > tol2:
                stray = (i, p)
                break
        if stray:
            break
    report.add(
        "supports-in-flats",
        stray is None,
        None if stray is None else f"piece {stray[0]} atom {stray[1]} off its flat",
    )

    worst: Optional[tuple[int, Fraction]] = None
    if stray is None:
        for i, (piece, flat) in enumerate(zip(r.pieces, r.flats)):
            if flat.dim == 0:
                continue
            mod = irreducibility_modulus(
                piece, flat, w, support_tolerance=max(w, piece.resolution)
            )
            if worst is None or mod > worst[1]:
                worst = (i, mod)
    if worst is None:
        report.add("irreducible-pieces", stray is None)
    else:
        ok = worst[1] <= tau
        report.add(
            "irreducible-pieces",
            ok,
            None if ok else f"piece {worst[0]} has modulus {worst[1]} > tau {tau}",
        )

    shared = None
    seen: dict[tuple, int] = {}
    for i, piece in enumerate(r.pieces):
        for p, _ in piece.atoms:
            if p in seen and seen[p] != i:
                shared = (seen[p], i, p)
                break
            seen[p] = i
        if shared:
            break
    report.add(
        "disjoint-supports",
        shared is None,
        None if shared is None else f"atom {shared[2]} in pieces {shared[0]} and {shared[1]}",
    )

    final_cost = FlatCollection(r.flats).cost() if r.flats else 0
    report.add(
        "cost-at-least-n",
        final_cost >= n,
        None if final_cost >= n else f"final cost {final_cost} < {n}",
    )

    costs = [t.cost for t in r.trace] + [final_cost]
    counts = [t.n_count for t in r.trace]
    mono = all(a <= b for a, b in zip(costs, costs[1:]))
    report.add("trace-cost-nondecreasing", mono, None if mono else f"costs {costs}")

    plateau_ok = True
    plateau_witness = None
    for i in range(len(r.trace) - 1):
        if r.trace[i].cost == r.trace[i + 1].cost:
            if not counts[i + 1] < counts[i]:
                plateau_ok = False
                plateau_witness = f"plateau at step {i}: N {counts[i]} -> {counts[i+1]}"
                break
    report.add("plateau-count-strictly-decreasing", plateau_ok, plateau_witness)

    ext_ok, ext_witness = _check_extension_uniqueness(r)
    report.add("at-most-one-minimizing-extension", ext_ok, ext_witness)
    return report


def _check_extension_uniqueness(r: DecompositionResult) -> tuple[bool, Optional[str]]:
    """On each plateau step, every minimizing partition of the previous
    collection may gain at most one minimizing extension."""
    for i in range(len(r.trace) - 1):
        if r.trace[i].cost != r.trace[i + 1].cost:
            continue
        prev = FlatCollection(r.flats[: i])
        nxt = FlatCollection(r.flats[: i + 1])
        target = nxt.cost()
        _, minimizers = prev.minimizing_census()
        new_index = i
        for part in minimizers:
            extensions = 0
            for b in range(len(part)):
                blocks = [list(x) for x in part]
                blocks[b].append(new_index)
                if nxt.cost_of_partition(blocks) == target:
                    extensions += 1
            if extensions > 1:
                return False, f"partition {part} at step {i} has {extensions} minimizing extensions"
    return True, None
