"""Radial and join-meet projections, the hyperplane chart on a flat, and the
hyperplane map psi with its affine matrix form.

psi sends a hyperplane W of the screen U inside the first flat to the meet
of aff(E, H_W) with the last flat, where H_W is the unique hyperplane of the
first flat through the center C lying over W.  For a generic screen U this
map is projective, not affine; it is exactly affine precisely when U is
chosen so that span(dir U, dir E) = span(dir Q1, dir E).  The context
builder constructs U inside that kernel (the choice of screen is ours to
make), checks the alignment certificate exactly, and psi_matrix then
recovers the exact (M, y0) parameter map and verifies it by substitution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

from .exactlin import (
    Matrix,
    Vector,
    det,
    frac,
    nullspace,
    rank,
    row_space_basis,
    vec,
    vadd,
    vscale,
    vsub,
    zero_vec,
)
from .flats import (
    AffineFlat,
    FlatChart,
    dist2_flats,
    dist2_point_flat,
    join,
    linearize,
    meet,
)
from .flatcollect import FlatCollection
from .measures import DiscreteMeasure


class ParallelRay(ValueError):
    pass


class NonGenericScreen(ValueError):
    pass


def radial_to_hyperplane(x: Sequence, h: AffineFlat, y: Sequence) -> Vector:
    """Unique intersection of the line through x and y with the hyperplane
    screen h; errors when the ray is parallel to the screen."""
    x = vec(x)
    y = vec(y)
    if h.dim != h.ambient_dim - 1:
        raise ValueError("screen must be a hyperplane")
    if dist2_point_flat(x, h) == 0:
        raise ValueError("projection center lies on the screen")
    if x == y:
        raise ValueError("ray through coincident points is undefined")
    if dist2_point_flat(y, h) == 0:
        return y
    line = AffineFlat.from_points([x, y])
    got = meet(line, h)
    if got is None or got.dim != 0:
        raise ParallelRay("ray parallel to the screen")
    return got.basepoint


def join_meet(q: AffineFlat, z: AffineFlat, v: Sequence) -> Vector:
    """aff(v, q) meet z, required to be a single point."""
    v = vec(v)
    if dist2_point_flat(v, q) == 0:
        raise ValueError("point lies on the projection center")
    joined = join([AffineFlat.point(v), q])
    got = meet(joined, z)
    if got is None or got.dim != 0:
        raise NonGenericScreen("join does not meet the screen in a point")
    return got.basepoint


def flat_radial_image(x: Sequence, v: AffineFlat, screen: AffineFlat) -> AffineFlat:
    """Image flat of v under radial projection from the point x onto the
    screen: meet(join(x, v), screen).  Has dim v when x is off v and
    dim v - 1 when x lies on v (for screens generic to the configuration).
    """
    joined = join([AffineFlat.point(vec(x)), v])
    got = meet(joined, screen)
    if got is None:
        raise NonGenericScreen("projected flat misses the screen")
    return got


def pushforward(mu: DiscreteMeasure, point_map: Callable[[Vector], Sequence]) -> DiscreteMeasure:
    """Map atoms, keep weights, merge coincident images by weight addition."""
    merged: dict[Vector, Fraction] = {}
    order: list[Vector] = []
    for p, w in mu.atoms:
        img = vec(point_map(p))
        if img not in merged:
            merged[img] = Fraction(0)
            order.append(img)
        merged[img] += w
    return DiscreteMeasure([(p, merged[p]) for p in order], mu.resolution)


def sphere_direction(x: Sequence, y: Sequence) -> tuple[float, ...]:
    """Float unit vector from x toward y (the sphere-target radial map;
    unit vectors leave Q so this is a convenience only)."""
    d = [float(b) - float(a) for a, b in zip(x, y)]
    n = math.sqrt(sum(t * t for t in d))
    if n == 0:
        raise ValueError("coincident points")
    return tuple(t / n for t in d)


@dataclass(frozen=True)
class HyperplaneCoords:
    """Hyperplane {u : a . u = b} of the chart screen; a must be nonzero."""

    a: Vector
    b: Fraction

    def __post_init__(self):
        object.__setattr__(self, "a", vec(self.a))
        object.__setattr__(self, "b", frac(self.b))
        if all(x == 0 for x in self.a):
            raise ValueError("zero normal")


class ChartFrame:
    """(u, t, w) affine chart on a host flat F with screen U = {(u,0,0)} and
    center C = {(0,1,w)}."""

    def __init__(self, host: AffineFlat, screen: AffineFlat, center: AffineFlat):
        if not (host.contains_flat(screen) and host.contains_flat(center)):
            raise ValueError("screen and center must lie inside the host flat")
        self.host = host
        self.screen = screen
        self.center = center
        self.p = screen.dim
        t_dir = vsub(center.basepoint, screen.basepoint)
        cols = list(screen.directions) + [t_dir] + list(center.directions)
        if rank(Matrix(cols)) != host.dim or len(cols) != host.dim:
            raise ValueError("screen, transverse direction and center do not frame the host")
        self._chart = FlatChart(AffineFlat(screen.basepoint, cols))
        if self._chart.flat.canon != host.canon:
            raise ValueError("chart does not span the host flat")

    def to_chart(self, ambient_point: Sequence) -> Vector:
        return self._chart.to_coords(ambient_point)

    def to_ambient(self, coords: Sequence) -> Vector:
        return self._chart.to_ambient(coords)

    def split(self, coords: Vector) -> tuple[Vector, Fraction, Vector]:
        u = coords[: self.p]
        t = coords[self.p]
        w = coords[self.p + 1 :]
        return u, t, w


def chart_project(cf: ChartFrame, coords: Sequence) -> Vector:
    """The center-fiber projection in chart coordinates: (u,t,w) -> u/(1-t)."""
    u, t, _ = cf.split(vec(coords))
    if t == 1:
        raise ValueError("center fiber")
    return tuple(x / (1 - t) for x in u)


def lift_hyperplane(cf: ChartFrame, hc: HyperplaneCoords) -> AffineFlat:
    """The unique hyperplane H_W of the host flat containing the center with
    chart equation a.u + b(t - 1) = 0; its points over t = 0 are exactly W."""
    if len(hc.a) != cf.p:
        raise ValueError("normal length differs from screen dimension")
    n1 = cf.host.dim
    row = list(hc.a) + [hc.b] + [Fraction(0)] * (n1 - cf.p - 1)
    m = Matrix([row])
    dirs = nullspace(m)
    base = [Fraction(0)] * n1
    base[cf.p] = Fraction(1)  # the chart point (0, 1, 0) always solves
    flat_in_chart = AffineFlat(base, dirs)
    ambient = [cf.to_ambient(flat_in_chart.basepoint)]
    for d in flat_in_chart.directions:
        ambient.append(cf.to_ambient(vadd(flat_in_chart.basepoint, d)))
    return AffineFlat(ambient[0], [vsub(p, ambient[0]) for p in ambient[1:]])


def screen_hyperplane_flat(cf: ChartFrame, hc: HyperplaneCoords) -> AffineFlat:
    """The hyperplane W(a, b) of the screen U, as an ambient flat."""
    if len(hc.a) != cf.p:
        raise ValueError("normal length differs from screen dimension")
    if cf.p == 1:
        coords = [hc.b / hc.a[0]]
        return AffineFlat.point(cf.to_ambient(tuple(coords) + (Fraction(0),) * (cf.host.dim - 1)))
    m = Matrix([list(hc.a)])
    dirs_u = nullspace(m)
    i = next(i for i, x in enumerate(hc.a) if x != 0)
    base_u = [Fraction(0)] * cf.p
    base_u[i] = hc.b / hc.a[i]
    pad = (Fraction(0),) * (cf.host.dim - cf.p)
    base = cf.to_ambient(tuple(base_u) + pad)
    amb_dirs = [
        vsub(cf.to_ambient(tuple(vadd(tuple(base_u), d)) + pad), base) for d in dirs_u
    ]
    return AffineFlat(base, amb_dirs)


def _linear_intersection(rows_a: Sequence[Vector], rows_b: Sequence[Vector]) -> list[Vector]:
    """Basis of the intersection of two linear spans."""
    if not rows_a or not rows_b:
        return []
    a = [vec(r) for r in rows_a]
    b = [vec(r) for r in rows_b]
    n = len(a[0])
    m = Matrix.from_cols(a + [vscale(-1, r) for r in b], rows=n)
    out = []
    for coeffs in nullspace(m):
        v = zero_vec(n)
        for c, r in zip(coeffs[: len(a)], a):
            v = vadd(v, vscale(c, r))
        if any(x != 0 for x in v):
            out.append(v)
    return [vec(r) for r in row_space_basis(Matrix(out))] if out else []


@dataclass
class PsiContext:
    """Everything the hyperplane map needs: the host flats, the fixed atom
    span E, the joint flat J, the target section Q1, and the aligned chart."""

    flats: list[AffineFlat]  # F_1 ... F_k
    p: int
    e_flat: AffineFlat
    j_flat: AffineFlat
    q1: AffineFlat
    chart: ChartFrame
    q1_chart: FlatChart
    fixed_atoms: dict[tuple[int, int], Vector]

    @property
    def f1(self) -> AffineFlat:
        return self.flats[0]

    @property
    def fk(self) -> AffineFlat:
        return self.flats[-1]


class NonGenericConfiguration(ValueError):
    pass


def make_psi_context(
    flats: Sequence[AffineFlat],
    fixed_atoms: dict[tuple[int, int], Sequence],
    p: int,
    rng,
    max_tries: int = 200,
) -> PsiContext:
    """Build the Setup context: E from the fixed atoms, J = aff(E, F_1),
    Q1 = J meet F_k, and an exactly aligned screen U in F_1 with its center
    C spanned by the fixed F_1 atoms.

    The screen direction is drawn inside the kernel subspace
    span(dir Q1, dir E) meet dir F_1, which is what makes psi exactly affine
    rather than merely projective; the alignment certificate
    span(dir U, dir E) = span(dir Q1, dir E) is re-checked exactly.
    """
    flats = list(flats)
    k = len(flats)
    f1, fk = flats[0], flats[-1]
    n = f1.ambient_dim
    n1 = f1.dim
    if n1 < p + 1:
        raise ValueError("first flat must have dimension at least p + 1")
    fixed = {key: vec(pt) for key, pt in fixed_atoms.items()}
    f1_fixed = [pt for (j, _), pt in sorted(fixed.items()) if j == 0]
    if len(f1_fixed) != n1 - p:
        raise ValueError("need exactly dim F_1 - p fixed atoms on the first flat")
    center = AffineFlat.from_points(f1_fixed)
    if center.dim != n1 - p - 1:
        raise NonGenericConfiguration("fixed first-flat atoms are affinely dependent")
    e_flat = AffineFlat.from_points(sorted(fixed.values()))
    middle_dims = sum(flats[j].dim for j in range(1, k - 1))
    if e_flat.dim != (n1 + middle_dims) - p - 1:
        raise NonGenericConfiguration("fixed atoms span the wrong dimension")
    j_flat = join([e_flat, f1])
    if j_flat.dim != n1 + middle_dims:
        raise NonGenericConfiguration("joint flat has unexpected dimension")
    q1 = meet(j_flat, fk)
    if q1 is None or q1.dim != p:
        raise NonGenericConfiguration("target section is not a p-flat")
    # rank certificate: middle atoms with both end bases must fill the space
    cert_cols = linearize(f1).col_list() + linearize(fk).col_list()
    for (j, _), pt in sorted(fixed.items()):
        if j not in (0,):
            cert_cols.append(pt + (Fraction(1),))
    if rank(Matrix.from_cols(cert_cols, rows=n + 1)) != n + 1:
        raise NonGenericConfiguration("rank certificate failed (middle atoms, end flats)")

    kernel = _linear_intersection(
        list(q1.directions) + list(e_flat.directions), list(f1.directions)
    )
    if len(kernel) < p:
        raise NonGenericConfiguration("aligned screen kernel too small")
    kd = len(kernel)
    for _ in range(max_tries):
        coeff_rows = [
            [Fraction(rng.randint(-3, 3)) for _ in range(kd)] for _ in range(p)
        ]
        dirs = []
        for row in coeff_rows:
            v = zero_vec(n)
            for c, kv in zip(row, kernel):
                v = vadd(v, vscale(c, kv))
            dirs.append(v)
        if rank(Matrix(dirs)) != p:
            continue
        if rank(Matrix(dirs + list(center.directions))) != p + center.dim:
            continue
        base_offsets = [Fraction(rng.randint(-4, 4), 8) for _ in range(n1)]
        u0 = FlatChart(f1).to_ambient(base_offsets)
        try:
            screen = AffineFlat(u0, dirs)
            cf = ChartFrame(f1, screen, center)
        except ValueError:
            continue
        lhs = row_space_basis(Matrix(list(screen.directions) + list(e_flat.directions)))
        rhs = row_space_basis(Matrix(list(q1.directions) + list(e_flat.directions)))
        if lhs != rhs:
            continue
        ctx = PsiContext(
            flats=flats,
            p=p,
            e_flat=e_flat,
            j_flat=j_flat,
            q1=q1,
            chart=cf,
            q1_chart=FlatChart(q1),
            fixed_atoms=fixed,
        )
        try:
            psi_point_map(ctx, zero_vec(p))
            for i in range(p):
                probe = [Fraction(1 if t == i else 0) for t in range(p)]
                psi_point_map(ctx, probe)
        except (ValueError, NonGenericScreen):
            continue
        return ctx
    raise NonGenericConfiguration("failed to build an aligned screen")


def hyperplane_map_psi(ctx: PsiContext, w: HyperplaneCoords) -> AffineFlat:
    """psi(W) = aff(E, H_W) meet F_k, a (p-1)-flat inside Q1."""
    h_w = lift_hyperplane(ctx.chart, w)
    s_w = join([ctx.e_flat, h_w])
    if s_w.dim != ctx.j_flat.dim - 1:
        raise NonGenericConfiguration("joined hyperplane has wrong dimension")
    got = meet(s_w, ctx.fk)
    if got is None or got.dim != ctx.p - 1:
        raise NonGenericConfiguration("psi image is not a (p-1)-flat")
    if not ctx.q1.contains_flat(got):
        raise NonGenericConfiguration("psi image leaves the target section")
    return got


def psi_point_map(ctx: PsiContext, u_coords: Sequence) -> Vector:
    """The underlying point map: the screen point with chart coordinate u is
    joined with E and intersected with F_k."""
    coords = tuple(vec(u_coords)) + (Fraction(0),) * (ctx.f1.dim - ctx.p)
    x = ctx.chart.to_ambient(coords)
    return join_meet(ctx.e_flat, ctx.fk, x)


@dataclass
class PsiMatrix:
    m: Matrix
    y0: Vector
    lipschitz2: float  # squared Frobenius norm of M, reported only

    def image_hyperplane(self, ctx: PsiContext, w: HyperplaneCoords) -> AffineFlat:
        """{y0 + M u : a . u = b} pushed to ambient coordinates through the
        Q1 chart."""
        a, b = w.a, w.b
        i = next(i for i, x in enumerate(a) if x != 0)
        base_u = [Fraction(0)] * ctx.p
        base_u[i] = b / a[i]
        base = vadd(self.y0, self.m.mat_vec(base_u))
        dirs = [self.m.mat_vec(d) for d in nullspace(Matrix([list(a)]))]
        return ctx.q1_chart.flat_to_ambient(AffineFlat(base, dirs))


def psi_matrix(ctx: PsiContext, verify_samples: int = 10, rng=None) -> PsiMatrix:
    """Exact affine form of the point map: y(u) = y0 + M u in Q1-chart
    coordinates, with M invertible; verified by substitution on sample
    hyperplanes when an rng is supplied."""
    y0 = ctx.q1_chart.to_coords(psi_point_map(ctx, zero_vec(ctx.p)))
    cols = []
    for i in range(ctx.p):
        probe = [Fraction(1 if t == i else 0) for t in range(ctx.p)]
        cols.append(vsub(ctx.q1_chart.to_coords(psi_point_map(ctx, probe)), y0))
    m = Matrix.from_cols(cols, rows=ctx.p)
    if det(m) == 0:
        raise NonGenericConfiguration("singular parameter matrix; configuration bug")
    out = PsiMatrix(m=m, y0=y0, lipschitz2=sum(float(x) ** 2 for r in m.entries for x in r))
    if rng is not None:
        for _ in range(verify_samples):
            while True:
                a = [Fraction(rng.randint(-6, 6)) for _ in range(ctx.p)]
                if any(x != 0 for x in a):
                    break
            b = Fraction(rng.randint(-6, 6), rng.randint(1, 4))
            w = HyperplaneCoords(tuple(a), b)
            lhs = hyperplane_map_psi(ctx, w)
            rhs = out.image_hyperplane(ctx, w)
            if lhs != rhs:
                raise NonGenericConfiguration(
                    f"parameter map fails substitution at a={a} b={b}"
                )
    return out


@dataclass
class CenterProjectionOutcome:
    center: Vector
    nc: bool
    exceptional: bool
    witness: Optional[str] = None


def exceptional_center_certificate(
    coll: FlatCollection, center: Vector
) -> Optional[str]:
    """Exact certificate that a center is exceptional for NC preservation:
    a partition whose blockwise joins lose enough dimension through the
    center (the projected dimension of a join drops by one exactly when the
    center lies on it)."""
    n = coll.ambient_dim
    assert n is not None
    from .flatcollect import iter_partitions

    for part in iter_partitions(len(coll.flats)):
        total = 0
        members = []
        for block in part:
            joined = join([coll.flats[i] for i in block])
            on_it = dist2_point_flat(center, joined) == 0
            total += joined.dim - (1 if on_it else 0)
            if on_it:
                members.append(block)
        if total <= n - 2:
            return f"partition {part} drops to projected dimension sum {total} via blocks {members}"
    return None


def projected_nc_report(
    coll: FlatCollection,
    centers: Sequence[Sequence],
    screen: AffineFlat,
) -> list[CenterProjectionOutcome]:
    """Project the collection radially from each center onto the hyperplane
    screen and test NC of the image collection inside the screen chart.

    A failure is only acceptable when the center carries an exact
    exceptionality certificate; generic rational centers should give none.
    """
    chart = FlatChart(screen)
    out = []
    for c in centers:
        c = vec(c)
        try:
            images = [
                chart.flat_to_coords(flat_radial_image(c, f, screen))
                for f in coll.flats
            ]
            nc = FlatCollection(images).is_nc()
        except (NonGenericScreen, ValueError) as e:
            out.append(
                CenterProjectionOutcome(c, False, True, witness=f"degenerate: {e}")
            )
            continue
        if nc:
            out.append(CenterProjectionOutcome(c, True, False))
        else:
            cert = exceptional_center_certificate(coll, c)
            out.append(
                CenterProjectionOutcome(c, False, cert is not None, witness=cert)
            )
    return out


def rational_sqrt_lower(x: Fraction, precision_bits: int = 24) -> Fraction:
    """A rational lower bound for sqrt(x)."""
    x = frac(x)
    if x < 0:
        raise ValueError("negative input")
    if x == 0:
        return Fraction(0)
    scale = 1 << precision_bits
    val = math.isqrt(x.numerator * x.denominator * scale * scale)
    return Fraction(val, x.denominator * scale)


@dataclass
class ProjectedIrreducibilityReport:
    ok: bool
    input_modulus: Fraction
    output_modulus: Fraction
    scale: Fraction
    kept_mass: Fraction
    image_flat_dim: int
    singular_mass: Fraction = Fraction(0)
    witness: Optional[str] = None


def irreducible_projection_check(
    mu: DiscreteMeasure,
    v: AffineFlat,
    q: AffineFlat,
    u: AffineFlat,
    w,
    tau,
    eps,
) -> ProjectedIrreducibilityReport:
    """Join-meet pushforward of a (w, tau)-irreducible piece with the
    q(eps)-neighborhood trimmed away must be (c w, 2 tau)-irreducible in the
    image flat; c is the implementation's conservative rational constant
    derived from the center-screen distance.  All masses and memberships are
    exact; only the scale constant involves a rational square-root lower
    bound."""
    from .measures import irreducibility_modulus

    w = frac(w)
    tau = frac(tau)
    eps = frac(eps)
    if eps > w:
        raise ValueError("trimming radius must satisfy eps <= w")
    if tau > Fraction(1, 2):
        raise ValueError("needs tau <= 1/2")
    in_mod = irreducibility_modulus(mu, v, w, support_tolerance=max(w, mu.resolution))
    if in_mod > tau:
        raise ValueError(f"input modulus {in_mod} exceeds tau {tau}")
    e2 = eps * eps
    kept = []
    singular = Fraction(0)
    for p, wt in mu.atoms:
        if dist2_point_flat(p, q) <= e2:
            continue
        try:
            img = join_meet(q, u, p)
        except (NonGenericScreen, ValueError):
            # the ray through the center is parallel to the screen; this
            # singular set lies in a proper subflat and is trimmed like q(eps)
            singular += wt
            continue
        kept.append(((p, wt), img))
    kept_mass = sum((wt for (_, wt), _ in kept), Fraction(0))
    if kept_mass == 0:
        return ProjectedIrreducibilityReport(
            False, in_mod, Fraction(1), Fraction(0), Fraction(0), -1, singular,
            witness="trimming removed everything",
        )
    image_flat = meet(join([v, q]), u)
    if image_flat is None or image_flat.dim < 1:
        return ProjectedIrreducibilityReport(
            False, in_mod, Fraction(1), Fraction(0), kept_mass, -1, singular,
            witness="image flat degenerate",
        )
    pushed = pushforward(
        DiscreteMeasure([(img, wt) for (_, wt), img in kept], mu.resolution),
        lambda p: p,
    )
    sep = rational_sqrt_lower(dist2_flats(q, u))
    scale = sep * w / 4
    out_mod = irreducibility_modulus(
        pushed, image_flat, scale, support_tolerance=max(scale, mu.resolution)
    )
    ok = out_mod <= 2 * tau
    return ProjectedIrreducibilityReport(
        ok,
        in_mod,
        out_mod,
        scale,
        kept_mass,
        image_flat.dim,
        singular,
        witness=None if ok else f"output modulus {out_mod} > 2 tau {2 * tau}",
    )
