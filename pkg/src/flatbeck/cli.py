"""Command-line front end: scene ingestion, command dispatch, report and CSV
emission.

Scenes are JSON files with rationals written as strings ("1/3" stays 1/3);
every named object is resolved up front with field-level error context.  All
randomness flows from a single seed recorded in the report header, and
reports carry no timestamps, so identical scene + seed reproduce identical
bytes.

Exit codes: 0 all checks pass, 1 a verification failed (witness in the
report), 2 input error, 3 unknown command, 4 budget exceeded.

Usage:
    flatbeck <command> --scene <path> [--seed N] [--scales A..B] [--out DIR]
             [--budget N] [command-specific flags]

Commands: analyze-flats, decompose, stability, beck, thin-verify,
thin-prune, project, pushforward-dim.
"""

from __future__ import annotations

import argparse
import csv
import json
import random
import sys
from fractions import Fraction
from pathlib import Path
from typing import Optional

from . import __version__
from .beck import EnumerationBudgetExceeded, PointConfig, dichotomy_report, enumerate_spanned_flats
from .decompose import NotDiscretelyNC, decompose, verify_decomposition
from .exactlin import frac
from .flats import AffineFlat
from .flatcollect import FlatCollection, PartitionSpaceTooLarge, is_minimal
from .genscenes import random_flat
from .measures import DiscreteMeasure, dyadic_scales
from .project import irreducible_projection_check, projected_nc_report
from .stability import (
    CertificationBudgetExceeded,
    StableFrame,
    certify_stability,
    minimal_rank_report,
    stabilize,
)
from .thin import (
    ThinGraph,
    prune_against_measure,
    prune_planes,
    pushforward_frostman,
    thin_implies_nc,
    tubes_to_planes,
    verify_thin_planes,
    verify_thin_tubes,
)

COMMANDS = (
    "analyze-flats",
    "decompose",
    "stability",
    "beck",
    "thin-verify",
    "thin-prune",
    "project",
    "pushforward-dim",
)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_INPUT = 2
EXIT_UNKNOWN = 3
EXIT_BUDGET = 4


class SceneError(ValueError):
    pass


def _rat(value, where: str) -> Fraction:
    try:
        if isinstance(value, bool):
            raise TypeError
        if isinstance(value, int):
            return Fraction(value)
        if isinstance(value, str):
            return Fraction(value)
    except (ValueError, ZeroDivisionError, TypeError):
        pass
    raise SceneError(f"{where}: malformed rational {value!r}")


def _vec(value, n: Optional[int], where: str):
    if not isinstance(value, list):
        raise SceneError(f"{where}: expected a coordinate list")
    out = tuple(_rat(x, f"{where}[{i}]") for i, x in enumerate(value))
    if n is not None and len(out) != n:
        raise SceneError(f"{where}: expected {n} coordinates, got {len(out)}")
    return out


class Scene:
    """Parsed scene: named points, flats, measures, graphs, frames, params."""

    def __init__(self, raw: dict, path: str = "<scene>"):
        if not isinstance(raw, dict):
            raise SceneError(f"{path}: top level must be an object")
        try:
            self.ambient_dim = int(raw["ambient_dim"])
        except (KeyError, TypeError, ValueError):
            raise SceneError(f"{path}: missing or malformed ambient_dim")
        n = self.ambient_dim
        self.points: dict[str, tuple] = {}
        for name, val in (raw.get("points") or {}).items():
            self.points[name] = _vec(val, n, f"points.{name}")
        self.flats: dict[str, AffineFlat] = {}
        for name, val in (raw.get("flats") or {}).items():
            where = f"flats.{name}"
            if not isinstance(val, dict) or "basepoint" not in val:
                raise SceneError(f"{where}: needs basepoint and directions")
            base = _vec(val["basepoint"], n, f"{where}.basepoint")
            dirs = [
                _vec(d, n, f"{where}.directions[{i}]")
                for i, d in enumerate(val.get("directions", []))
            ]
            try:
                self.flats[name] = AffineFlat(base, dirs)
            except ValueError as e:
                raise SceneError(f"{where}: {e}")
        self.measures: dict[str, DiscreteMeasure] = {}
        for name, val in (raw.get("measures") or {}).items():
            where = f"measures.{name}"
            if not isinstance(val, dict):
                raise SceneError(f"{where}: expected an object")
            res = _rat(val.get("resolution", "1/1024"), f"{where}.resolution")
            try:
                if "uniform_on" in val:
                    pts = [
                        _vec(p, n, f"{where}.uniform_on[{i}]")
                        for i, p in enumerate(val["uniform_on"])
                    ]
                    self.measures[name] = DiscreteMeasure.uniform(pts, res)
                else:
                    atoms = []
                    for i, entry in enumerate(val.get("atoms", [])):
                        if not (isinstance(entry, list) and len(entry) == 2):
                            raise SceneError(
                                f"{where}.atoms[{i}]: expected [point, weight]"
                            )
                        atoms.append(
                            (
                                _vec(entry[0], n, f"{where}.atoms[{i}]"),
                                _rat(entry[1], f"{where}.atoms[{i}].weight"),
                            )
                        )
                    self.measures[name] = DiscreteMeasure(atoms, res)
            except ValueError as e:
                raise SceneError(f"{where}: {e}")
        self.graphs: dict[str, ThinGraph] = {}
        self.graph_density_claims: dict[str, Optional[float]] = {}
        for name, val in (raw.get("graphs") or {}).items():
            where = f"graphs.{name}"
            if not isinstance(val, dict) or "measures" not in val:
                raise SceneError(f"{where}: needs a measures list")
            ms = []
            for mname in val["measures"]:
                if mname not in self.measures:
                    raise SceneError(f"{where}: dangling measure reference {mname!r}")
                ms.append(self.measures[mname])
            tuples = val.get("tuples", "complete")
            sigma = float(val.get("sigma", 1.0))
            big_k = float(val.get("K", 1.0))
            try:
                if tuples == "complete":
                    self.graphs[name] = ThinGraph.complete(ms, sigma, big_k)
                else:
                    self.graphs[name] = ThinGraph(ms, [tuple(t) for t in tuples], sigma, big_k)
            except ValueError as e:
                raise SceneError(f"{where}: {e}")
            self.graph_density_claims[name] = (
                float(val["c"]) if "c" in val else None
            )
        self.frames: dict[str, StableFrame] = {}
        for name, val in (raw.get("frames") or {}).items():
            where = f"frames.{name}"
            if not isinstance(val, dict) or "flats" not in val or "measures" not in val:
                raise SceneError(f"{where}: needs flats and measures lists")
            fl = []
            for fname in val["flats"]:
                if fname not in self.flats:
                    raise SceneError(f"{where}: dangling flat reference {fname!r}")
                fl.append(self.flats[fname])
            grid = []
            for row in val["measures"]:
                r = []
                for mname in row:
                    if mname not in self.measures:
                        raise SceneError(f"{where}: dangling measure reference {mname!r}")
                    r.append(self.measures[mname])
                grid.append(r)
            try:
                self.frames[name] = StableFrame(fl, grid)
            except ValueError as e:
                raise SceneError(f"{where}: {e}")
        self.params: dict = raw.get("params") or {}

    def param_rat(self, key: str, default=None) -> Optional[Fraction]:
        if key not in self.params:
            return None if default is None else frac(default)
        return _rat(self.params[key], f"params.{key}")

    def param_float(self, key: str, default=None) -> Optional[float]:
        if key not in self.params:
            return default
        return float(self.params[key])


def parse_scene(path: str) -> Scene:
    p = Path(path)
    if not p.exists():
        raise SceneError(f"scene file not found: {path}")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise SceneError(f"{path}: invalid JSON ({e})")
    return Scene(raw, path)


def _fr(x) -> str:
    return str(x)


def _jsonable(obj):
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (list, tuple)):
        return [_jsonable(x) for x in obj]
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (int, float, str, bool)) or obj is None:
        return obj
    return str(obj)


class Reporter:
    def __init__(self, out_dir: str, command: str, scene_path: str, seed: int):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.body = {
            "tool": f"flatbeck {__version__}",
            "command": command,
            "scene": scene_path,
            "seed": seed,
            "verdicts": [],
        }

    def verdict(self, name: str, passed: bool, **info):
        entry = {"check": name, "passed": bool(passed)}
        entry.update({k: _jsonable(v) for k, v in info.items()})
        self.body["verdicts"].append(entry)
        status = "pass" if passed else "FAIL"
        print(f"[{status}] {name}" + (f" :: {info.get('witness')}" if not passed and info.get("witness") else ""))

    def info(self, key: str, value):
        self.body[key] = _jsonable(value)

    def csv_table(self, name: str, rows, header):
        path = self.dir / f"{name}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([_jsonable(x) for x in row])
        return str(path)

    def finish(self) -> int:
        path = self.dir / "report.json"
        path.write_text(json.dumps(self.body, indent=2, sort_keys=True) + "\n")
        ok = all(v["passed"] for v in self.body["verdicts"])
        print(f"report: {path}")
        return EXIT_PASS if ok else EXIT_FAIL


def _scale_window(arg: Optional[str], scene: Scene) -> list[Fraction]:
    spec = arg or scene.params.get("scales") or "1..6"
    if isinstance(spec, list) and len(spec) == 2:
        coarse, fine = int(spec[0]), int(spec[1])
    else:
        try:
            coarse_s, fine_s = str(spec).split("..")
            coarse, fine = int(coarse_s), int(fine_s)
        except ValueError:
            raise SceneError(f"bad scale window {spec!r}; expected like 1..6")
    return dyadic_scales(fine, coarse)


def cmd_analyze_flats(scene: Scene, args, rep: Reporter) -> None:
    names = args.flats.split(",") if args.flats else sorted(scene.flats)
    missing = [x for x in names if x not in scene.flats]
    if missing:
        raise SceneError(f"dangling flat reference(s): {missing}")
    flats = [scene.flats[x] for x in names]
    coll = FlatCollection(flats)
    cost = coll.cost()
    count, parts = coll.minimizing_census()
    rep.info("flats", {x: {"dim": scene.flats[x].dim} for x in names})
    rep.info("cost", cost)
    rep.info("minimizing_partition_count", count)
    rep.info("minimizing_partitions", parts[:50])
    rep.verdict("nc", coll.is_nc(), cost=cost, ambient=scene.ambient_dim)
    rep.verdict("minimal", is_minimal(flats), note="minimality in the ambient space")


def cmd_decompose(scene: Scene, args, rep: Reporter) -> None:
    name = args.measure or (sorted(scene.measures)[0] if scene.measures else None)
    if name is None or name not in scene.measures:
        raise SceneError(f"measure {name!r} not in scene")
    mu = scene.measures[name]
    w = scene.param_rat("w", "0")
    theta = scene.param_rat("theta", "1/2")
    tau = scene.param_rat("tau", "1/2")
    n = scene.ambient_dim
    try:
        result = decompose(mu, n, w, theta)
    except NotDiscretelyNC as e:
        rep.verdict("discretely-nc", False, witness=str(e))
        return
    rep.info(
        "trace",
        [
            {"step": t.step, "cost": t.cost, "n_count": t.n_count, "partition": t.chosen_partition}
            for t in result.trace
        ],
    )
    rep.info("final_cost", result.final_cost)
    rep.info("flat_dims", [f.dim for f in result.flats])
    report = verify_decomposition(result, n, w, tau)
    for clause in report.clauses:
        rep.verdict(f"decomposition-{clause.name}", clause.passed, witness=clause.witness)


def cmd_stability(scene: Scene, args, rep: Reporter) -> None:
    name = args.frame or (sorted(scene.frames)[0] if scene.frames else None)
    if name is None or name not in scene.frames:
        raise SceneError(f"frame {name!r} not in scene")
    frame = scene.frames[name]
    c2 = scene.param_rat("c2", "0")
    if args.stabilize:
        frame, c2 = stabilize(frame, budget=args.budget)
        rep.info("stabilized_c2", c2)
    cert = certify_stability(frame, c2, budget=args.budget)
    rep.info("certified_floor", cert.floor)
    rep.info("certified_raw_floor", cert.raw_floor)
    rep.verdict("certified", cert.ok, witness=cert.witness, floor=cert.floor)
    if sum(frame.dims()) == frame.ambient_dim:
        table, violations = minimal_rank_report(frame)
        rep.info(
            "rank_table",
            {f"I={list(i)} J={list(j)}": r for (i, j), r in sorted(table.items())},
        )
        rep.verdict(
            "minimal-rank-rules",
            not violations,
            witness="; ".join(
                f"{v.rule} at I={v.i_set} J={v.j_set}: {v.got} vs {v.bound}"
                for v in violations
            )
            or None,
        )


def cmd_beck(scene: Scene, args, rep: Reporter) -> None:
    names = args.points.split(",") if args.points else sorted(scene.points)
    missing = [x for x in names if x not in scene.points]
    if missing:
        raise SceneError(f"dangling point reference(s): {missing}")
    pts = [scene.points[x] for x in names]
    config = PointConfig(pts)
    n = scene.ambient_dim
    count = len(enumerate_spanned_flats(config, n - 1))
    rep.info("hyperplane_count", count)
    rep.info("point_count", len(pts))
    rep.info("ratio_to_n_power", count / float(len(pts)) ** n)
    eps = scene.param_float("epsilon", 0.1)
    report = dichotomy_report(config, eps, budget=args.budget)
    if not report.complete:
        raise EnumerationBudgetExceeded(report.note)
    rep.info("concentrated", report.concentrated)
    if report.concentrated:
        rep.info("family_dims", [f.dim for f in report.family])
        rep.info("covered", report.covered)
    rep.verdict("beck-analysis", True)


def cmd_thin_verify(scene: Scene, args, rep: Reporter) -> None:
    name = args.graph or (sorted(scene.graphs)[0] if scene.graphs else None)
    if name is None or name not in scene.graphs:
        raise SceneError(f"graph {name!r} not in scene")
    g = scene.graphs[name]
    scales = _scale_window(args.scales, scene)
    claimed = scene.graph_density_claims.get(name)
    if args.tubes:
        if g.arity != 2:
            raise SceneError("tube verification needs an arity-2 graph")
        out = verify_thin_tubes(g.measures[0], g.measures[1], g, scales, required_density=claimed)
    else:
        out = verify_thin_planes(g, scales, required_density=claimed)
    rows = [
        (s, m, g.big_k * float(s) ** g.sigma, float(m) / (g.big_k * float(s) ** g.sigma))
        for s, m in out.table
    ]
    rep.info("csv", rep.csv_table(f"{name}-scales", rows, ["scale", "max_mass", "bound", "ratio"]))
    rep.info("density", out.density)
    rep.info("max_ratio", out.max_ratio)
    rep.verdict(
        "thin-" + ("tubes" if args.tubes else "planes"),
        out.ok,
        witness=out.failure,
        worst=None
        if out.worst is None
        else {
            "tuple": out.worst.tuple_,
            "measure": out.worst.measure_index,
            "scale": out.worst.scale,
            "mass": out.worst.mass,
        },
    )
    if not args.tubes and g.arity == g.ambient_dim:
        ok, coll, _ = thin_implies_nc(g, scales)
        rep.verdict("support-flats-nc", coll.is_nc())


def cmd_thin_prune(scene: Scene, args, rep: Reporter) -> None:
    name = args.graph or (sorted(scene.graphs)[0] if scene.graphs else None)
    if name is None or name not in scene.graphs:
        raise SceneError(f"graph {name!r} not in scene")
    g = scene.graphs[name]
    scales = _scale_window(args.scales, scene)
    eps = scene.param_float("epsilon", 0.25)
    if args.mode == "planes":
        out = prune_planes(g, eps, scales)
        rep.info("removed_mass", out.removed_mass)
        rep.info("c1", out.constant)
        rep.verdict("prune-budget", out.ok, witness=out.witness)
        check = verify_thin_planes(out.graph, scales)
        rep.verdict("pruned-graph-verifies", check.ok, witness=check.failure)
    elif args.mode == "tubes2planes":
        if g.arity != 2:
            raise SceneError("conversion needs an arity-2 graph")
        out = tubes_to_planes(g.measures[0], g.measures[1], g, eps, scales)
        rep.info("a_const", out.a_const)
        rep.info("b_const", out.b_const)
        rep.info("removed_mass", out.removed_mass)
        rep.verdict("tubes-to-planes", out.ok, witness=out.witness)
    elif args.mode == "against-measure":
        if not args.nu or args.nu not in scene.measures:
            raise SceneError("--nu must name a scene measure")
        out = prune_against_measure(g, scene.measures[args.nu], eps, scales)
        rep.info("removed_mass", out.removed_mass)
        rep.info("k_prime", out.k_prime)
        rep.info("delta0", out.delta0)
        rep.verdict("prune-budget", out.ok, witness=out.witness)
    else:
        raise SceneError(f"unknown prune mode {args.mode!r}")


def cmd_project(scene: Scene, args, rep: Reporter) -> None:
    rng = random.Random(args.seed)
    if args.check == "nc":
        names = args.flats.split(",") if args.flats else sorted(scene.flats)
        flats = [scene.flats[x] for x in names if x in scene.flats]
        if len(flats) != len(names):
            raise SceneError("dangling flat reference in --flats")
        coll = FlatCollection(flats)
        n = scene.ambient_dim
        screen = None
        for _ in range(100):
            cand = random_flat(rng, n, n - 1)
            if all(cand.canon != f.canon for f in flats):
                screen = cand
                break
        if screen is None:
            raise SceneError("failed to draw a screen")
        centers = []
        while len(centers) < args.centers:
            c = tuple(Fraction(rng.randint(-64, 64), 32) for _ in range(n))
            if all(not f.contains_point(c) for f in flats) and not screen.contains_point(c):
                centers.append(c)
        outcomes = projected_nc_report(coll, centers, screen)
        bad = [o for o in outcomes if not o.nc and not o.exceptional]
        rep.info("centers_tested", len(outcomes))
        rep.info("nc_preserved", sum(1 for o in outcomes if o.nc))
        rep.verdict(
            "projection-preserves-nc",
            not bad,
            witness="; ".join(str(o.center) for o in bad) or None,
        )
    elif args.check == "irreducible":
        needed = {"measure": args.measure, "flat": args.flat, "center": args.center, "screen": args.screen}
        for k, v in needed.items():
            if not v:
                raise SceneError(f"--{k} is required for --check irreducible")
        if args.measure not in scene.measures:
            raise SceneError(f"dangling measure reference {args.measure!r}")
        for fname in (args.flat, args.center, args.screen):
            if fname not in scene.flats:
                raise SceneError(f"dangling flat reference {fname!r}")
        w = scene.param_rat("w", "1/16")
        tau = scene.param_rat("tau", "1/2")
        eps = scene.param_rat("eps", None) or w
        out = irreducible_projection_check(
            scene.measures[args.measure],
            scene.flats[args.flat],
            scene.flats[args.center],
            scene.flats[args.screen],
            w,
            tau,
            eps,
        )
        rep.info("input_modulus", out.input_modulus)
        rep.info("output_modulus", out.output_modulus)
        rep.info("scale", out.scale)
        rep.info("kept_mass", out.kept_mass)
        rep.verdict("projected-irreducibility", out.ok, witness=out.witness)
    else:
        raise SceneError(f"unknown project check {args.check!r}")


def cmd_pushforward_dim(scene: Scene, args, rep: Reporter) -> None:
    name = args.graph or (sorted(scene.graphs)[0] if scene.graphs else None)
    if name is None or name not in scene.graphs:
        raise SceneError(f"graph {name!r} not in scene")
    g = scene.graphs[name]
    scales = _scale_window(args.scales, scene)
    fit = pushforward_frostman(g, scales)
    rows = [(s, c, m) for s, c, m in fit.table]
    rep.info("csv", rep.csv_table(f"{name}-pushforward", rows, ["scale", "boxes", "max_box_mass"]))
    rep.info("fitted_exponent", fit.exponent)
    rep.info("expected_exponent", g.arity * g.sigma)
    rep.verdict("pushforward-dim-computed", True, fitted=fit.exponent)


HANDLERS = {
    "analyze-flats": cmd_analyze_flats,
    "decompose": cmd_decompose,
    "stability": cmd_stability,
    "beck": cmd_beck,
    "thin-verify": cmd_thin_verify,
    "thin-prune": cmd_thin_prune,
    "project": cmd_project,
    "pushforward-dim": cmd_pushforward_dim,
}


def build_parser(command: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog=f"flatbeck {command}")
    p.add_argument("--scene", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--scales", default=None, help="dyadic window like 1..6")
    p.add_argument("--out", default="flatbeck-out")
    p.add_argument("--budget", type=int, default=200_000)
    p.add_argument("--flats", default=None, help="comma-separated flat names")
    p.add_argument("--measure", default=None)
    p.add_argument("--frame", default=None)
    p.add_argument("--graph", default=None)
    p.add_argument("--points", default=None, help="comma-separated point names")
    p.add_argument("--tubes", action="store_true", help="verify tubes instead of planes")
    p.add_argument("--mode", default="planes", help="prune mode: planes|tubes2planes|against-measure")
    p.add_argument("--nu", default=None, help="auxiliary measure for against-measure pruning")
    p.add_argument("--stabilize", action="store_true")
    p.add_argument("--check", default="nc", help="project check: nc|irreducible")
    p.add_argument("--flat", default=None)
    p.add_argument("--center", default=None)
    p.add_argument("--screen", default=None)
    p.add_argument("--centers", type=int, default=20)
    return p


def main(argv: Optional[list[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help"):
        print(__doc__)
        return EXIT_PASS
    command = argv[0]
    if command not in COMMANDS:
        print(f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}", file=sys.stderr)
        return EXIT_UNKNOWN
    parser = build_parser(command)
    try:
        args = parser.parse_args(argv[1:])
    except SystemExit:
        return EXIT_INPUT
    try:
        scene = parse_scene(args.scene)
    except SceneError as e:
        print(f"input error: {e}", file=sys.stderr)
        return EXIT_INPUT
    seed = args.seed if args.seed is not None else int(scene.params.get("seed", 0))
    args.seed = seed
    rep = Reporter(args.out, command, args.scene, seed)
    try:
        HANDLERS[command](scene, args, rep)
    except SceneError as e:
        print(f"input error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (
        EnumerationBudgetExceeded,
        CertificationBudgetExceeded,
        PartitionSpaceTooLarge,
    ) as e:
        print(f"budget exceeded: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except ValueError as e:
        print(f"input error: {e}", file=sys.stderr)
        return EXIT_INPUT
    return rep.finish()


if __name__ == "__main__":
    sys.exit(main())
