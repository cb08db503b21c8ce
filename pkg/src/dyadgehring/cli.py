"""Command-line front end: ``dyadgehring <group> <command> [options]``.

Inputs default to ``space.txt``, ``weight.txt`` and ``lattice.txt`` inside the
output directory (``--out``, or ``$DYADGEHRING_OUT``, or ``./out``), so the
``example`` commands can be chained with the analysis commands.  Every command
prints a short summary, writes a JSON report with its run manifest and, where
there is a series to plot, a CSV file.

Exit codes: 0 success, 1 invalid data (a witness line is printed), 2 usage.
"""

from __future__ import annotations

import argparse
import math
import os
import re
import sys
from pathlib import Path

import numpy as np

from . import examples as ex
from . import io
from .family import CubeFamily, ball_family
from .gehring import (DegenerateConstantError, NoDecayError, certify, corollary41_mode,
                      doubling_weight_ball_mode, empirical_epsilon, generation_integral_check,
                      lambda_threshold)
from .growth import classify_growth
from .lattice import (appendix_parent_bound, build_adjacent_lattices, build_lattice,
                      parent_doubling_constant, verify_lattice)
from .space import (InvalidSpaceError, estimate_kappa0, estimate_kappa1, validate_space)
from .stopping import (cube_means, decay_constant, good_bad_decomposition,
                       lattice_decay_constant, stopping_tree, verify_lemma_bounds)
from .weights import (Weight, adjacent_comparison, ainfty_fujii_wilson, ap_characteristic,
                      c1_parent_condition, doubling_constants, rh_characteristic)

OUT_ENV = "DYADGEHRING_OUT"


class DataError(Exception):
    """Input data violate an invariant; reported with exit code 1."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


# argument helpers --------------------------------------------------------------


def parse_grid(text: str) -> list[float]:
    """``a:b:step`` (inclusive) or a comma separated list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError(f"grid must be a:b:step, got {text!r}")
        try:
            a, b, step = map(float, parts)
        except ValueError:
            raise argparse.ArgumentTypeError(f"grid must be numeric, got {text!r}") from None
        if step <= 0 or b < a:
            raise argparse.ArgumentTypeError("grid needs step > 0 and b >= a")
        count = int(math.floor((b - a) / step + 1e-9)) + 1
        return [round(a + i * step, 12) for i in range(count)]
    try:
        return [float(t) for t in text.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None


def parse_range(text: str) -> list[int]:
    """``a:b`` inclusive integer range."""
    m = re.fullmatch(r"(\d+):(\d+)", text)
    if not m or int(m.group(2)) < int(m.group(1)):
        raise argparse.ArgumentTypeError(f"depth range must be a:b, got {text!r}")
    return list(range(int(m.group(1)), int(m.group(2)) + 1))


class Context:
    """Resolved inputs for one command, loaded lazily."""

    def __init__(self, args):
        self.args = args
        self.out = Path(args.out)
        self.inputs = {}
        self._space = None
        self._meta = {}
        self._lattice = None
        self._weight = None
        self._std_lattice = None

    # space

    def space(self):
        if self._space is not None:
            return self._space
        spec = getattr(self.args, "space", None) or str(self.out / "space.txt")
        self.inputs["space"] = spec
        m = re.fullmatch(r"(interval|gaussian)(\d+)", spec)
        if m and not Path(spec).exists():
            n = int(m.group(2))
            if m.group(1) == "interval":
                self._space, self._std_lattice = ex.unit_interval_space(n)
                self._meta = {"builtin": "interval", "points": str(n)}
            else:
                self._space = ex.gaussian_line_space(n)
                self._meta = {"builtin": "gaussian", "points": str(n)}
        else:
            self._space, self._meta = io.read_space(spec)
        return self._space

    def haircomb_spec(self):
        self.space()
        if self._meta.get("builtin") != "haircomb":
            return None
        eps = tuple(float(e) for e in self._meta["eps"].split(","))
        return ex.HaircombSpec(int(self._meta["teeth"]), float(self._meta["alpha"]), eps,
                               float(self._meta["resolution"]))

    def has_teeth(self):
        return "tooth" in self.space().tags and self.haircomb_spec() is not None

    # weight

    def weight(self):
        if self._weight is None:
            spec = getattr(self.args, "weight", None) or str(self.out / "weight.txt")
            self.inputs["weight"] = spec
            self._weight = resolve_weight(spec, self.space(), self.haircomb_spec())
        return self._weight

    # lattice

    def lattice(self):
        if self._lattice is not None:
            return self._lattice
        space = self.space()
        spec = getattr(self.args, "lattice", None)
        default = self.out / "lattice.txt"
        if spec:
            self.inputs["lattice"] = spec
            self._lattice = io.read_lattice(spec, space.n)
        elif self._std_lattice is not None:
            self.inputs["lattice"] = "standard"
            self._lattice = self._std_lattice
        elif default.exists() and not getattr(self.args, "space", None):
            self.inputs["lattice"] = str(default)
            self._lattice = io.read_lattice(default, space.n)
        else:
            self.inputs["lattice"] = "built"
            self._lattice = build_lattice(space, self.args.delta, seed=self.args.seed)
        if self._lattice.n_points != space.n:
            raise DataError("lattice and space disagree on the number of points",
                            f"lattice {self._lattice.n_points}, space {space.n}")
        return self._lattice

    # balls

    def balls(self):
        space = self.space()
        spec = self.haircomb_spec()
        if spec is not None and "tooth" in space.tags:
            return ex.haircomb_tooth_balls(space, spec)
        centers = None
        if self.args.centers and space.n > self.args.centers:
            centers = np.unique(np.linspace(0, space.n - 1, self.args.centers).round().astype(int))
        return ball_family(space, centers=centers)

    def cubes(self):
        space = self.space()
        if self.has_teeth():
            return ex.haircomb_tooth_cubes(self.lattice(), space)
        return CubeFamily(self.lattice(), space)

    # output

    def params(self):
        skip = {"func", "out", "space", "weight", "lattice", "group", "command"}
        return {k: v for k, v in sorted(vars(self.args).items()) if k not in skip}

    def report(self, name, body):
        command = f"{self.args.group} {self.args.command}"
        man = io.manifest(command, self.inputs, self.params(), self.out)
        path = io.write_report(self.out / name, body, man)
        print(f"report: {path}")
        return path

    def csv(self, name, header, rows):
        path = io.write_csv(self.out / name, header, rows)
        print(f"series: {path}")
        return path


def resolve_weight(spec: str, space, haircomb_spec=None) -> Weight:
    """``power:<beta>``, ``const``, ``two-value``, ``haircomb`` or a weight file."""
    if spec == "const":
        return Weight(np.ones(space.n), "const")
    if spec == "two-value":
        return ex.two_value_weight(space)
    if spec == "haircomb":
        if haircomb_spec is None:
            raise DataError("the haircomb weight needs a haircomb space")
        return ex.haircomb_weight(space, haircomb_spec)
    if spec.startswith("power:"):
        try:
            beta = float(spec.split(":", 1)[1])
        except ValueError:
            raise DataError(f"bad power exponent in {spec!r}") from None
        if space.coords.shape[1] != 1:
            raise DataError("power weights need a one-dimensional space")
        return Weight(ex.power_log_weight("power", space.coords[:, 0], beta=beta), spec)
    return io.read_weight(spec, space.n)


def _fmt(x):
    return f"{x:.6g}" if isinstance(x, float) else str(x)


def _print_char(rep):
    print(f"{rep.class_id} (exponent {rep.exponent}) = {_fmt(rep.value)} over {rep.family_size} sets")
    if rep.witness:
        print(f"witness: {rep.witness}")


def _growth_csv(ctx, name, table):
    ctx.csv(name, ["depth", "value"], table.rows())
    print(f"growth: {table.label} (last/first {table.ratio:.4g})")


# space -------------------------------------------------------------------------


def cmd_space_validate(ctx):
    space = ctx.space()
    problems = validate_space(space)
    if problems:
        raise DataError(f"space violates {len(problems)} axiom(s)", "; ".join(problems))
    print(f"space ok: {space.n} points, metric {space.metric}, total mass {space.total_mass:.12g}")
    return 0


def cmd_space_kappa(ctx):
    space = ctx.space()
    _require_valid(space)
    k0 = estimate_kappa0(space, sample=ctx.args.sample, seed=ctx.args.seed)
    k1 = estimate_kappa1(space)
    print(f"kappa0 = {k0:.6g}, kappa1 = {k1:.6g}")
    ctx.report("kappa.json", {"kappa0": k0, "kappa1": k1, "points": space.n})
    return 0


def _require_valid(space):
    problems = validate_space(space)
    if problems:
        raise DataError("invalid space", problems[0])


# lattice -----------------------------------------------------------------------


def _lattice_summary(ctx, lattice, space):
    rep = verify_lattice(lattice, space)
    D, wit = parent_doubling_constant(lattice, space)
    body = {"verify": rep.as_dict(), "D": D, "D_witness": wit, "levels": [lattice.k_min, lattice.k_max],
            "cubes": len(lattice.cubes), "delta": lattice.delta, "seed": lattice.seed}
    print(f"lattice: {len(lattice.cubes)} cubes, levels {lattice.k_min}..{lattice.k_max}, "
          f"r0 = {lattice.r0:.6g}, R0 = {lattice.R0:.6g}, D = {D:.6g}")
    return rep, body


def cmd_lattice_build(ctx):
    space = ctx.space()
    _require_valid(space)
    if ctx._std_lattice is not None and not ctx.args.rebuild:
        lattice = ctx._std_lattice
    else:
        lattice = build_lattice(space, ctx.args.delta, seed=ctx.args.seed)
    ctx._lattice = lattice
    if ctx.args.space:
        io.write_space(ctx.out / "space.txt", space, ctx._meta)
    path = io.write_lattice(ctx.out / "lattice.txt", lattice)
    print(f"lattice: {path}")
    rep, body = _lattice_summary(ctx, lattice, space)
    if ctx.args.kappa:
        k0, k1 = estimate_kappa0(space, sample=2000, seed=ctx.args.seed), estimate_kappa1(space)
        body.update(kappa0=k0, kappa1=k1, appendix_bound=appendix_parent_bound(lattice, k0, k1))
    ctx.report("lattice.json", body)
    if not rep.ok:
        raise DataError("built lattice fails verification", rep.witness)
    return 0


def cmd_lattice_verify(ctx):
    space = ctx.space()
    lattice = ctx.lattice()
    rep, body = _lattice_summary(ctx, lattice, space)
    ctx.report("lattice_verify.json", body)
    if not rep.ok:
        raise DataError("lattice fails verification: " + "; ".join(rep.problems[:3]), rep.witness)
    print("lattice ok")
    return 0


def cmd_lattice_adjacent(ctx):
    space = ctx.space()
    _require_valid(space)
    seeds = list(range(ctx.args.seed, ctx.args.seed + ctx.args.count))
    lattices = build_adjacent_lattices(space, ctx.args.count, seeds=seeds, delta=ctx.args.delta)
    body = adjacent_comparison(ctx.weight(), lattices, space, ctx.args.p,
                               ball_family=ctx.balls() if ctx.args.with_balls else None)
    body["seeds"] = seeds
    for s, v in zip(seeds, body["per_lattice"]):
        print(f"seed {s}: RH_{ctx.args.p:g} = {v:.6g}")
    ctx.csv("adjacent.csv", ["seed", "value"], zip(seeds, body["per_lattice"]))
    ctx.report("adjacent.json", body)
    return 0


# weight ------------------------------------------------------------------------


def _family(ctx):
    return ctx.balls() if ctx.args.family == "balls" else ctx.cubes()


def _per_group(ctx, name, rep, power=1.0):
    groups = rep.extras.get("groups")
    if not groups:
        return None
    keys = sorted(groups)
    table = classify_growth([groups[k] for k in keys], keys, power=power)
    ctx.csv(name, ["tooth", "value"], zip(keys, [groups[k] for k in keys]))
    print(f"per-tooth growth: {table.label} (last/first {table.ratio:.4g})")
    return table


def _char_command(ctx, rep, stem, power=1.0):
    _print_char(rep)
    body = {"characteristic": rep.as_dict()}
    table = _per_group(ctx, f"{stem}_per_tooth.csv", rep, power)
    if table is not None:
        body["growth"] = table.as_dict()
    ctx.report(f"{stem}.json", body)
    return 0


def cmd_weight_rh(ctx):
    rep = rh_characteristic(ctx.weight(), _family(ctx), ctx.args.p)
    return _char_command(ctx, rep, f"rh_{ctx.args.family}", power=ctx.args.p)


def cmd_weight_ap(ctx):
    rep = ap_characteristic(ctx.weight(), _family(ctx), ctx.args.p)
    return _char_command(ctx, rep, f"ap_{ctx.args.family}")


def cmd_weight_ainf(ctx):
    balls = ctx.balls()
    w = ctx.weight()
    if balls.center_groups is None:
        rep = ainfty_fujii_wilson(w, balls, max_tests=ctx.args.tests, seed=ctx.args.seed)
    else:
        groups = {}
        reps = []
        for g in np.unique(balls.center_groups):
            sub = balls.select(np.flatnonzero(balls.center_groups == g))
            r = ainfty_fujii_wilson(w, sub, max_tests=ctx.args.tests, seed=ctx.args.seed)
            groups[int(g)] = r.value
            reps.append(r)
        rep = max(reps, key=lambda r: r.value)
        rep.extras["groups"] = groups
        rep.family_size = balls.size
    return _char_command(ctx, rep, "ainf")


def cmd_weight_doubling(ctx):
    space = ctx.space()
    db_ball, db_dyad = doubling_constants(ctx.weight(), space, ball_family=ctx.balls(),
                                          lattice=ctx.lattice(), sigma=ctx.args.sigma)
    _print_char(db_ball)
    _print_char(db_dyad)
    body = {"Db_ball": db_ball.as_dict(), "Db_dyadic": db_dyad.as_dict()}
    table = _per_group(ctx, "doubling_per_tooth.csv", db_ball)
    if table is not None:
        body["growth"] = table.as_dict()
    ctx.report("doubling.json", body)
    return 0


def cmd_weight_c1(ctx):
    rep = c1_parent_condition(ctx.weight(), ctx.lattice(), ctx.space())
    return _char_command(ctx, rep, "c1")


# stopping ----------------------------------------------------------------------


def _lambda(ctx):
    if ctx.args.lam is not None:
        return ctx.args.lam
    space, lattice = ctx.space(), ctx.lattice()
    rh = rh_characteristic(ctx.weight(), CubeFamily(lattice, space), ctx.args.p).value
    D = parent_doubling_constant(lattice, space)[0]
    return lambda_threshold(D, ctx.args.p, rh)


def cmd_stopping_tree(ctx):
    space, lattice, w = ctx.space(), ctx.lattice(), ctx.weight()
    lam = _lambda(ctx)
    cm = cube_means(lattice, space, w)
    tree = stopping_tree(lattice, None, ctx.args.cube, lam, ctx.args.max_generations, means=cm)
    decay = decay_constant(tree, lattice, space, means=cm)
    D = parent_doubling_constant(lattice, space)[0]
    lemma = verify_lemma_bounds(tree, lattice, None, D, space, means=cm)
    path = io.atomic_write(ctx.out / "tree.txt", io.format_tree(tree, decay))
    print(f"tree: {path} ({len(tree.nodes)} nodes, {tree.depth} generations, lambda {lam:.6g})")
    print(f"c_measured = {decay['c']:.6g}; lemma bounds {'ok' if lemma['ok'] else 'FAIL'}")
    ctx.csv("tree_generations.csv", ["generation", "mass"], enumerate(decay["generation_masses"]))
    ctx.report("tree.json", {"lambda": lam, "nodes": len(tree.nodes), "generations": tree.depth,
                             "truncated": tree.truncated, "decay": decay, "lemma": lemma})
    if not lemma["ok"]:
        raise DataError("lemma bounds fail", lemma["failures"][:1])
    return 0


def cmd_stopping_decay(ctx):
    space, lattice, w = ctx.space(), ctx.lattice(), ctx.weight()
    lam = _lambda(ctx)
    c, witness = lattice_decay_constant(lattice, w, lam, space)
    print(f"lambda = {lam:.6g}: c = {c:.6g} (witness cube {witness})")
    ctx.report("decay.json", {"lambda": lam, "c": c, "witness_cube": witness, "decaying": c < 1})
    return 0


def cmd_stopping_decompose(ctx):
    space, lattice, w = ctx.space(), ctx.lattice(), ctx.weight()
    lam = _lambda(ctx)
    dec = good_bad_decomposition(lattice, w, ctx.args.cube, lam, space)
    body = dec.as_dict()
    print(f"lambda = {lam:.6g}: measures {body['measures']}")
    print(f"ledger: {body['ledger']}")
    ctx.report("decompose.json", body)
    return 0


# gehring -----------------------------------------------------------------------


def _print_cert(cert):
    for key in ("p", "rh_char", "D", "lam", "c", "a", "epsilon", "A", "char_bound", "remark_ok"):
        print(f"{key:>10} = {_fmt(getattr(cert, key))}")


def cmd_gehring_certificate(ctx):
    space, lattice, w = ctx.space(), ctx.lattice(), ctx.weight()
    cert = certify(w, lattice, space, ctx.args.p, lam=ctx.args.lam)
    _print_cert(cert)
    q = ctx.args.p + cert.epsilon
    measured = rh_characteristic(w, CubeFamily(lattice, space), q).value
    check = generation_integral_check(w, lattice, space, 0, ctx.args.p, cert.a, cert.lam)
    sound = measured <= cert.char_bound
    print(f"measured RH_(p+eps) = {measured:.6g} <= bound: {sound}")
    ctx.csv("generation_integrals.csv", ["generation", "integral", "bound"],
            [(r["n"], r["integral"], r["bound"]) for r in check["rows"]])
    ctx.report("certificate.json", {"certificate": cert.as_dict(), "measured_rh_p_eps": measured,
                                    "sound": sound, "generation_check": check})
    if not sound:
        raise DataError("certificate bound violated", f"measured {measured} > {cert.char_bound}")
    return 0


def _interval_instances(ctx):
    spec = ctx.args.weight or "power:-0.5"
    out = []
    for d in ctx.args.depths:
        space, lattice = ex.unit_interval_space(2**d)
        out.append((space, lattice, resolve_weight(spec, space)))
    ctx.inputs["weight"] = spec
    return out


def cmd_gehring_sweep(ctx):
    instances = _interval_instances(ctx)
    rep = empirical_epsilon(instances, ctx.args.p, ctx.args.q_grid, index=ctx.args.depths)
    if rep["status"] != "ok":
        print(f"refused: {rep['reason']}")
    else:
        print(f"empirical q = {rep['empirical_q']:g} (epsilon {rep['empirical_epsilon']:g}); "
              f"constructive epsilon {rep.get('constructive_epsilon', math.nan):.4g}")
    rows = []
    for q, t in sorted(rep["tables"].items()):
        print(f"q = {q:g}: {t['label']}")
        rows += [(q, d, v) for d, v in zip(t["index"], t["values"])]
    ctx.csv("sweep.csv", ["q", "depth", "value"], rows)
    ctx.report("sweep.json", rep)
    return 0


def cmd_gehring_cor41(ctx):
    out = corollary41_mode(ctx.weight(), ctx.lattice(), ctx.space(), ctx.args.p)
    print(f"C1 = {out['C1']:.6g}: {out['status']}")
    if out["status"] == "certified":
        _print_cert(out["certificate"])
    else:
        print(f"reason: {out['reason']}")
    ctx.report("cor41.json", out)
    return 0


def cmd_gehring_thm52(ctx):
    out = doubling_weight_ball_mode(ctx.weight(), ctx.space(), ctx.balls(), ctx.args.p,
                                    sigma=ctx.args.sigma, q_grid=ctx.args.q_grid)
    print(f"Db_ball = {out['Db']:.6g}: {out['status']}")
    if out["status"] == "bounded":
        for r in out["rows"]:
            print(f"q = {r['q']:g}: weak x Db = {r['implied']:.6g} >= measured {r['measured']:.6g}: "
                  f"{r['dominates']}")
        ctx.csv("thm52.csv", ["q", "weak", "Db", "implied", "measured"],
                [(r["q"], r["weak"], r["Db"], r["implied"], r["measured"]) for r in out["rows"]])
    else:
        print(f"reason: {out['reason']}; witness {out.get('witness')}")
    ctx.report("thm52.json", out)
    return 0


# examples ----------------------------------------------------------------------


def cmd_example_interval(ctx):
    space, lattice = ex.unit_interval_space(2**ctx.args.depth)
    w = resolve_weight(ctx.args.weight or "power:-0.5", space)
    ctx.inputs["weight"] = w.name
    meta = {"builtin": "interval", "points": str(space.n)}
    io.write_space(ctx.out / "space.txt", space, meta)
    io.write_lattice(ctx.out / "lattice.txt", lattice)
    io.write_weight(ctx.out / "weight.txt", w)
    print(f"interval: {space.n} points, weight {w.name}, written to {ctx.out}")
    return 0


def cmd_example_gaussian(ctx):
    space = ex.gaussian_line_space(ctx.args.n, ctx.args.extent)
    w = resolve_weight(ctx.args.weight or "const", space)
    io.write_space(ctx.out / "space.txt", space, {"builtin": "gaussian", "extent": repr(ctx.args.extent)})
    io.write_weight(ctx.out / "weight.txt", w)
    print(f"gaussian line: {space.n} points, total mass {space.total_mass:.12g}")
    return 0


def _haircomb_spec(args):
    return ex.HaircombSpec(args.teeth, args.alpha, resolution=args.resolution)


def _haircomb_meta(spec):
    return {"builtin": "haircomb", "teeth": str(spec.teeth), "alpha": repr(spec.alpha),
            "resolution": repr(spec.resolution), "eps": ",".join(repr(e) for e in spec.eps_seq)}


def cmd_example_haircomb(ctx):
    spec = _haircomb_spec(ctx.args)
    space = ex.haircomb_space(spec)
    w = ex.haircomb_weight(space, spec)
    io.write_space(ctx.out / "space.txt", space, _haircomb_meta(spec))
    io.write_weight(ctx.out / "weight.txt", w)
    stale = ctx.out / "lattice.txt"
    if stale.exists():
        stale.unlink()
    print(f"haircomb: {spec.teeth} teeth, {space.n} points, written to {ctx.out}")
    return 0


def cmd_example_haircomb_report(ctx):
    spec = _haircomb_spec(ctx.args)
    space = ex.haircomb_space(spec)
    w = ex.haircomb_weight(space, spec)
    rows, summary = ex.haircomb_nondoubling_report(space, w, spec)
    ctx.csv("haircomb_balls.csv", list(rows[0].keys()), [list(r.values()) for r in rows])
    print(f"C_fit = {summary['C_fit']:.4g}, spread {summary['C_spread']:.3g}, "
          f"min w(2B) = {summary['min_w_2B']:.4g}, ratio growth x{summary['ratio_growth']:.4g}")
    balls = ex.haircomb_tooth_balls(space, spec)
    lattice = build_lattice(space, ctx.args.delta, seed=ctx.args.seed) if ctx.args.dyadic else None
    bound = ex.haircomb_rh_boundary(space, w, spec, ctx.args.q_grid or [ctx.args.p], balls, lattice)
    tables = {}
    for q, entry in bound.items():
        tables[q] = {k: t.as_dict() for k, t in entry.items()}
        for k, t in entry.items():
            print(f"RH_{q:g} {k}: {t.label}")
            ctx.csv(f"haircomb_rh_{k}_{q:g}.csv", ["tooth", "value"], t.rows())
    ctx.report("haircomb.json", {"nondoubling": summary, "rows": rows, "rh": tables})
    return 0


# parser ------------------------------------------------------------------------


def _common(p, *, space=True, weight=False, lattice=False):
    if space:
        p.add_argument("--space", help="space file or builtin interval<N> / gaussian<N>")
    if weight:
        p.add_argument("--weight", help="weight file or power:<beta>, const, two-value, haircomb")
    if lattice:
        p.add_argument("--lattice", help="lattice file (default: out/lattice.txt or a fresh build)")
        p.add_argument("--delta", type=float, default=0.5)
        p.add_argument("--seed", type=int, default=0)
    p.add_argument("--centers", type=int, default=0, help="subsample ball centers (0: all)")


def build_parser():
    parser = argparse.ArgumentParser(prog="dyadgehring", description=__doc__.splitlines()[0])
    parser.add_argument("--out", default=os.environ.get(OUT_ENV, "out"),
                        help=f"output directory (default ${OUT_ENV} or ./out)")
    groups = parser.add_subparsers(dest="group", required=True)

    def command(group_parser, name, func, **kw):
        p = group_parser.add_parser(name, **kw)
        p.set_defaults(func=func)
        return p

    g = groups.add_parser("space").add_subparsers(dest="command", required=True)
    _common(command(g, "validate", cmd_space_validate))
    p = command(g, "kappa", cmd_space_kappa)
    _common(p)
    p.add_argument("--sample", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)

    g = groups.add_parser("lattice").add_subparsers(dest="command", required=True)
    p = command(g, "build", cmd_lattice_build)
    _common(p, lattice=True)
    p.add_argument("--rebuild", action="store_true", help="net construction even for builtin intervals")
    p.add_argument("--kappa", action="store_true", help="also compare D with the appendix bound")
    _common(command(g, "verify", cmd_lattice_verify), lattice=True)
    p = command(g, "adjacent", cmd_lattice_adjacent)
    _common(p, weight=True, lattice=True)
    p.add_argument("--count", type=int, default=3)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--with-balls", action="store_true")

    g = groups.add_parser("weight").add_subparsers(dest="command", required=True)
    for name, func in (("rh", cmd_weight_rh), ("ap", cmd_weight_ap)):
        p = command(g, name, func)
        _common(p, weight=True, lattice=True)
        p.add_argument("--p", type=float, required=True)
        p.add_argument("--family", choices=("balls", "cubes"), default="cubes")
    p = command(g, "ainf", cmd_weight_ainf)
    _common(p, weight=True)
    p.add_argument("--tests", type=int, default=60, help="test balls per group")
    p.add_argument("--seed", type=int, default=0)
    p = command(g, "doubling", cmd_weight_doubling)
    _common(p, weight=True, lattice=True)
    p.add_argument("--sigma", type=float, default=2.0)
    _common(command(g, "c1", cmd_weight_c1), weight=True, lattice=True)

    g = groups.add_parser("stopping").add_subparsers(dest="command", required=True)
    for name, func in (("tree", cmd_stopping_tree), ("decay", cmd_stopping_decay),
                       ("decompose", cmd_stopping_decompose)):
        p = command(g, name, func)
        _common(p, weight=True, lattice=True)
        p.add_argument("--lambda", dest="lam", type=float, help="stopping threshold (default: certificate threshold)")
        p.add_argument("--p", type=float, default=2.0, help="exponent for the default threshold")
        p.add_argument("--cube", type=int, default=0)
        p.add_argument("--max-generations", type=int, default=32)

    g = groups.add_parser("gehring").add_subparsers(dest="command", required=True)
    p = command(g, "certificate", cmd_gehring_certificate)
    _common(p, weight=True, lattice=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--lambda", dest="lam", type=float)
    p = command(g, "sweep", cmd_gehring_sweep)
    p.add_argument("--weight", help="weight on the unit interval (default power:-0.5)")
    p.add_argument("--p", type=float, default=1.5)
    p.add_argument("--q-grid", type=parse_grid, default=parse_grid("1.6:2.4:0.1"))
    p.add_argument("--depths", type=parse_range, default=parse_range("8:14"))
    p = command(g, "cor41", cmd_gehring_cor41)
    _common(p, weight=True, lattice=True)
    p.add_argument("--p", type=float, required=True)
    p = command(g, "thm52", cmd_gehring_thm52)
    _common(p, weight=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--sigma", type=float, default=2.0)
    p.add_argument("--q-grid", type=parse_grid)

    g = groups.add_parser("example").add_subparsers(dest="command", required=True)
    p = command(g, "interval", cmd_example_interval)
    p.add_argument("--depth", type=int, default=10)
    p.add_argument("--weight", help="power:<beta>, const or two-value (default power:-0.5)")
    p = command(g, "gaussian", cmd_example_gaussian)
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--extent", type=float, default=3.0)
    p.add_argument("--weight", help="power:<beta> or const (default const)")
    for name, func in (("haircomb", cmd_example_haircomb), ("haircomb-report", cmd_example_haircomb_report)):
        p = command(g, name, func)
        p.add_argument("--teeth", type=int, default=8)
        p.add_argument("--alpha", type=float, default=0.5)
        p.add_argument("--resolution", type=float, default=1e-3)
        if name == "haircomb-report":
            p.add_argument("--p", type=float, default=2.2)
            p.add_argument("--q-grid", type=parse_grid)
            p.add_argument("--dyadic", action="store_true", help="also tabulate over a built lattice")
            p.add_argument("--delta", type=float, default=0.5)
            p.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    ctx = Context(args)
    try:
        return args.func(ctx)
    except (DataError, InvalidSpaceError, io.FormatError, NoDecayError, DegenerateConstantError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        witness = getattr(exc, "witness", None)
        print(f"witness: {witness if witness is not None else 'none'}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
