"""Command-line front end.

Exit codes: 0 success, 1 invalid input, 2 a numeric check or certificate failed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import extremal, solver, stability
from .dyadic import is_dyadic
from .extremal import Enclosure

EXIT_OK, EXIT_INVALID, EXIT_FAILED = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _frac(s: str) -> Fraction:
    try:
        return Fraction(s.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"not a rational number: {s!r}") from exc


def _fmt(q: Fraction) -> str:
    return f"{q.numerator}" if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _exact_json(q: Fraction) -> dict:
    return {"exact": _fmt(q), "decimal": float(q)}


def _enc_json(e: Enclosure) -> dict:
    return {"lo": _fmt(e.lo), "hi": _fmt(e.hi), "lo_decimal": float(e.lo), "hi_decimal": float(e.hi)}


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _emit_json(obj, out: str | None):
    _emit(json.dumps(obj, indent=2) + "\n", out)


def cmd_kappa(args) -> int:
    spec = args.n
    if ".." in spec:
        a, b = spec.split("..", 1)
        lo, hi = int(a), int(b)
    else:
        lo = hi = int(spec)
    if lo < 0 or hi < lo:
        raise UsageError(f"bad range {spec!r}")
    rows = [(n, extremal.kappa(n)) for n in range(lo, hi + 1)]
    if args.json:
        _emit_json([{"n": n, **_exact_json(k)} for n, k in rows], args.output)
    else:
        _emit("".join(f"{n}\t{_fmt(k)}\t{float(k):.12g}\n" for n, k in rows), args.output)
    return EXIT_OK


def cmd_eval(args) -> int:
    coords = [_frac(c) for c in args.coords]
    if any(c < 0 or c > 1 for c in coords):
        raise UsageError("coordinates must lie in [0, 1]")
    if args.which == "h":
        if len(coords) != 1:
            raise UsageError("h takes exactly one argument")
        x = coords[0]
        val = Enclosure.exact(extremal.h_dyadic(x)) if is_dyadic(x) else extremal.h_enclose(x, args.depth)
    else:
        if sum(coords) != 1:
            raise UsageError(f"simplex coordinates sum to {_fmt(sum(coords))}, not 1")
        val = extremal.e_point(coords, mode="enclose", terms=args.depth)
    exact = val.lo == val.hi
    if args.json:
        _emit_json({"function": args.which, "args": [_fmt(c) for c in coords],
                    "value": _exact_json(val.lo) if exact else None,
                    "enclosure": None if exact else _enc_json(val)}, args.output)
    elif exact:
        _emit(f"{_fmt(val.lo)}\t{float(val.lo):.12g}\n", args.output)
    else:
        _emit(f"[{_fmt(val.lo)}, {_fmt(val.hi)}]\t[{float(val.lo):.12g}, {float(val.hi):.12g}]\n", args.output)
    return EXIT_OK


def _read_phi(spec: str | None, count: int) -> tuple[Fraction, ...] | None:
    if spec is None:
        return None
    p = Path(spec)
    text = p.read_text() if p.is_file() else spec
    try:
        data = json.loads(text)
        vals = data["phi"] if isinstance(data, dict) else data
    except json.JSONDecodeError:
        vals = [v for v in text.replace(",", " ").split() if v]
    phi = tuple(_frac(str(v)) for v in vals)
    if len(phi) != count:
        raise UsageError(f"need {count} boundary values, got {len(phi)}")
    return phi


def cmd_solve(args) -> int:
    if args.polytope:
        data = json.loads(Path(args.polytope).read_text())
        verts = data["vertices"] if isinstance(data, dict) else data
        phi = _read_phi(args.phi, len(verts)) if args.phi else (
            tuple(_frac(str(v)) for v in data["phi"]) if isinstance(data, dict) and "phi" in data else None)
        spec = solver.PolytopeSpec([[_frac(str(c)) for c in v] for v in verts], phi)
        if not args.query:
            raise UsageError("--polytope needs --query")
        x = [_frac(c) for c in args.query]
        enc = solver.polytope_extremal(spec, x, depth=args.depth)
        _emit_json({"query": [_fmt(c) for c in x], "depth": args.depth, "enclosure": _enc_json(enc),
                    "note": "certified bounds for the least E(alpha) + phi.alpha over preimages"}, args.output)
        return EXIT_OK
    if args.simplex is None:
        raise UsageError("give --simplex N or --polytope FILE")
    grid = solver.DyadicGrid(args.simplex, args.depth)
    phi = _read_phi(args.phi, args.simplex + 1)
    up = solver.solve_upper(grid, phi, max_iters=args.max_iters)
    lo = solver.solve_lower(grid, phi, seed=args.seed_kind, max_iters=args.max_iters)
    a, b, den = solver._common(up, lo)
    agree = np.asarray(a == b, dtype=bool)
    rows = [",".join([f"x{k}" for k in range(grid.dim + 1)] + ["upper", "lower", "agree"])]
    for i, pt in enumerate(grid.points):
        coords = [_fmt(Fraction(int(c), grid.scale)) for c in pt]
        rows.append(",".join(coords + [_fmt(up.value(i)), _fmt(lo.value(i)), str(bool(agree[i])).lower()]))
    _emit("\n".join(rows) + "\n", args.output)
    log = {"points": len(grid), "upper_iterations": up.iterations, "upper_converged": up.converged,
           "upper_monotone": all(up.history), "lower_iterations": lo.iterations,
           "lower_converged": lo.converged, "lower_monotone": all(lo.history),
           "lower_residual": _fmt(lo.residual), "agree_everywhere": bool(agree.all()),
           "labelled": "values" if agree.all() else "bounds"}
    if args.log:
        Path(args.log).write_text(json.dumps(log, indent=2) + "\n")
    else:
        print(json.dumps(log), file=sys.stderr)
    return EXIT_OK


def _parse_sampler(spec: str):
    kind, _, arg = spec.partition(":")
    if kind == "grid":
        return "grid", float(arg) if arg else None
    if kind == "random":
        return "random", int(arg) if arg else 10_000
    if kind == "none":
        return None, None
    raise UsageError(f"unknown sampler {spec!r}")


def cmd_defect(args) -> int:
    from .geometry import PointSet, hull_defect_estimate, midpoint_defect, parse_norm
    from .geometry.hull import certify_hull_point, hull_samples_random

    A = PointSet.from_json(args.points)
    norm = parse_norm(args.norm)
    if norm.dim is not None and norm.dim != A.dim:
        raise UsageError("norm dimension does not match the points")
    delta, pair, mid = midpoint_defect(A, norm)
    out = {"n_points": len(A), "dim": A.dim, "norm": args.norm, "delta": delta,
           "worst_pair": list(pair), "worst_midpoint": mid.tolist()}
    kind, arg = _parse_sampler(args.sampler)
    if kind is not None and len(A) >= 2:
        if kind == "random" and args.seed is None:
            raise UsageError("the random sampler needs --seed")
        est, at = hull_defect_estimate(A, norm, sampler=kind, resolution=arg if kind == "grid" else None,
                                       count=arg if kind == "random" else 0, seed=args.seed)
        out.update(hull_estimate=est, hull_argmax=at.tolist(), hull_estimate_is="lower bound",
                   hull_ratio=est / delta if delta > 0 else None)
    ok = True
    if args.certify:
        if args.seed is None:
            raise UsageError("--certify needs --seed")
        zs = next(hull_samples_random(A.points, args.certify, args.seed))
        certs = [certify_hull_point(z, A, norm, delta=delta) for z in zs]
        ok = all(c.passed for c in certs)
        out["certificates"] = [c.to_json() for c in certs]
        out["all_pass"] = ok
    _emit_json(out, args.output)
    return EXIT_OK if ok else EXIT_FAILED


def _alpha_from(args) -> list[Fraction]:
    if args.alpha:
        return [_frac(a) for a in args.alpha]
    src = args.alpha_from or ""
    kind, _, arg = src.partition(":")
    if kind == "max-witness":
        return list(extremal.max_witness(args.dim - 1, int(arg or 10)).point.values)
    if kind == "near-sup":
        from .geometry import delta1_near_supremum

        if args.dim != 2:
            raise UsageError("near-sup is defined for --dim 2")
        return list(delta1_near_supremum(int(arg or 12)))
    raise UsageError("give --alpha values or --alpha-from max-witness:D | near-sup:DEPTH")


def cmd_witness(args) -> int:
    from .geometry import parse_norm, witness_set

    alpha = _alpha_from(args)
    ws = witness_set(parse_norm(args.norm), args.dim, alpha, eps=args.eps, M=args.M, depth=args.depth,
                     spacing=args.spacing)
    if args.points_out:
        np.savetxt(args.points_out, ws.points(), delimiter=",", fmt="%.17g")
    _emit_json(ws.to_json(), args.output)
    return EXIT_OK if ws.meets_target else EXIT_FAILED


def cmd_plot(args) -> int:
    res = args.resolution
    if res < 1 or res & (res - 1):
        raise UsageError("--resolution must be a power of two")
    depth = res.bit_length() - 1
    lines = []
    if args.what == "h":
        lines.append("x,H,lower,upper,upper_sharp")
        nums = np.arange(res + 1)
        hv = extremal.h_numerators(nums, depth) / float(res)
        for m, h in zip(nums.tolist(), hv.tolist()):
            x = m / res
            if m == 0:
                lo, up, sharp = 0.0, math.inf, 0.0
            else:
                ent = x * math.log2(1 / x)
                lo, up, sharp = ent, 2 * x + math.log2(1 / x), 2 * x + ent
            lines.append(f"{x!r},{h!r},{lo!r},{up!r},{sharp!r}")
    else:
        lines.append("x,y,z,E")
        pts = solver._compositions(res, 3)
        ev = extremal.e_numerators(pts, depth) / float(res)
        for p, e in zip(pts.tolist(), ev.tolist()):
            lines.append(f"{p[0] / res!r},{p[1] / res!r},{p[2] / res!r},{e!r}")
    _emit("\n".join(lines) + "\n", args.output)
    return EXIT_OK


def cmd_stability(args) -> int:
    if args.e_grid:
        dim, _, depth = args.e_grid.partition(":")
        s = stability.e_samples(int(dim), int(depth or 5), args.eps)
    elif args.samples:
        s = stability.read_samples(Path(args.samples), args.eps)
    else:
        raise UsageError("give --samples FILE or --e-grid DIM:DEPTH")
    bad = stability.midpoint_violations(s)
    rep = stability.stability_report(s)
    out = rep.to_json()
    out.update(samples=len(s), dim=s.dim, eps=args.eps, eps_violations=len(bad))
    _emit_json(out, args.output)
    return EXIT_OK if rep.passed else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="approxconvex", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("-o", "--output", help="write the result here instead of stdout")

    sp = sub.add_parser("kappa", help="kappa(n) for n or a range A..B")
    sp.add_argument("n")
    sp.add_argument("--json", action="store_true")
    common(sp)
    sp.set_defaults(handler=cmd_kappa)

    sp = sub.add_parser("eval", help="H at a point of [0, 1] or E at a simplex point")
    sp.add_argument("which", choices=["h", "e"])
    sp.add_argument("coords", nargs="+")
    sp.add_argument("--depth", type=int, default=40, help="series terms for non-dyadic input")
    sp.add_argument("--json", action="store_true")
    common(sp)
    sp.set_defaults(handler=cmd_eval)

    sp = sub.add_parser("solve", help="fixed points of S on a simplex grid, or a polytope enclosure")
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--simplex", type=int, metavar="N")
    g.add_argument("--polytope", metavar="FILE", help='JSON {"vertices": [...], "phi": [...]}')
    sp.add_argument("--phi", help="vertex values: a file or a comma/space separated list")
    sp.add_argument("--depth", type=int, default=4)
    sp.add_argument("--query", nargs="+", help="query point for --polytope")
    sp.add_argument("--seed-kind", choices=["affine", "zero"], default="affine")
    sp.add_argument("--max-iters", type=int)
    sp.add_argument("--log", help="write the convergence log here (default: stderr)")
    common(sp)
    sp.set_defaults(handler=cmd_solve)

    sp = sub.add_parser("defect", help="midpoint defect, hull-defect estimate and certificates")
    sp.add_argument("--points", required=True, help='JSON {"dim": n, "points": [[...], ...]}')
    sp.add_argument("--norm", default="euclidean", help="euclidean | l1 | linf | lp:P | poly:FILE")
    sp.add_argument("--sampler", default="none", help="none | grid[:SPACING] | random[:COUNT]")
    sp.add_argument("--certify", type=int, default=0, help="certify this many random hull points")
    sp.add_argument("--seed", type=int)
    common(sp)
    sp.set_defaults(handler=cmd_defect)

    sp = sub.add_parser("witness", help="sampled witness set and its measured distance/defect ratio")
    sp.add_argument("--dim", type=int, required=True)
    sp.add_argument("--alpha", nargs="+")
    sp.add_argument("--alpha-from", help="max-witness:D or near-sup:DEPTH")
    sp.add_argument("--M", type=float, default=64.0)
    sp.add_argument("--depth", type=int, default=8)
    sp.add_argument("--spacing", type=float, default=0.5)
    sp.add_argument("--eps", type=float, default=0.05)
    sp.add_argument("--norm", default="euclidean")
    sp.add_argument("--points-out", help="write the sample points as CSV")
    common(sp)
    sp.set_defaults(handler=cmd_witness)

    sp = sub.add_parser("plot", help="CSV samples of H or of E on the triangle")
    sp.add_argument("what", choices=["h", "e2d"])
    sp.add_argument("--resolution", type=int, default=1024)
    common(sp)
    sp.set_defaults(handler=cmd_plot)

    sp = sub.add_parser("stability", help="convex minorant gap of sampled eps-convex data")
    sp.add_argument("--samples", help="CSV rows x_1..x_n,value")
    sp.add_argument("--e-grid", help="use eps * E on the DIM-simplex grid, DIM:DEPTH")
    sp.add_argument("--eps", type=float, required=True)
    common(sp)
    sp.set_defaults(handler=cmd_stability)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (UsageError, ValueError, KeyError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"approxconvex {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
