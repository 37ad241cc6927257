"""``finslerkit`` command line interface.

Exit codes:
    0  success
    2  invalid norm spec or arguments
    3  averaged form failed the positive-definiteness check
    4  a flow left its chart (or became non-finite)
    5  an invariant suite or norm validation failed
"""

import argparse
import csv
import json
import sys

import numpy as np

from . import conformal as cf
from . import liouville as lv
from . import sphere as sp
from .diffquad import HessianStrategy, build_sphere_quadrature
from .errors import FinslerError, FlowEscapeError, InvalidNormError, NotPositiveDefiniteError
from .metric import DEFAULT_RESOLUTION, averaged_form, averaged_metric_field
from .norms import (Euclidean, EvenPNorm, FinslerField, Randers, norm_from_spec, norm_to_spec,
                    validate_norm)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NOT_PD = 3
EXIT_ESCAPE = 4
EXIT_SUITE = 5


class UsageError(Exception):
    pass


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dump_report(report, out):
    text = json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n"
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _floats(text, name):
    try:
        return [float(t) for t in text.split(",")]
    except ValueError:
        raise UsageError(f"--{name} expects comma-separated numbers, got {text!r}") from None


def parse_norm(args, dim=None):
    """Resolve ``--norm`` (preset name, inline JSON, or ``@file``) into a Norm."""
    text = args.norm
    dim = dim if dim is not None else args.dim
    if text.startswith("@"):
        try:
            with open(text[1:]) as fh:
                text = fh.read()
        except OSError as exc:
            raise InvalidNormError(f"cannot read norm spec: {exc}") from None
    if text.lstrip().startswith("{"):
        try:
            spec = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidNormError(f"malformed norm spec JSON: {exc}") from None
        norm = norm_from_spec(spec)
        if dim is not None and args.dim_given and norm.dim != dim:
            raise InvalidNormError(f"norm spec has dimension {norm.dim}, --dim says {dim}")
        return norm
    if text in ("euclid-identity", "euclidean"):
        return Euclidean(np.eye(dim))
    if text in ("even-p", "quartic"):
        p = 4 if text == "quartic" else args.p
        return EvenPNorm(p, dim)
    if text == "randers":
        beta = _floats(args.beta, "beta") if args.beta else [0.5] + [0.0] * (dim - 1)
        if len(beta) != dim:
            raise InvalidNormError(f"--beta has {len(beta)} entries, expected {dim}")
        return Randers(np.eye(dim), beta)
    raise InvalidNormError(f"unknown norm preset {text!r}")


def _strategy(args):
    return HessianStrategy(args.hessian, args.fd_step)


FACTORS = {
    "none": None,
    "exp-x1": lambda x: float(np.exp(x[0])),
}


def _factor(name):
    if name not in FACTORS:
        raise UsageError(f"unknown conformal factor {name!r}; choose from {sorted(FACTORS)}")
    return FACTORS[name]


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_avg_metric(args):
    norm = parse_norm(args)
    quad = build_sphere_quadrature(norm.dim, args.resolution)
    strategy = _strategy(args)
    report = {"command": "avg-metric", "norm": norm_to_spec(norm),
              "resolution": args.resolution}
    try:
        form = averaged_form(norm, quad, strategy)
    except NotPositiveDefiniteError as exc:
        report.update({"error": str(exc), "min_eig": exc.min_eig, "witness": exc.witness})
        dump_report(report, args.out)
        return EXIT_NOT_PD
    report.update({
        "g": form.matrix, "min_eig": form.min_eig, "definiteness": form.definiteness,
        "V": form.volume, "integral_omega": form.integral_omega, "anisotropy": form.anisotropy,
    })
    if args.grid:
        n = norm.dim
        field = FinslerField(norm, -args.half_width * np.ones(n), args.half_width * np.ones(n),
                             factor=_factor(args.factor))
        try:
            mf = averaged_metric_field(field, args.grid, quad, strategy)
        except NotPositiveDefiniteError as exc:
            report.update({"error": str(exc), "where": exc.where, "min_eig": exc.min_eig})
            dump_report(report, args.out)
            return EXIT_NOT_PD
        report["field"] = mf.to_records()
        report["factor"] = args.factor
    dump_report(report, args.out)
    return EXIT_OK


def _vector_field(args, n):
    name = args.field
    if name == "radial":
        return cf.radial_field(n)
    if name == "rotation":
        return cf.rotation_field(n)
    if name == "shear":
        return cf.shear_field(n)
    if name == "translation":
        b = _floats(args.b, "b") if args.b else [1.0] + [0.0] * (n - 1)
        return cf.translation_field(b)
    if name == "special-conformal":
        b = _floats(args.b, "b") if args.b else [0.1] + [0.0] * (n - 1)
        return cf.special_conformal_field(b)
    raise UsageError(f"unknown field {name!r}")


def cmd_classify(args):
    norm = parse_norm(args)
    n = norm.dim
    field = FinslerField(norm, -args.chart * np.ones(n), args.chart * np.ones(n),
                         factor=_factor(args.factor))
    v = _vector_field(args, n)
    rng = np.random.default_rng(args.seed)
    points = rng.uniform(-args.box, args.box, (args.points, n))
    quad = build_sphere_quadrature(n, args.resolution)
    report = {"command": "classify", "field": v.tag, "norm": norm_to_spec(norm), "factor": args.factor,
              "seed": args.seed, "tol": args.tol}
    try:
        rep = cf.classify_field(field, v, points, tol=args.tol, n_directions=args.directions,
                                seed=args.seed, tau=args.tau, steps=args.probe_steps)
        report.update(rep.to_dict())
        if rep.verdict != cf.Verdict.NOT_CONFORMAL:
            tr = cf.transfer_consistency(field, v, points, quad, _strategy(args), args.tol,
                                         n_directions=args.directions, seed=args.seed,
                                         tau=args.tau, steps=args.probe_steps, report=rep)
            report["transfer"] = tr.to_dict()
    except FlowEscapeError as exc:
        report["error"] = str(exc)
        dump_report(report, args.out)
        return EXIT_ESCAPE
    dump_report(report, args.out)
    return EXIT_OK


def _first_failure(invariants):
    for name, res in invariants.items():
        if not res["pass"]:
            return name
    return None


def _rotation(n, angle):
    A = np.eye(n)
    if angle:
        if n < 3:
            raise UsageError("a rotation fixing b needs dimension >= 3")
        c, s = np.cos(angle), np.sin(angle)
        A[:2, :2] = [[c, -s], [s, c]]
    return A


def cmd_sphere_demo(args):
    n = args.dim
    report = {"command": "sphere-demo", "case": args.case, "dim": n, "seed": args.seed}
    if args.case == "2a":
        norm = parse_norm(args)
        res = sp.case2a_suite(norm, seed=args.seed, n_directions=args.directions)
        report.update({"norm": norm_to_spec(norm), "invariants": res["invariants"],
                       "reflection_invariance_defect": res["reflection_invariance_defect"],
                       "euclidean_forced": res["euclidean_forced"]})
        failure = _first_failure(res["invariants"])
        chart = sp.SphereChart(n)
        rng = np.random.default_rng(args.seed)
        starts = rng.standard_normal((args.starts, n + 1))
        starts /= np.linalg.norm(starts, axis=1, keepdims=True)
        b = np.zeros(n)
        b[0] = 1.0
    else:
        norm = parse_norm(args)
        b = np.array(_floats(args.b, "b")) if args.b else np.eye(n)[-1 if args.angle else 0]
        if len(b) != n:
            raise UsageError(f"--b needs {n} entries")
        mob = sp.MobiusMap(_rotation(n, args.angle), b)
        quad = build_sphere_quadrature(n, args.resolution)
        res = sp.case2b_suite(norm, mob, round_c=args.round_c, seed=args.seed, n_starts=args.starts,
                              horizon=args.horizon, flow_tol=args.flow_tol, depth=args.depth,
                              quad=quad, strategy=_strategy(args))
        report.update({"norm": norm_to_spec(norm), "b": b, "angle": args.angle,
                       "invariants": res["invariants"], "h_A": res["h_A"],
                       "horizon": args.horizon})
        failure = _first_failure(res["invariants"])
        chart, starts = res["chart"], res["starts"]
    report["first_failure"] = failure
    if args.csv:
        rows = sp.v1_trajectories(starts, b, chart, args.horizon, args.samples)
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["trajectory", "t"] + [f"q{i}" for i in range(n + 1)])
            for k, t, q in rows:
                w.writerow([k, repr(t)] + [repr(float(c)) for c in q])
        report["csv"] = args.csv
    dump_report(report, args.out)
    if failure is not None:
        print(f"finslerkit: invariant failed: {failure}", file=sys.stderr)
        return EXIT_SUITE
    return EXIT_OK


def _map(args, norm):
    n = norm.dim
    if args.map == "inversion":
        return lv.inversion_map()
    if args.map == "g-inversion":
        return lv.averaged_inversion(norm, build_sphere_quadrature(n, args.resolution))
    if args.map == "similarity":
        rng = np.random.default_rng(args.seed + 1)
        Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        return lv.similarity_map(2.0, Q, np.ones(n))
    if args.map == "identity":
        return lv.similarity_map(1.0, np.eye(n), np.zeros(n))
    raise UsageError(f"unknown map {args.map!r}")


def cmd_liouville_check(args):
    norm = parse_norm(args)
    n = norm.dim
    fmap = _map(args, norm)
    pts = lv.annulus_samples(n, args.points, 1.2, 2.5, seed=args.seed)
    spreads = [lv.directional_stretch_spread(norm, fmap, x, n_directions=args.directions,
                                             seed=args.seed) for x in pts]
    X = lv.annulus_samples(n, 50, 0.5, 2.0, seed=args.seed + 7)
    fit = lv.fit_similarity(X, lv.sample_map(fmap, X))
    report = {"command": "liouville-check", "norm": norm_to_spec(norm), "map": fmap.name,
              "seed": args.seed, "points": pts, "spread_per_point": spreads,
              "conformal": bool(max(spreads) < args.tol), "tol": args.tol,
              "similarity_fit": fit.to_dict()}
    dump_report(report, args.out)
    return EXIT_OK


def cmd_validate_norm(args):
    norm = parse_norm(args)
    res = validate_norm(norm, args.samples, args.seed, tol=args.tol)
    report = {"command": "validate-norm", "norm": norm_to_spec(norm), "seed": args.seed}
    report.update(res.to_dict())
    dump_report(report, args.out)
    return EXIT_OK if res.valid else EXIT_SUITE


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def _common(p, tol):
    p.add_argument("--norm", default="euclid-identity",
                   help="preset (euclid-identity, even-p, quartic, randers), inline JSON, or @file")
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--p", type=int, default=4, help="exponent for even-p")
    p.add_argument("--beta", default=None, help="Randers covector, comma separated")
    p.add_argument("--resolution", type=int, default=DEFAULT_RESOLUTION)
    p.add_argument("--fd-step", type=float, default=1e-4)
    p.add_argument("--hessian", choices=["auto", "analytic", "fd"], default="auto")
    p.add_argument("--tol", type=float, default=tol)
    p.add_argument("--seed", type=int, default=None, help="required for sampled computations")
    p.add_argument("--out", default="-")


def build_parser():
    parser = argparse.ArgumentParser(prog="finslerkit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("avg-metric", help="averaged Riemannian metric of a norm")
    _common(p, 1e-10)
    p.add_argument("--grid", type=int, default=0, help="also export a metric field on an n-dim grid")
    p.add_argument("--half-width", type=float, default=1.0)
    p.add_argument("--factor", default="none")
    p.set_defaults(func=cmd_avg_metric)

    p = sub.add_parser("classify", help="conformal classification of a vector field")
    _common(p, 1e-4)
    p.add_argument("--field", default="radial",
                   choices=["radial", "rotation", "translation", "shear", "special-conformal"])
    p.add_argument("--b", default=None)
    p.add_argument("--factor", default="none")
    p.add_argument("--points", type=int, default=8)
    p.add_argument("--directions", type=int, default=16)
    p.add_argument("--box", type=float, default=2.0, help="sample points from [-box, box]^n")
    p.add_argument("--chart", type=float, default=10.0, help="chart half-width")
    p.add_argument("--tau", type=float, default=1e-4)
    p.add_argument("--probe-steps", type=int, default=4)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("sphere-demo", help="sphere case suites and v1 trajectories")
    _common(p, 1e-8)
    p.add_argument("--case", choices=["2a", "2b"], required=True)
    p.add_argument("--b", default=None)
    p.add_argument("--angle", type=float, default=0.0, help="rotation angle of A (needs dim >= 3)")
    p.add_argument("--round-c", type=float, default=1.0)
    p.add_argument("--horizon", type=float, default=30.0)
    p.add_argument("--flow-tol", type=float, default=1e-3)
    p.add_argument("--depth", type=int, default=40)
    p.add_argument("--starts", type=int, default=20)
    p.add_argument("--directions", type=int, default=128)
    p.add_argument("--samples", type=int, default=61, help="time samples per CSV trajectory")
    p.add_argument("--csv", default=None)
    p.set_defaults(func=cmd_sphere_demo)

    p = sub.add_parser("liouville-check", help="stretch spread and similarity fit of a map")
    _common(p, 1e-7)
    p.add_argument("--map", default="inversion",
                   choices=["inversion", "g-inversion", "similarity", "identity"])
    p.add_argument("--points", type=int, default=5)
    p.add_argument("--directions", type=int, default=128)
    p.set_defaults(func=cmd_liouville_check)

    p = sub.add_parser("validate-norm", help="sampled check of the norm axioms")
    _common(p, 1e-10)
    p.add_argument("--samples", type=int, default=1000)
    p.set_defaults(func=cmd_validate_norm)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    args.dim_given = args.dim is not None
    if args.dim is None:
        args.dim = 2
    if args.seed is None:
        if args.command != "avg-metric":
            print(f"finslerkit: error: {args.command} samples randomly and needs --seed", file=sys.stderr)
            return EXIT_INVALID
        args.seed = 0
    try:
        return args.func(args)
    except (InvalidNormError, UsageError, ValueError) as exc:
        print(f"finslerkit: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except FlowEscapeError as exc:
        print(f"finslerkit: flow escaped: {exc}", file=sys.stderr)
        return EXIT_ESCAPE
    except FinslerError as exc:
        print(f"finslerkit: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
