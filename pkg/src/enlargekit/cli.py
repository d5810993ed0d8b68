"""Command-line front end: classify / fitz / enlarge / sumcheck.

Operator spec files are strict JSON (UTF-8, no comments):

    {"space_dim": 2,
     "operator": {"kind": "linear_map", "matrix": [[0, -1], [1, 0]]}}

Operator kinds: linear_map {matrix}, linear_relation {graph_basis, rows
are R^(2n) vectors}, norm_subdiff {p}, normal_cone {set: ball|box|
polytope}, sum {terms: [...]}.

Every command prints a single versioned JSON envelope to stdout; CSV side
outputs go to user-named paths only.  Exit codes: 0 ok, 1 input error,
2 hypothesis/precondition failure, 3 numerical anomaly.  Output is
byte-identical for identical (spec, flags, seed); ENLARGEKIT_SEED
overrides the default seed 0 (an explicit --seed wins).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys

import numpy as np

from . import __version__
from . import certificates as cert
from . import enlargement as enl
from . import operators as ops
from .fitzpatrick import fitz_bruteforce, fitz_closed_form, pairing
from .linalg import DimensionMismatchError

MEMBERSHIP_TOL = 1e-9
SUMCHECK_TOL = 1e-6
BRUTEFORCE_GAP_ADVISORY = 1e-3

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_PRECONDITION = 2
EXIT_ANOMALY = 3


class InputError(ValueError):
    pass


# ---------------------------------------------------------------------------
# spec parsing and serialization
# ---------------------------------------------------------------------------

def _parse_set(obj, n):
    kind = obj.get("kind")
    if kind == "ball":
        return ops.Ball(np.asarray(obj["center"], float), float(obj["radius"]))
    if kind == "box":
        return ops.Box(np.asarray(obj["lo"], float), np.asarray(obj["hi"], float))
    if kind == "polytope":
        return ops.Polytope(tuple(np.asarray(v, float) for v in obj["vertices"]))
    raise InputError(f"unknown set kind {kind!r}")


def _parse_operator(obj, n):
    kind = obj.get("kind")
    if kind == "linear_map":
        m = np.asarray(obj["matrix"], float)
        if m.shape != (n, n):
            raise InputError(f"matrix shape {m.shape} does not match space_dim {n}")
        return ops.LinearMapOp(m)
    if kind == "linear_relation":
        rows = np.asarray(obj["graph_basis"], float)
        if rows.ndim != 2 or rows.shape[1] != 2 * n:
            raise InputError("graph_basis rows must be vectors of length 2n")
        return ops.LinearRelationOp.from_graph_columns(rows.T, dim=n)
    if kind == "norm_subdiff":
        return ops.NormSubdiffOp(dim=n, p=float(obj["p"]))
    if kind == "normal_cone":
        s = _parse_set(obj["set"], n)
        if s.dim != n:
            raise InputError("set dimension does not match space_dim")
        return ops.NormalConeOp(s)
    if kind == "sum":
        terms = tuple(_parse_operator(t, n) for t in obj["terms"])
        return ops.SumOp(terms)
    raise InputError(f"unknown operator kind {kind!r}")


def load_spec(path):
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
        doc = json.loads(raw.decode("utf-8"))
        n = int(doc["space_dim"])
        op = _parse_operator(doc["operator"], n)
    except (OSError, KeyError, TypeError, ValueError, json.JSONDecodeError,
            ops.MalformedDescriptorError, DimensionMismatchError) as exc:
        raise InputError(f"cannot load operator spec {path}: {exc}") from exc
    return op, raw


def _digest(*blobs):
    h = hashlib.sha256()
    for b in blobs:
        h.update(b)
        h.update(b"\x00")
    return h.hexdigest()


def jsonify(value):
    """JSON-safe conversion: arrays to lists, non-finite floats to strings."""
    if isinstance(value, dict):
        return {k: jsonify(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonify(v) for v in value]
    if isinstance(value, np.ndarray):
        return [jsonify(v) for v in value.tolist()]
    if isinstance(value, (np.floating, float)):
        v = float(value)
        if math.isinf(v):
            return "+inf" if v > 0 else "-inf"
        return v
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    return value


def emit(command, digest, seed, tolerances, results, out=sys.stdout):
    envelope = {
        "schema": "v1",
        "tool": f"enlargekit {__version__}",
        "command": command,
        "inputs_digest": digest,
        "seed": seed,
        "tolerances": tolerances,
        "results": jsonify(results),
    }
    out.write(json.dumps(envelope, indent=2) + "\n")


def _parse_floats(text, expected, what):
    try:
        vals = [float(t) for t in text.split(",")]
    except ValueError as exc:
        raise InputError(f"bad {what}: {exc}") from exc
    if len(vals) != expected:
        raise InputError(f"{what} needs {expected} comma-separated floats, "
                         f"got {len(vals)}")
    return np.asarray(vals)


# ---------------------------------------------------------------------------
# classify
# ---------------------------------------------------------------------------

def _classification(op):
    report = ops.validate(op)
    res = {
        "monotone": report.monotone,
        "maximal": report.maximal,
        "symmetric": None,
        "skew": None,
        "non_enlargeable": None,
        "detail": report.detail,
    }
    if isinstance(op, (ops.LinearMapOp, ops.LinearRelationOp)):
        res["symmetric"] = ops.is_symmetric(op)
        res["skew"] = ops.is_skew(op)
    if not report.monotone:
        return res
    verdict, witness = _non_enlargeable(op)
    res["non_enlargeable"] = verdict
    if witness is not None:
        res["witness"] = {"x": witness[0], "xs": witness[1]}
    return res


def _non_enlargeable(op):
    if isinstance(op, ops.LinearMapOp):
        c = cert.non_enlargeable_single_valued(op)
        return c.verdict, c.witness
    if isinstance(op, ops.LinearRelationOp):
        if ops.validate(op).maximal is not True:
            return None, None
        c = cert.non_enlargeable_linear_relation(op)
        return c.verdict, c.witness
    if isinstance(op, ops.SumOp):
        t0, t1 = op.terms
        if isinstance(t0, (ops.LinearMapOp, ops.LinearRelationOp)) and \
                isinstance(t1, (ops.LinearMapOp, ops.LinearRelationOp)):
            return _non_enlargeable(ops.sum_relation(t0, t1))
        return None, None
    if isinstance(op, ops.NormSubdiffOp):
        return False, _subdiff_witness(op)
    if isinstance(op, ops.NormalConeOp):
        return _cone_non_enlargeable(op)
    return None, None


def _subdiff_witness(op):
    e1 = np.zeros(op.dim)
    e1[0] = 1.0
    if op.p == 1.0:
        return e1, 0.5 * e1  # member at eps = 1/2, off the graph
    r = enl.eps_subdiff_slice(op, 0.5).radius
    return np.zeros(op.dim), (1.0 - 1e-3) * r * e1


def _cone_non_enlargeable(op):
    c = op.set
    if isinstance(c, ops.Polytope) and \
            all(np.allclose(v, c.vertices[0]) for v in c.vertices):
        # singleton set: the graph {v} x R^n is affine and non-enlargeable
        base = (c.vertices[0], np.zeros(op.dim))
        return cert.non_enlargeable_affine(op, base).verdict, None
    x0 = c.interior_point()
    for i in range(op.dim):
        d = np.zeros(op.dim)
        d[i] = 1.0
        m = c.support(d) - float(x0 @ d)
        if m <= 1e-9:
            continue
        xs = (0.25 / m) * d  # support slack 0.25 <= eps = 1/2
        if not ops.graph_member(op, x0, xs, tol=1e-9):
            return False, (x0, xs)
    return False, None


def cmd_classify(args):
    op, raw = load_spec(args.spec)
    results = _classification(op)
    tol = {"membership": MEMBERSHIP_TOL, "eigenvalue_slack": 1e-10}
    emit("classify", _digest(raw), args.seed, tol, results)
    return EXIT_OK if results["monotone"] else EXIT_PRECONDITION


# ---------------------------------------------------------------------------
# fitz
# ---------------------------------------------------------------------------

def cmd_fitz(args):
    op, raw = load_spec(args.spec)
    n = ops.ambient_dim(op)
    point = _parse_floats(args.point, 2 * n, "--point")
    x, xs = point[:n], point[n:]
    count, radius = int(args.bruteforce[0]), float(args.bruteforce[1])
    if count <= 0 or radius <= 0:
        raise InputError("--bruteforce needs positive count and radius")
    try:
        closed = fitz_closed_form(op, x, xs)
    except ops.NotMonotoneError as exc:
        print(f"error: operator not monotone: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    brute = fitz_bruteforce(op, x, xs, count=count, radius=radius, seed=args.seed)
    anomaly = brute.diverging
    gap = None
    if closed is not None and math.isfinite(closed):
        gap = closed - brute.value
        anomaly = anomaly or gap > BRUTEFORCE_GAP_ADVISORY or gap < -1e-9
    results = {
        "point": {"x": x, "xs": xs},
        "pairing": pairing(x, xs),
        "closed_form": "n/a" if closed is None else closed,
        "bruteforce": brute.value,
        "bruteforce_best_pair": {"x": brute.best_pair[0], "xs": brute.best_pair[1]},
        "gap": gap if gap is not None else "n/a",
        "divergence_suspected": brute.diverging,
        "radius_trend": [{"radius": r, "sup": s} for r, s in brute.trend],
        "anomaly": anomaly,
    }
    tol = {"membership": MEMBERSHIP_TOL,
           "bruteforce_gap_advisory": BRUTEFORCE_GAP_ADVISORY}
    emit("fitz", _digest(raw), args.seed, tol, results)
    return EXIT_ANOMALY if anomaly else EXIT_OK


# ---------------------------------------------------------------------------
# enlarge
# ---------------------------------------------------------------------------

def _slice_operator(op):
    if isinstance(op, ops.LinearMapOp):
        return op
    if isinstance(op, ops.LinearRelationOp):
        m = ops.relation_as_map(op)
        if m is not None:
            return m
    raise InputError("--slice-at needs a single-valued linear operator")


def _write_boundary_csv(path, x, points):
    n = x.shape[0]
    header = ",".join([f"x{i + 1}" for i in range(n)] +
                      [f"xs{i + 1}" for i in range(n)])
    lines = [header]
    for p in points:
        lines.append(",".join(repr(float(v)) for v in list(x) + list(p)))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def cmd_enlarge(args):
    op, raw = load_spec(args.spec)
    n = ops.ambient_dim(op)
    if args.eps < 0:
        raise InputError("eps must be nonnegative")
    if (args.point is None) == (args.slice_at is None):
        raise InputError("exactly one of --point and --slice-at is required")
    tol = {"membership": MEMBERSHIP_TOL,
           "boundary_probe": 1e-6}
    if args.point is not None:
        point = _parse_floats(args.point, 2 * n, "--point")
        x, xs = point[:n], point[n:]
        try:
            v = enl.enl_member(op, x, xs, args.eps, seed=args.seed)
        except (ops.NotMonotoneError, ops.NotMaximalError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_PRECONDITION
        results = {
            "mode": "membership",
            "eps": args.eps,
            "point": {"x": x, "xs": xs},
            "member": v.member,
            "fitz_value": v.fitz_value,
            "slack": v.slack,
            "method": v.method,
            "approximate": v.method == "bruteforce",
        }
        emit("enlarge", _digest(raw), args.seed, tol, results)
        return EXIT_OK
    x = _parse_floats(args.slice_at, n, "--slice-at")
    try:
        lin = _slice_operator(op)
        ell = enl.enl_slice_linear(lin, x, args.eps)
    except ops.NotMonotoneError as exc:
        print(f"error: operator not monotone: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    results = {
        "mode": "slice",
        "eps": args.eps,
        "at": x,
        "center": ell.center,
        "form": ell.form,
        "level": ell.level,
        "carrier_basis": ell.carrier.basis,
        "carrier_dim": ell.carrier.dim,
        "semiaxes": ell.semiaxes(),
        "ball_radius": ell.ball_radius(),
    }
    if args.csv:
        points = ell.boundary_points(num=64, seed=args.seed)
        _write_boundary_csv(args.csv, x, points)
        results["csv"] = {"path": args.csv, "points": len(points)}
    emit("enlarge", _digest(raw), args.seed, tol, results)
    return EXIT_OK


# ---------------------------------------------------------------------------
# sumcheck
# ---------------------------------------------------------------------------

def cmd_sumcheck(args):
    op_a, raw_a = load_spec(args.spec_a)
    op_b, raw_b = load_spec(args.spec_b)
    if ops.ambient_dim(op_a) != ops.ambient_dim(op_b):
        raise InputError("operand spaces differ")
    try:
        report = cert.sum_fitz_exactness(op_a, op_b, n_points=args.points,
                                         seed=args.seed)
    except (ops.NotMonotoneError, ops.NotMaximalError,
            ops.UnsupportedOperatorError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    non_enl = None
    if cert._both_linear(op_a, op_b):
        rel = ops.sum_relation(op_a, op_b)
        if ops.validate(rel).maximal:
            non_enl = cert.non_enlargeable_linear_relation(rel).verdict
    worst_resid = max((w[2] for w in report.exactness_witnesses), default=0.0)
    results = {
        "mode": report.mode,
        "max_gap": report.max_gap,
        "points_tested": report.points_tested,
        "finite_points": len(report.exactness_witnesses),
        "worst_witness_residual": worst_resid,
        "maximal": report.maximality,
        "hypothesis_ok": report.hypothesis_ok,
        "advisory": not report.hypothesis_ok,
        "non_enlargeable": non_enl,
        "notes": report.notes,
    }
    tol = {"membership": MEMBERSHIP_TOL, "sumcheck": args.tol,
           "witness_residual": 1e-8}
    emit("sumcheck", _digest(raw_a, raw_b), args.seed, tol, results)
    if report.max_gap > args.tol:
        return EXIT_ANOMALY
    return EXIT_OK if report.hypothesis_ok else EXIT_PRECONDITION


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _default_seed():
    env = os.environ.get("ENLARGEKIT_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise InputError(f"ENLARGEKIT_SEED must be an integer, got {env!r}")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="enlargekit",
        description="Fitzpatrick functions and enlargements of monotone "
                    "operators on R^n")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="monotonicity, symmetry, skewness, "
                                        "non-enlargeability")
    p.add_argument("spec")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("fitz", help="closed-form vs sampled Fitzpatrick value")
    p.add_argument("spec")
    p.add_argument("--point", required=True,
                   help="2n comma-separated floats: x then xs")
    p.add_argument("--bruteforce", nargs=2, default=["10000", "10.0"],
                   metavar=("COUNT", "RADIUS"))
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_fitz)

    p = sub.add_parser("enlarge", help="enlargement membership or slice")
    p.add_argument("spec")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--point", help="2n comma-separated floats: x then xs")
    p.add_argument("--slice-at", dest="slice_at",
                   help="n comma-separated floats")
    p.add_argument("--csv", help="write slice boundary samples to this path")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_enlarge)

    p = sub.add_parser("sumcheck", help="sum-theorem exactness and maximality")
    p.add_argument("spec_a")
    p.add_argument("spec_b")
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--tol", type=float, default=SUMCHECK_TOL)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_sumcheck)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.seed is None:
            args.seed = _default_seed()
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ops.MalformedDescriptorError, DimensionMismatchError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
