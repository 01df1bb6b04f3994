"""Command-line front end.

Exit codes: 0 on success, 1 on usage, input or evaluation errors, 2 when a
configuration is obstructed or a reproduction case fails.
"""

import argparse
import json
import sys

import numpy as np

from . import lattice
from .algebra import CONVENTIONS, PLUS_TO_MINUS
from .lattice import SumParams, epstein6, lattice_sum_B
from .obstructions import (DK_METHODS, assemble_suite, curvature_at, curvature_tails,
                           single_positive_report)
from .reproduce import CASES, run_case
from .solver import INITS, PATTERNS, SolveOptions, search
from .torus import (SUITES, ConfigurationError, count_freedoms_constraints,
                    eps_label, point_index, read_config, write_config)

EXIT_OK, EXIT_ERROR, EXIT_OBSTRUCTED = 0, 1, 2


class UsageError(Exception):
    pass


def _floats(n):
    def parse(text):
        try:
            vals = [float(t) for t in text.replace(",", " ").split()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected {n} numbers, got {text!r}")
        if len(vals) != n:
            raise argparse.ArgumentTypeError(f"expected {n} numbers, got {len(vals)}")
        return np.array(vals)
    return parse


def _bits(text):
    bits = text.replace(",", "").replace(" ", "")
    if len(bits) != 4 or any(b not in "01" for b in bits):
        raise argparse.ArgumentTypeError(f"expected four bits like 0110, got {text!r}")
    return tuple(int(b) for b in bits)


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("expected an integer >= 1")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("expected a positive number")
    return v


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--radius", type=int, default=40,
                        help="truncation radius of lattice sums (default 40)")
    common.add_argument("--tail-tol", type=_positive_float, default=1e-4,
                        help="largest accepted scalar tail bound (default 1e-4)")
    common.add_argument("--format", choices=("text", "structured"), default="text",
                        help="'structured' prints JSON")

    parser = argparse.ArgumentParser(
        prog="ehglue",
        description="Obstructions to gluing Eguchi-Hanson metrics on T^4/Z_2.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", parents=[common], help="evaluate a residual suite")
    p.add_argument("--config", required=True, help="configuration document (JSON)")
    p.add_argument("--suite", choices=SUITES, default="full")
    p.add_argument("--tol", type=_positive_float, default=1e-6)
    p.add_argument("--dk-method", choices=DK_METHODS, default="analytic")
    p.add_argument("--csv", action="store_true", help="print the residual table as CSV")

    p = sub.add_parser("curvature", parents=[common], help="curvature block at a point")
    p.add_argument("--config", required=True)
    p.add_argument("--point", type=_bits, required=True, help="label such as 0000")

    p = sub.add_parser("latsum", parents=[common], help="single lattice sum")
    p.add_argument("--kind", choices=("B", "epstein6"), default="B")
    p.add_argument("--x", type=_floats(4), required=True)
    p.add_argument("--lattice", type=_floats(16), default=None,
                   help="16 numbers, row-major (default identity)")
    p.add_argument("--zeta", type=_floats(3), default=np.array([1.0, 0.0, 0.0]))
    p.add_argument("--zeta-prime", type=_floats(3), default=None)
    p.add_argument("--pairing", choices=CONVENTIONS, default=PLUS_TO_MINUS)
    p.add_argument("--exclude", type=_floats(4), action="append", default=[],
                   help="index a to leave out of epstein6 (repeatable)")

    p = sub.add_parser("reproduce", parents=[common], help="run a reproduction case")
    p.add_argument("case", choices=sorted(CASES) + ["all"])

    p = sub.add_parser("count", parents=[common], help="count freedoms and constraints")
    p.add_argument("--config", required=True)
    p.add_argument("--suite", choices=SUITES, default=None,
                   help="one suite (default both)")

    p = sub.add_parser("search", parents=[common], help="multi-start solver")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--pattern", choices=PATTERNS, default="chessboard")
    p.add_argument("--restarts", type=_positive_int, default=4)
    p.add_argument("--init", choices=INITS, default="near-family")
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--suite", choices=SUITES, default="full")
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--tol", type=_positive_float, default=1e-6)
    p.add_argument("--output", help="write the best configuration here")
    p.add_argument("--history", help="write the residual history CSV here")
    return parser


def _params(args):
    try:
        return SumParams(args.radius, args.tail_tol)
    except ValueError as exc:
        raise UsageError(str(exc))


def _emit(args, text, data):
    if args.format == "structured":
        print(json.dumps(data, indent=2, sort_keys=True))
    else:
        print(text)


def _mat(m):
    return np.array2string(np.asarray(m), precision=8, suppress_small=True)


def cmd_verify(args):
    params = _params(args)
    cfg = read_config(args.config)
    rep = assemble_suite(cfg, args.suite, params, args.dk_method)
    verdict = rep.verdict(args.tol)
    minority = min(np.sum(cfg.orientation == 1), np.sum(cfg.orientation == -1))
    census = single_positive_report(cfg, params) if minority <= 3 else None
    if args.csv:
        print(rep.to_csv(), end="")
    else:
        k = 9 if args.suite == "first-order" else 4
        text = "\n".join([
            f"suite {rep.suite}, radius {rep.radius}, zeta scale {rep.scale:.6g}",
            f"max |residual| = {rep.max_abs:.3e} (tolerance {args.tol:g})",
            f"  pointwise max    = {np.max(np.abs(rep.residuals[:-k])):.3e}",
            f"  deformation max  = {np.max(np.abs(rep.residuals[-k:])):.3e}",
            f"  largest tail     = {np.max(rep.tails):.3e}",
            f"verdict: {verdict}",
        ])
        data = rep.to_dict(args.tol)
        if census is not None:
            text += (f"\ninvertibility census ({len(census.minority)} minority gluing(s)): "
                     f"{census.verdict}, {len(census.certified_invertible)} point(s) "
                     "with certified invertible curvature")
            data["invertibility_census"] = census.to_dict()
        _emit(args, text, data)
    return EXIT_OK if verdict == "unobstructed" else EXIT_OBSTRUCTED


def cmd_curvature(args):
    params = _params(args)
    cfg = read_config(args.config)
    p = point_index(args.point)
    C = curvature_at(cfg, p, params)
    tail = float(curvature_tails(cfg, params)[p])
    eig = np.linalg.eigvalsh(C)
    text = (f"curvature at {eps_label(args.point)}:\n{_mat(C)}\n"
            f"eigenvalues: {_mat(eig)}\nFrobenius tail bound: {tail:.3e}")
    _emit(args, text, {"point": eps_label(args.point), "curvature": C.tolist(),
                       "eigenvalues": eig.tolist(), "tail": tail})
    return EXIT_OK


def cmd_latsum(args):
    params = _params(args)
    L = np.eye(4) if args.lattice is None else args.lattice.reshape(4, 4)
    if args.kind == "epstein6":
        res = epstein6(args.x, L, [a.astype(int) for a in args.exclude], params)
        _emit(args, f"epstein6 = {res.value:.10g}  (tail <= {res.tail:.3e})",
              {"kind": "epstein6", "value": res.value, "tail": res.tail,
               "radius": res.radius})
        return EXIT_OK
    zp = args.zeta if args.zeta_prime is None else args.zeta_prime
    res = lattice_sum_B(args.x, L, args.zeta, zp, args.pairing, params)
    _emit(args, f"B =\n{_mat(res.value)}\nFrobenius tail <= {res.tail:.3e}",
          {"kind": "B", "value": res.value.tolist(), "tail": res.tail,
           "radius": res.radius, "pairing": args.pairing})
    return EXIT_OK


def cmd_reproduce(args):
    params = _params(args)
    names = list(CASES) if args.case == "all" else [args.case]
    results = [run_case(n, params) for n in names]
    _emit(args, "\n".join(r.text() for r in results),
          {"cases": [r.to_dict() for r in results],
           "passed": all(r.passed for r in results)})
    return EXIT_OK if all(r.passed for r in results) else EXIT_OBSTRUCTED


def cmd_count(args):
    cfg = read_config(args.config)
    suites = SUITES if args.suite is None else (args.suite,)
    counts = {s: count_freedoms_constraints(cfg, s) for s in suites}
    _emit(args, "\n".join(f"{s}: {n} parameters, {m} constraints"
                          for s, (n, m) in counts.items()),
          {s: {"parameters": n, "constraints": m} for s, (n, m) in counts.items()})
    return EXIT_OK


def cmd_search(args):
    params = _params(args)
    opts = None
    if args.pattern == "chessboard":
        opts = SolveOptions(max_iter=args.max_iter, tol=args.tol)
    res = search(args.pattern, args.seed, args.restarts, opts, params, args.suite,
                 args.init, args.noise)
    if args.output:
        write_config(res.config, args.output)
    if args.history:
        with open(args.history, "w") as fh:
            fh.write(res.history_csv())
    text = "\n".join([
        f"pattern {args.pattern}, seed {args.seed}, {args.restarts} restart(s)",
        f"best restart {res.provenance['best_restart']}: |residual| = "
        f"{res.residual_norm:.3e} after {res.iterations} iterations ({res.reason})",
        f"Jacobian rank {res.rank} of {res.n_free}, near-null {res.near_null}",
    ])
    _emit(args, text, res.to_dict())
    return EXIT_OK if res.residual_norm < args.tol else EXIT_OBSTRUCTED


COMMANDS = {
    "verify": cmd_verify,
    "curvature": cmd_curvature,
    "latsum": cmd_latsum,
    "reproduce": cmd_reproduce,
    "count": cmd_count,
    "search": cmd_search,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    try:
        lattice.thread_count_from_env()
        return COMMANDS[args.command](args)
    except (UsageError, ConfigurationError, ValueError, OSError,
            lattice.SingularLatticeError, lattice.TailToleranceError) as exc:
        print(f"ehglue {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
