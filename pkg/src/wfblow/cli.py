"""Command-line entry point ``wfblow``.

Exit status: 0 when every invoked check passes, 1 on a check failure or a
computation error, 2 on a usage error.  Every flag may also be given in a JSON
file passed with ``--config``; flags on the command line win.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import os
import sys
import tempfile
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .algebra import AlgebraError, PoleError, format_rational, parse
from .blowup import BlowupError, NoSmoothImage, forward_points, inverse_points, make_chain
from .extension import BaseSolution, ExtensionError, extend_along_path, extend_final_condition
from .geometry import GeometryError, OrderedPath, simplex_face
from .harness import (
    DirichletProblem, HarnessError, default_path, grid_values, solve_dirichlet_cube,
)
from .operators import (
    apply_operator, coefficient, simplex_operator, symmetric_operator, transformed_operator,
)
from .suites import SUITES, run_suite

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
SOLVE_TOL = 1e-8


class UsageError(Exception):
    pass


# -- io helpers ----------------------------------------------------------------

def write_atomic(path: str, text: str) -> None:
    """Write through a temporary file in the target directory, then rename."""
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".wfblow-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def fmt(x: float) -> str:
    return "%.15g" % x


# -- argument parsing ------------------------------------------------------------

def _parse_path(args) -> OrderedPath:
    n = args.n
    if args.path is None:
        if n is None:
            raise UsageError("need --path or --n")
        return default_path(n)
    text = args.path if isinstance(args.path, str) else ",".join(str(i) for i in args.path)
    try:
        return OrderedPath.parse(text, n)
    except (GeometryError, ValueError) as exc:
        raise UsageError(f"bad --path {text!r}: {exc}") from None


def _parse_floats(text, what: str) -> List[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"bad {what} {text!r}") from None


def _parse_expr(text: str):
    try:
        return parse(text)
    except (AlgebraError, ValueError, SyntaxError) as exc:
        raise UsageError(f"cannot parse expression {text!r}: {exc}") from None


def _as_list(value) -> List:
    if value is None:
        return []
    return list(value) if isinstance(value, (list, tuple)) else [value]


def _parse_tols(items) -> Dict[str, float]:
    if isinstance(items, dict):
        return {str(k): float(v) for k, v in items.items()}
    out = {}
    for item in _as_list(items):
        name, sep, value = str(item).partition("=")
        try:
            out[name.strip()] = float(value)
        except ValueError:
            sep = ""
        if not sep or not name.strip():
            raise UsageError(f"bad --tol {item!r}, expected CASE=VALUE")
    return out


def _flip_flags(path: OrderedPath, flips) -> Tuple[bool, ...]:
    steps = max(path.n - path.k - 1, 0)
    out = [False] * steps
    for m in _as_list(flips):
        m = int(m)
        if not 1 <= m <= steps:
            raise UsageError(f"--flip {m} outside 1..{steps}")
        out[m - 1] = True
    return tuple(out)


def _threads() -> int:
    raw = os.environ.get("WFBLOW_THREADS", "")
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise UsageError(f"WFBLOW_THREADS must be a positive integer, got {raw!r}") from None
    if value < 1:
        raise UsageError(f"WFBLOW_THREADS must be a positive integer, got {raw!r}")
    return value


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON file whose keys mirror the flags")
    common.add_argument("--n", type=int, help="simplex dimension")
    common.add_argument("--path", help="comma-separated ordered index path")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output file")

    parser = _Parser(prog="wfblow", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("op", parents=[common], help="print operator coefficients or images")
    p.add_argument("--kind", choices=("simplex", "symmetric", "transformed"))
    p.add_argument("--coeff", help="i,j: print one second-order coefficient")
    p.add_argument("--expr", help="apply the operator to this expression")
    p.add_argument("--flip", action="append", type=int, help="flip blow-up step m")

    p = sub.add_parser("extend", parents=[common], help="pathwise extension of a base solution")
    p.add_argument("--base", help="base expression on the first face of the path")
    p.add_argument("--lam", help="time factor lambda of the base solution")
    p.add_argument("--final", action="store_true", default=None,
                   help="extend a final condition, skipping the equation check")

    p = sub.add_parser("blowup", parents=[common], help="apply the iterated blow-up to a point")
    p.add_argument("--point", help="comma-separated coordinates p1..pn")
    p.add_argument("--inverse", action="store_true", default=None)
    p.add_argument("--flip", action="append", type=int, help="flip blow-up step m")
    p.add_argument("--emit-chart", dest="emit_chart", help="write the chain as JSON")

    p = sub.add_parser("verify", parents=[common], help="run verification suites")
    p.add_argument("suite", nargs="?", choices=SUITES + ("all",))
    p.add_argument("--tol", action="append", help="CASE=VALUE tolerance override")
    p.add_argument("--csv", help="also write the cases as CSV")

    p = sub.add_parser("solve", parents=[common], help="hierarchical Dirichlet solve on the cube")
    p.add_argument("--grid", type=int, help="cells per axis")
    p.add_argument("--vertex-data", dest="vertex_data", action="append",
                   help="origin=VALUE or a binary vertex key such as 01=VALUE")
    p.add_argument("--csv", help="write the grid here instead of stdout")
    p.add_argument("--tol", action="append", help="max_dev=VALUE")

    p = sub.add_parser("report", parents=[common], help="summarize a JSON report")
    p.add_argument("file", nargs="?")
    return parser


DEFAULTS = {
    "op": {"kind": "simplex"},
    "extend": {"base": "c", "lam": "0", "final": False},
    "blowup": {"inverse": False},
    "verify": {"suite": "all", "seed": 0, "out": "report.json"},
    "solve": {"n": 2, "grid": 32, "vertex_data": ["origin=1"]},
    "report": {"file": "report.json"},
}


def merge_config(args: argparse.Namespace) -> argparse.Namespace:
    """Fill flags left unset from ``--config`` and then from the defaults."""
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config!r}: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError("the config file must hold a JSON object")
        for key, value in data.items():
            dest = key.replace("-", "_")
            if dest in ("command", "config") or not hasattr(args, dest):
                raise UsageError(f"unknown config key {key!r} for {args.command}")
            if getattr(args, dest) is None:
                setattr(args, dest, value)
    for key, value in DEFAULTS.get(args.command, {}).items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)
    return args


# -- commands ------------------------------------------------------------------------

def _operator(args):
    kind = args.kind
    if kind == "transformed":
        path = _parse_path(args)
        return transformed_operator(path, _flip_flags(path, args.flip))
    n = args.n
    if n is None:
        if args.path is None:
            raise UsageError("need --n or --path")
        n = _parse_path(args).n
    if kind == "symmetric":
        return symmetric_operator(n)
    return simplex_operator(n)


def cmd_op(args, out) -> int:
    spec = _operator(args)
    if args.coeff:
        try:
            i, j = (int(t) for t in args.coeff.split(","))
        except ValueError:
            raise UsageError(f"bad --coeff {args.coeff!r}, expected i,j") from None
        out.write(format_rational(coefficient(spec, i, j)) + "\n")
    elif args.expr:
        out.write(format_rational(apply_operator(spec, _parse_expr(args.expr)).simplify()) + "\n")
    else:
        out.write(spec.describe() + "\n")
    return EXIT_OK


def cmd_extend(args, out) -> int:
    path = _parse_path(args)
    base = _parse_expr(str(args.base))
    if args.final:
        pieces = extend_final_condition(base, path)
    else:
        face = simplex_face(path.n, path.index_set(path.k))
        lam = _parse_expr(str(args.lam))
        if not lam.is_constant():
            raise UsageError("--lam must be a rational constant")
        sol = BaseSolution(face, base, lam.constant_value())
        pieces = extend_along_path(sol, path).pieces
    text = dump_json(pieces.to_json())
    if args.out:
        write_atomic(args.out, text)
    else:
        out.write(text)
    return EXIT_OK


def cmd_blowup(args, out) -> int:
    path = _parse_path(args)
    if args.point is None:
        raise UsageError("blowup needs --point")
    x = np.array(_parse_floats(args.point, "--point"), dtype=float)
    if x.shape != (path.n,):
        raise UsageError(f"--point needs {path.n} coordinates, got {x.size}")
    flips = _flip_flags(path, args.flip)
    if path.n - path.k < 2:
        # nothing to blow up: the chain is the identity
        y, chain = x, None
    else:
        chain = make_chain(path, flips=flips)
        y = (inverse_points if args.inverse else forward_points)(chain, x[None, :], path.n)[0]
    if args.emit_chart:
        data = chain.to_json() if chain is not None else {
            "path": list(path.indices), "n": path.n, "flips": [], "steps": []}
        write_atomic(args.emit_chart, dump_json(data))
    out.write(" ".join(fmt(v) for v in y) + "\n")
    return EXIT_OK


def _cases_csv(cases) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["name", "status", "metric", "tol"])
    for c in cases:
        w.writerow([c["name"], c["status"], repr(c["metric"]), repr(c["tol"])])
    return buf.getvalue()


def cmd_verify(args, out) -> int:
    path = _parse_path(args)
    tols = _parse_tols(args.tol)
    rep = run_suite(args.suite, path, int(args.seed), tols)
    data = rep.to_json()
    write_atomic(args.out, dump_json(data))
    if args.csv:
        write_atomic(args.csv, _cases_csv(data["cases"]))
    return _summarize(data, out)


def _summarize(data, out) -> int:
    cases = data.get("cases", [])
    counts = {s: sum(c["status"] == s for c in cases) for s in ("pass", "fail", "skip")}
    for c in cases:
        out.write(f"{c['status']:4}  {c['name']:36} metric={c['metric']:.3e} tol={c['tol']:.3e}\n")
    out.write(f"{data.get('suite', '?')}: {counts['pass']} passed, {counts['fail']} failed, "
              f"{counts['skip']} skipped\n")
    return EXIT_FAIL if counts["fail"] else EXIT_OK


def _vertex_data(items, n: int) -> Dict[Tuple[int, ...], float]:
    data = {v: 0.0 for v in itertools.product((0, 1), repeat=n)}
    if isinstance(items, dict):
        items = [f"{k}={v}" for k, v in items.items()]
    for item in _as_list(items):
        for part in str(item).split(","):
            key, sep, value = part.partition("=")
            key = key.strip()
            try:
                val = float(value)
            except ValueError:
                sep = ""
            if not sep:
                raise UsageError(f"bad --vertex-data {part!r}")
            if key == "origin":
                v = (0,) * n
            elif len(key) == n and set(key) <= {"0", "1"}:
                v = tuple(int(ch) for ch in key)
            else:
                raise UsageError(f"vertex key {key!r} is neither 'origin' nor {n} binary digits")
            data[v] = val
    return data


def multilinear_interpolant(data: Dict[Tuple[int, ...], float], n: int, N: int) -> np.ndarray:
    g = np.linspace(0.0, 1.0, N + 1)
    out = np.zeros((N + 1,) * n)
    for v, val in data.items():
        if val == 0:
            continue
        term = np.ones(())
        for t in v:
            term = np.multiply.outer(term, g if t else 1 - g)
        out += val * term
    return out


def cmd_solve(args, out) -> int:
    n, N = int(args.n), int(args.grid)
    if n < 1 or N < 2:
        raise UsageError("solve needs --n >= 1 and --grid >= 2")
    path = _parse_path(args)
    if path.n != n or path.k != 0:
        raise UsageError("solve needs a base-0 path of dimension --n")
    tol = _parse_tols(args.tol).get("max_dev", SOLVE_TOL)
    data = _vertex_data(args.vertex_data, n)
    U = solve_dirichlet_cube(DirichletProblem(transformed_operator(path), data), N)
    dev = float(np.abs(U - multilinear_interpolant(data, n, N)).max())
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"p{i}" for i in range(1, n + 1)] + ["u"])
    g = np.linspace(0.0, 1.0, N + 1)
    for idx in itertools.product(range(N + 1), repeat=n):
        w.writerow(["%.17g" % g[i] for i in idx] + ["%.17g" % U[idx]])
    if args.csv:
        write_atomic(args.csv, buf.getvalue())
    else:
        out.write(buf.getvalue())
    out.write(f"max_dev,{dev:.6e}\n")
    return EXIT_OK if dev <= tol else EXIT_FAIL


def cmd_report(args, out) -> int:
    try:
        with open(args.file) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read report {args.file!r}: {exc}") from None
    return _summarize(data, out)


COMMANDS = {"op": cmd_op, "extend": cmd_extend, "blowup": cmd_blowup, "verify": cmd_verify,
            "solve": cmd_solve, "report": cmd_report}


def run(argv: Optional[Sequence[str]] = None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("missing command")
        _threads()  # validated only; every command runs in this process
        merge_config(args)
        return COMMANDS[args.command](args, out)
    except UsageError as exc:
        err.write(parser.format_usage())
        err.write(f"wfblow: usage error: {exc}\n")
        return EXIT_USAGE
    except (GeometryError, BlowupError, NoSmoothImage, ExtensionError, HarnessError,
            PoleError, AlgebraError, ArithmeticError) as exc:
        err.write(f"wfblow: error: {exc}\n")
        return EXIT_FAIL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
