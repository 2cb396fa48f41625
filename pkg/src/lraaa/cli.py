"""Command-line surface: generate benchmark grids, fit models, evaluate
and report errors.

Exit codes: 0 success, 1 usage error, 2 unreadable/invalid input files,
3 numerical failure (pole on grid, solver failure, memory budget).
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import io
from .als import AlsConfig
from .barycentric import PoleError, evaluate_grid
from .driver import FitConfig, fit, trace_errors
from .loewner import MemoryBudgetError
from .models import make_grid
from .solvers import SolverError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_NUMERICAL = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _parse_params(pairs):
    out = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise UsageError(f"--param expects key=value, got {pair!r}")
        key, raw = pair.split("=", 1)
        for cast in (int, float):
            try:
                out[key] = cast(raw)
                break
            except ValueError:
                continue
        else:
            out[key] = raw
    return out


def _parse_max_order(text, ndim):
    if text is None:
        return None
    caps = []
    for token in text.split(","):
        token = token.strip().lower()
        caps.append(None if token in ("-", "none", "inf", "0") else int(token))
    if len(caps) != ndim:
        raise UsageError(
            f"--max-order needs {ndim} comma-separated entries, got {len(caps)}"
        )
    return tuple(caps)


def _build_parser() -> _Parser:
    parser = _Parser(prog="lraaa", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a benchmark sample grid")
    gen.add_argument(
        "--model",
        required=True,
        choices=["trig3", "trig5", "msd", "blockk", "separable"],
    )
    gen.add_argument("--param", action="append", metavar="KEY=VALUE")
    gen.add_argument("--masses", type=int, help="msd: number of masses")
    gen.add_argument("--mass", type=float, help="msd: mass value")
    gen.add_argument("--damping", type=float, help="msd: damping value")
    gen.add_argument("--out", required=True)

    fit_p = sub.add_parser("fit", help="run the greedy rational fit")
    fit_p.add_argument("--input", required=True)
    fit_p.add_argument("--algorithm", required=True, choices=["paaa", "lr-paaa"])
    fit_p.add_argument("--rank", type=int, default=1)
    fit_p.add_argument("--tol", type=float, default=1e-3)
    fit_p.add_argument("--max-iter", type=int, default=100)
    fit_p.add_argument("--als-tol", type=float, default=1e-2)
    fit_p.add_argument("--max-order", help="per-variable node caps n1,...,nd")
    fit_p.add_argument("--seed", type=int, default=0)
    fit_p.add_argument("--memory-budget", type=int)
    fit_p.add_argument("--out", required=True)
    fit_p.add_argument("--trace")

    eval_p = sub.add_parser("eval", help="evaluate a model over a grid")
    eval_p.add_argument("--model", required=True)
    eval_p.add_argument("--input", required=True)
    eval_p.add_argument("--out", required=True)

    rep = sub.add_parser("report", help="emit the three error metrics")
    rep.add_argument("--model", required=True)
    rep.add_argument("--input", required=True)
    rep.add_argument("--validation")
    rep.add_argument("--out", required=True)
    return parser


def _cmd_generate(args) -> int:
    params = _parse_params(args.param)
    if args.model == "msd":
        for key, val in (
            ("masses", args.masses),
            ("mass", args.mass),
            ("damping", args.damping),
        ):
            if val is not None:
                params[key] = val
    grid = make_grid(args.model, **params)
    io.save_grid(grid, args.out)
    print(f"wrote {args.model} grid of shape {grid.shape} to {args.out}")
    return EXIT_OK


def _cmd_fit(args) -> int:
    grid = io.load_grid(args.input)
    caps = _parse_max_order(args.max_order, grid.ndim)
    cfg = FitConfig(
        algorithm="full" if args.algorithm == "paaa" else "low-rank",
        rank=args.rank,
        tol=args.tol,
        max_iterations=args.max_iter,
        max_nodes=caps,
        als=AlsConfig(epsilon=args.als_tol, rng_seed=args.seed),
        memory_budget=args.memory_budget,
    )
    model, report = fit(grid, cfg)
    io.save_model(model, args.out)
    if args.trace:
        rows = report.iterations
        columns = {"iteration": [r.iteration for r in rows]}
        for j in range(grid.ndim):
            columns[f"n{j + 1}"] = [r.orders[j] for r in rows]
        columns["linearized_ls"] = [r.linearized_error for r in rows]
        columns["nonlinear_ls"] = [r.ls_error for r in rows]
        columns["max_error"] = [r.max_error for r in rows]
        columns["als_sweeps"] = [r.als_sweeps for r in rows]
        io.emit_dat(columns, args.trace, schema="lraaa-trace/1")
    final = report.final
    print(
        f"fit finished after {final.iteration} iterations: orders "
        f"{final.orders}, max error {final.max_error:.3e}, "
        f"LS error {final.ls_error:.3e}"
    )
    return EXIT_OK


def _cmd_eval(args) -> int:
    model = io.load_model(args.model)
    grid = io.load_grid(args.input)
    values = evaluate_grid(model, grid).reshape(-1)
    coords = np.meshgrid(*grid.axes, indexing="ij")
    columns = {}
    for j in range(grid.ndim):
        flat = coords[j].reshape(-1)
        columns[f"{grid.names[j]}_re"] = flat.real
        columns[f"{grid.names[j]}_im"] = flat.imag
    columns["value_re"] = values.real
    columns["value_im"] = values.imag
    io.emit_dat(columns, args.out, schema="lraaa-values/1")
    print(f"evaluated {values.size} points to {args.out}")
    return EXIT_OK


def _cmd_report(args) -> int:
    model = io.load_model(args.model)
    grid = io.load_grid(args.input)
    validation = io.load_grid(args.validation) if args.validation else None
    errors = trace_errors(model, grid, validation)
    columns = {}
    for group, metrics in errors.items():
        for name, value in metrics.items():
            columns[f"{group}_{name}"] = [value]
    io.emit_dat(columns, args.out, schema="lraaa-errors/1")
    print(
        "sample errors: "
        + ", ".join(f"{k}={v:.3e}" for k, v in errors["sample"].items())
    )
    return EXIT_OK


_COMMANDS = {
    "generate": _cmd_generate,
    "fit": _cmd_fit,
    "eval": _cmd_eval,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except io.IoFormatError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (PoleError, MemoryBudgetError, SolverError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
