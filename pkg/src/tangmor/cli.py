"""Command-line front end.

Subcommands wire generation, ingestion, reduction and evaluation into
reproducible runs: every run directory receives the delimited outputs, the
companion figures, and a JSON copy of the configuration that produced them.

Exit codes: 0 success, 1 numerical failure (breakdown or singularity),
2 usage error.
"""

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import evaluation, figures
from .adaptive import run_abtl
from .errors import TangmorError
from .problems import (FdmSpec, generate_fdm, load_matrix_market, load_reduced,
                       save_reduced, write_matrix)
from .second_order import reduce_second_order

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_USAGE = 2

HISTORY_HEADER = ["iteration", "sigma_re", "sigma_im", "mu_re", "mu_im",
                  "res_right", "res_left", "biorth_error", "wall_time_s"]


class UsageError(Exception):
    pass


def _add_system_arguments(sub):
    sub.add_argument("--input", help="Matrix Market file for A, or a directory "
                                     "holding A.mtx/B.mtx/C.mtx")
    sub.add_argument("--mdk", nargs=3, metavar=("M", "D", "K"),
                     help="Matrix Market files of the mass, damping and "
                          "stiffness matrices ('-' for identity mass)")
    sub.add_argument("--b", help="Matrix Market file for B")
    sub.add_argument("--c", help="Matrix Market file for C")
    sub.add_argument("--p", type=int, help="IO count when B/C are synthesized")
    sub.add_argument("--seed", type=int, default=0, help="seed for synthesized B/C")
    sub.add_argument("--second-order", action="store_true",
                     help="treat the input as a second-order system (needs --mdk)")


def _add_grid_arguments(sub):
    sub.add_argument("--grid-min", type=float, default=evaluation.DEFAULT_OMEGA_MIN)
    sub.add_argument("--grid-max", type=float, default=evaluation.DEFAULT_OMEGA_MAX)
    sub.add_argument("--grid-count", type=int, default=evaluation.DEFAULT_COUNT)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tangmor",
        description="Interpolatory model reduction of large sparse MIMO LTI systems",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen-fdm", help="generate a convection-diffusion "
                                              "benchmark system")
    gen.add_argument("--n0", type=int, required=True,
                     help="inner grid points per direction (n = n0^2)")
    gen.add_argument("--p", type=int, default=2)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="output directory")
    gen.set_defaults(func=cmd_gen_fdm)

    red = commands.add_parser("reduce", help="run the adaptive reduction")
    _add_system_arguments(red)
    red.add_argument("--m-max", type=int, required=True, help="iteration budget")
    red.add_argument("--s", type=int, default=1, help="tangential block width")
    red.add_argument("--tol", type=float, default=1e-8)
    red.add_argument("--out", required=True)
    red.add_argument("--no-figures", action="store_true")
    red.set_defaults(func=cmd_reduce)

    ev = commands.add_parser("eval", help="frequency-domain comparison of a "
                                          "saved reduced model against the "
                                          "full system")
    _add_system_arguments(ev)
    ev.add_argument("--reduced", required=True,
                    help="path prefix of a saved reduced model")
    _add_grid_arguments(ev)
    ev.add_argument("--out", required=True)
    ev.add_argument("--no-figures", action="store_true")
    ev.set_defaults(func=cmd_eval)

    cmp_ = commands.add_parser("compare", help="reduce at several orders and "
                                               "tabulate time and sampled error")
    _add_system_arguments(cmp_)
    cmp_.add_argument("--m-list", required=True,
                      help="comma-separated iteration budgets, e.g. 10,20,40")
    cmp_.add_argument("--s", type=int, default=1)
    cmp_.add_argument("--tol", type=float, default=1e-8)
    _add_grid_arguments(cmp_)
    cmp_.add_argument("--out", required=True)
    cmp_.add_argument("--no-figures", action="store_true")
    cmp_.set_defaults(func=cmd_compare)

    return parser


def _config_dict(args):
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


def _write_config(out_dir, args):
    with open(out_dir / "run_config.json", "w") as fh:
        json.dump(_config_dict(args), fh, indent=2)


def _load_system(args):
    """Bundle from the system flags; validates flag combinations."""
    if args.second_order:
        if not args.mdk:
            raise UsageError("--second-order requires --mdk M D K")
        m_path = None if args.mdk[0] == "-" else args.mdk[0]
        bundle = load_matrix_market(
            mdk_paths=(m_path, args.mdk[1], args.mdk[2]),
            b_path=args.b, c_path=args.c, p=args.p, seed=args.seed,
        )
    else:
        if args.mdk:
            raise UsageError("--mdk is only valid together with --second-order")
        if not args.input:
            raise UsageError("--input is required for first-order systems")
        path = Path(args.input)
        if path.is_dir():
            b = args.b or (path / "B.mtx" if (path / "B.mtx").exists() else None)
            c = args.c or (path / "C.mtx" if (path / "C.mtx").exists() else None)
            a = path / "A.mtx"
            if not a.exists():
                raise UsageError(f"no A.mtx inside {path}")
        else:
            a, b, c = path, args.b, args.c
        bundle = load_matrix_market(a_path=a, b_path=b, c_path=c,
                                    p=args.p, seed=args.seed)
    return bundle


def _grid(args):
    return evaluation.log_grid(args.grid_min, args.grid_max, args.grid_count)


def _write_history_csv(path, history):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTORY_HEADER)
        for rec in history:
            writer.writerow([
                rec.iteration,
                f"{rec.sigma.real:.17g}", f"{rec.sigma.imag:.17g}",
                f"{rec.mu.real:.17g}", f"{rec.mu.imag:.17g}",
                f"{rec.res_right:.17g}", f"{rec.res_left:.17g}",
                f"{rec.biorth_error:.17g}", f"{rec.wall_time_s:.6g}",
            ])


def _print_history(history):
    print(f"{'iter':>4}  {'sigma':>24}  {'mu':>24}  "
          f"{'res_right':>12}  {'res_left':>12}  {'time_s':>8}")
    for rec in history:
        print(f"{rec.iteration:>4}  {rec.sigma:>24.6g}  {rec.mu:>24.6g}  "
              f"{rec.res_right:>12.4e}  {rec.res_left:>12.4e}  "
              f"{rec.wall_time_s:>8.3f}")


def cmd_gen_fdm(args):
    spec = FdmSpec(n0=args.n0, seed=args.seed, p=args.p,
                   description=f"convection-diffusion FDM, n0={args.n0}")
    sys_ = generate_fdm(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix(out / "A.mtx", sys_.A)
    write_matrix(out / "B.mtx", sys_.B)
    write_matrix(out / "C.mtx", sys_.C)
    with open(out / "bundle.json", "w") as fh:
        json.dump({"name": f"fdm{sys_.n}", "n": sys_.n, "p": sys_.p,
                   "n0": args.n0, "seed": args.seed}, fh, indent=2)
    _write_config(out, args)
    print(f"wrote n={sys_.n}, p={sys_.p} system to {out}")
    return EXIT_OK


def cmd_reduce(args):
    bundle = _load_system(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    if args.second_order:
        model, state, history = reduce_second_order(
            bundle.system, s=args.s, m_max=args.m_max, tol=args.tol)
    else:
        model, state, history = run_abtl(
            bundle.system, s=args.s, m_max=args.m_max, tol=args.tol)
    elapsed = time.perf_counter() - t0
    _print_history(history)
    save_reduced(model, out / "reduced", state=state, history=history,
                 config=_config_dict(args))
    _write_history_csv(out / "history.csv", history)
    _write_config(out, args)
    if not args.no_figures:
        figures.save_history_figure(out / "history.png", history,
                                    title=bundle.name)
    print(f"reduced {bundle.name} (n={bundle.n}) to order {model.order} "
          f"in {elapsed:.2f} s; artifacts in {out}")
    return EXIT_OK


def cmd_eval(args):
    bundle = _load_system(args)
    rm, _ = load_reduced(args.reduced)
    grid = _grid(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    resp_full = evaluation.response(bundle.system, grid)
    resp_red = evaluation.response(rm, grid)
    err = evaluation.error_curve(bundle.system, rm, grid)
    elapsed = time.perf_counter() - t0
    finite = err.gains[np.isfinite(err.gains)]
    if finite.size == 0:
        raise TangmorError("no usable grid point for the sampled error estimate")
    hinf = float(finite.max())
    evaluation.write_csv(out / "response.csv", grid, resp_full.gains,
                         resp_red.gains, err.gains)
    if not args.no_figures:
        figures.save_gain_figure(out / "gains.png", grid, resp_full.gains,
                                 resp_red.gains, title=bundle.name)
        figures.save_error_figure(out / "error.png", grid, err.gains,
                                  title=bundle.name)
    _write_config(out, args)
    print(f"sampled H-infinity error estimate (grid lower bound): {hinf:.6e}  "
          f"time: {elapsed:.2f} s  ({grid.count} points)")
    return EXIT_OK


def cmd_compare(args):
    bundle = _load_system(args)
    try:
        m_values = [int(tok) for tok in args.m_list.split(",") if tok.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --m-list: {args.m_list!r}") from exc
    if not m_values:
        raise UsageError("--m-list is empty")
    grid = _grid(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    rows = []
    print(f"{'m':>6}  {'time_s':>10}  {'err_hinf_sampled':>18}")
    for m in m_values:
        t0 = time.perf_counter()
        if args.second_order:
            model, _, _ = reduce_second_order(bundle.system, s=args.s,
                                              m_max=m, tol=args.tol)
        else:
            model, _, _ = run_abtl(bundle.system, s=args.s, m_max=m, tol=args.tol)
        elapsed = time.perf_counter() - t0  # reduction only; errors untimed
        hinf = evaluation.hinf_estimate(bundle.system, model, grid)
        rows.append((m, elapsed, hinf))
        print(f"{m:>6}  {elapsed:>10.2f}  {hinf:>18.6e}")

    with open(out / "compare.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["m", "time_s", "err_hinf_sampled"])
        for m, elapsed, hinf in rows:
            writer.writerow([m, f"{elapsed:.6g}", f"{hinf:.17g}"])
    if not args.no_figures:
        figures.save_compare_figure(out / "compare.png",
                                    [r[0] for r in rows], [r[2] for r in rows],
                                    title=bundle.name)
    _write_config(out, args)
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TangmorError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
