"""Command-line entry point: ``sphg <subcommand> [options]``.

Subcommands: ``points``, ``weights``, ``solve``, ``sweep-quadrature``,
``sweep-centers``, ``sweep-interp``, ``cond-study``.

Experiment subcommands accept ``--config file.json`` whose keys are the
fields of :class:`ExperimentConfig`; command-line flags override file
values.  Exit status: 0 success, 2 usage error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

from . import galerkin, harness
from .errors import SphgError
from .geometry import fibonacci_nodes, icosahedral_frequency, icosahedral_nodes, load_points, save_points
from .quadrature import compute_weights, save_rule

logger = logging.getLogger("sphg")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _sizes(text):
    try:
        return [int(s) for s in str(text).replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size list {text!r}") from None


def _add_experiment_flags(p, sweep):
    # default=None everywhere so unset flags never override the config file
    p.add_argument("--config", type=Path, help="JSON experiment config")
    p.add_argument("--problem", type=int, choices=(1, 2), default=None)
    p.add_argument("--m", type=int, default=None, help="basis kernel order (3)")
    p.add_argument("--M", type=int, default=None, help="quadrature kernel order (2)")
    p.add_argument("--x-source", default=None, help="fibonacci, icosahedral, or a point-file directory")
    p.add_argument("--x-sizes", type=_sizes, default=None)
    p.add_argument("--y-source", default=None)
    p.add_argument("--y-sizes", type=_sizes, default=None)
    p.add_argument("--basis", choices=("global", "local"), default=None)
    p.add_argument("--K", type=float, default=None)
    p.add_argument("--truncate", action="store_const", const=True, default=None)
    p.add_argument("--n-eval", type=int, default=None)
    p.add_argument("--no-kappa", dest="kappa", action="store_const", const=False, default=None)
    p.add_argument("--rule-cache", type=Path, default=None, help="directory for cached rules")
    p.add_argument("--out", dest="output", default=None, help="output path stem (.csv/.json)")
    p.set_defaults(sweep=sweep)


def _common(p):
    p.add_argument("--threads", type=int, default=None,
                   help="thread count recorded in outputs (falls back to SPHG_THREADS)")
    p.add_argument("--seed", type=int, default=None, help="seed for randomized probe sets")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = _Parser(prog="sphg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("points", help="generate a point set")
    p.add_argument("--family", choices=("fibonacci", "icosahedral"), required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", type=Path, required=True)
    _common(p)

    p = sub.add_parser("weights", help="compute kernel quadrature weights")
    p.add_argument("--points", type=Path, required=True)
    p.add_argument("--m", "--M", dest="M", type=int, default=2)
    p.add_argument("--method", choices=("auto", "dense", "iterative", "symmetric"), default="auto")
    p.add_argument("--out", type=Path, required=True)
    _common(p)

    p = sub.add_parser("solve", help="one Galerkin solve from point files")
    p.add_argument("--problem", type=int, choices=(1, 2), default=1)
    p.add_argument("--x", type=Path, required=True)
    p.add_argument("--y", type=Path, required=True)
    p.add_argument("--m", type=int, default=3)
    p.add_argument("--M", type=int, default=2)
    p.add_argument("--basis", choices=("global", "local"), default="global")
    p.add_argument("--K", type=float, default=7.0)
    p.add_argument("--truncate", action="store_true")
    p.add_argument("--n-eval", type=int, default=62_500)
    p.add_argument("--no-kappa", dest="kappa", action="store_false")
    p.add_argument("--out", default=None, help="output path stem (.csv/.json)")
    p.add_argument("--export-matrix", type=Path, default=None, help="MatrixMarket file")
    _common(p)

    for name, sweep in (("sweep-quadrature", "quadrature"), ("sweep-centers", "centers"),
                        ("sweep-interp", "interp"), ("cond-study", "cond")):
        p = sub.add_parser(name, help=f"{sweep} sweep")
        _add_experiment_flags(p, sweep)
        _common(p)
    return parser


def _threads(args):
    if args.threads is not None:
        return args.threads
    env = os.environ.get("SPHG_THREADS")
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"SPHG_THREADS must be an integer, got {env!r}") from None
    return None


_FLAG_FIELDS = ("problem", "m", "M", "x_source", "x_sizes", "y_source", "y_sizes", "basis",
                "K", "truncate", "n_eval", "kappa", "output", "seed")


def experiment_config(args):
    """Merge the JSON config (if any) with explicitly given flags."""
    d = {}
    if args.config is not None:
        try:
            d = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(d, dict):
            raise UsageError("config file must hold a JSON object")
    for k in _FLAG_FIELDS:
        v = getattr(args, k, None)
        if v is not None:
            d[k] = v
    d["threads"] = _threads(args)
    return harness.ExperimentConfig.from_dict(d)


def _emit(rec, output):
    for line in rec.summary_lines():
        print(line)
    if output:
        for p in rec.write(output):
            logger.info("wrote %s", p)


def cmd_points(args):
    if args.n < 1:
        raise UsageError("--n must be positive")
    if args.family == "fibonacci":
        X = fibonacci_nodes(args.n)
    else:
        X = icosahedral_nodes(frequency=icosahedral_frequency(args.n))
    save_points(X.points, args.out, header=f"{args.family} N={len(X)}")
    print(f"points family={args.family} N={len(X)} out={args.out}")


def cmd_weights(args):
    t0 = time.perf_counter()
    Y = load_points(args.points)
    rule = compute_weights(Y, args.M, method=args.method)
    save_rule(rule, args.out)
    s = math.fsum(rule.weights)
    print(f"weights N_Y={len(rule)} M={args.M} sum={s:.15g} (4pi={4 * math.pi:.15g}) "
          f"positive={rule.positive} time={time.perf_counter() - t0:.2f}s")


def cmd_solve(args):
    t0 = time.perf_counter()
    X = load_points(args.x)
    Y = load_points(args.y)
    cfg = harness.ExperimentConfig(
        problem=args.problem, m=args.m, M=args.M, x_source=str(args.x), x_sizes=[len(X)],
        y_source=str(args.y), y_sizes=[len(Y)], basis=args.basis, K=args.K,
        truncate=args.truncate, n_eval=args.n_eval, kappa=args.kappa, output=args.out,
        threads=_threads(args), seed=args.seed or 0,
    )
    problem = harness.builtin_problem(args.problem)
    rule = compute_weights(Y, args.M)
    basis = harness.make_basis(X, cfg)
    r = harness.solve_once(basis, rule, problem, cfg, harness.evaluation_rule(args.n_eval))
    ms = 1000 * (time.perf_counter() - t0)
    rec = harness.ConvergenceRecord("solve", config=cfg.to_dict())
    rec.steps.append(harness.StepResult("solve", len(Y), len(Y) ** -0.5, r["error"], r["kappa2"], ms,
                                        {"N_X": len(X), "residual": r["solution"].residual}))
    if args.export_matrix is not None:
        galerkin.export_matrix(r["matrix"], args.export_matrix)
    _emit(rec, args.out)


def cmd_experiment(args):
    cfg = experiment_config(args)
    cache = harness.RuleCache(args.rule_cache) if getattr(args, "rule_cache", None) else harness.RuleCache()
    if args.sweep == "quadrature":
        rec = harness.sweep_quadrature(cfg, cache)
    elif args.sweep == "centers":
        rec = harness.sweep_centers(cfg, cache)
    elif args.sweep == "interp":
        rec = harness.sweep_interpolation(cfg)
    else:
        rec = harness.condition_study(cfg, cache)
    rec.info["threads"] = cfg.threads
    _emit(rec, cfg.output)


_COMMANDS = {"points": cmd_points, "weights": cmd_weights, "solve": cmd_solve}


def run(argv=None):
    """Parse ``argv`` and run one subcommand; returns the exit status."""
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    threads = None
    try:
        threads = _threads(args)
        if threads:
            logger.info("threads=%d", threads)
        _COMMANDS.get(args.command, cmd_experiment)(args)
    except UsageError as exc:
        print(f"sphg: error: {exc}", file=sys.stderr)
        return 2
    except (SphgError, OSError) as exc:
        print(f"sphg: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
