"""Command-line front end.

Subcommands: thresholds, bounds, recover, phase, project, rip-estimate.
Global flags: --seed, --out, --format {csv,json}.  Every run with a fixed
seed is byte-reproducible; CSV outputs start with a comment line echoing the
tool version, seed and full parameters.  Exit codes: 0 success, 2 invalid
configuration, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__, theory
from .experiments import ExperimentSpec, run_phase_experiment, emit_threshold_table
from .projection import project, load_vector, save_vector
from .sampling import (make_instance, load_instance, save_instance,
                       sample_gaussian_matrix, estimate_tree_rip,
                       RankDeficientError)
from .solvers import SolverConfig, solve_itp, solve_nitp, ConfigError
from .trees import build_complete_tree, load_topology

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _echo_line(command: str, params: dict) -> str:
    body = " ".join(f"{k}={params[k]}" for k in sorted(params))
    return f"# treeitp {__version__} {command} {body}"


def _emit(text: str, out_path: str | None) -> None:
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
            if not text.endswith("\n"):
                fh.write("\n")
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _rows_to_csv(command: str, params: dict, fields: list[str],
                 rows: list[dict]) -> str:
    lines = [_echo_line(command, params), ",".join(fields)]
    for row in rows:
        lines.append(",".join(_fmt(row.get(f)) for f in fields))
    return "\n".join(lines)


def _rows_to_json(command: str, params: dict, rows: list[dict]) -> str:
    return json.dumps({"tool": f"treeitp {__version__}", "command": command,
                       "params": params, "rows": rows}, sort_keys=True)


def _parse_alpha(text: str | None):
    if text is None or text in ("opt", "optimal"):
        return None
    return float(text)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_thresholds(args) -> int:
    params = {"d": args.d, "variant": args.variant, "analysis": args.analysis,
              "kappa": args.kappa, "seed": args.seed}
    if args.table:
        _emit(emit_threshold_table(kappa=args.kappa), args.out)
        return EXIT_OK
    kappa = args.kappa if args.variant == "nitp" else None
    if args.analysis == "rip":
        rho = theory.threshold_rip(args.d, args.variant, kappa=kappa)
    elif args.analysis == "sp":
        rho = theory.threshold_stable_point(args.d, args.variant, kappa=kappa)
    else:
        if args.d != 2:
            raise ConfigError("prior analysis is defined for binary trees only")
        rho = theory.threshold_prior(args.variant)
    recip = theory.oversampling_reciprocal(rho)
    rows = [{"d": args.d, "variant": args.variant, "analysis": args.analysis,
             "rho_hat": rho, "reciprocal": recip}]
    if args.format == "json":
        _emit(_rows_to_json("thresholds", params, rows), args.out)
    else:
        _emit(_rows_to_csv("thresholds", params,
                           ["d", "variant", "analysis", "rho_hat", "reciprocal"],
                           rows), args.out)
    return EXIT_OK


def _cmd_bounds(args) -> int:
    params = {"d": args.d, "rho_min": args.rho_min, "rho_max": args.rho_max,
              "points": args.points, "kappa": args.kappa, "seed": args.seed}
    if not 0.0 < args.rho_min <= args.rho_max < 1.0:
        raise ConfigError("need 0 < rho-min <= rho-max < 1")
    if args.points < 1:
        raise ConfigError("points must be >= 1")
    grid = np.linspace(args.rho_min, args.rho_max, args.points)
    query = theory.TheoryQuery(order_d=args.d, kappa=args.kappa)
    table = theory.theory_table(query, [float(r) for r in grid])
    rows = [{f: getattr(r, f) for f in theory.CSV_FIELDS} for r in table]
    if args.format == "json":
        _emit(_rows_to_json("bounds", params, rows), args.out)
    else:
        _emit(_rows_to_csv("bounds", params, list(theory.CSV_FIELDS), rows),
              args.out)
    return EXIT_OK


def _cmd_project(args) -> int:
    topology = load_topology(args.topology)
    x = load_vector(args.vector)
    result = project(topology, x, args.k)
    payload = {"support": list(result.support.indices),
               "captured_energy": result.captured_energy,
               "clipped": result.clipped}
    _emit(json.dumps(payload, sort_keys=True), args.out)
    return EXIT_OK


def _parse_synth(text: str) -> dict:
    out = {}
    for part in text.split(","):
        key, _, value = part.partition("=")
        key = key.strip()
        if key in ("n", "k", "d", "N"):
            out[key] = int(value)
        elif key in ("sigma",):
            out[key] = float(value)
        else:
            raise ConfigError(f"unknown synth parameter {key!r}")
    if "n" not in out or "k" not in out:
        raise ConfigError("synth instance needs at least n=... and k=...")
    return out


def _cmd_recover(args) -> int:
    if bool(args.instance) == bool(args.synth):
        raise ConfigError("recover needs exactly one of --instance or --synth")
    if args.instance:
        instance = load_instance(args.instance)
    else:
        spec = _parse_synth(args.synth)
        instance = make_instance(spec["n"], spec["k"], spec.get("d", 2),
                                 spec.get("sigma", 0.0), seed=args.seed,
                                 n_signal=spec.get("N"))
    if args.save_instance:
        save_instance(instance, args.save_instance)
    config = SolverConfig(variant=args.variant, k=args.k,
                          alpha=_parse_alpha(args.alpha), kappa=args.kappa,
                          c=args.c, max_iters=args.max_iters)
    report = solve_itp(instance, config) if args.variant == "itp" \
        else solve_nitp(instance, config)
    payload = report.to_dict()
    payload["params"] = {"variant": args.variant, "alpha": args.alpha,
                         "kappa": args.kappa, "c": args.c, "k": config.k or instance.k,
                         "max_iters": args.max_iters, "seed": args.seed}
    x_hat = np.asarray(payload.pop("x_hat"))
    _emit(json.dumps(payload, sort_keys=True), args.out)
    if args.x_out:
        save_vector(x_hat, args.x_out)
    return EXIT_OK


def _cmd_phase(args) -> int:
    grid = tuple(float(r) for r in args.rho_grid.split(","))
    spec = ExperimentSpec(order_d=args.d, n=args.n, rho_grid=grid,
                          trials=args.trials, sigma=args.sigma,
                          variant=args.variant, alpha=_parse_alpha(args.alpha),
                          kappa=args.kappa, c=args.c, seed=args.seed,
                          success_tol=args.success_tol,
                          n_signal=args.n_signal, max_iters=args.max_iters)
    rows_dc = run_phase_experiment(spec)
    params = {"d": args.d, "n": args.n, "rho_grid": args.rho_grid,
              "trials": args.trials, "sigma": args.sigma,
              "variant": args.variant, "alpha": args.alpha,
              "kappa": args.kappa, "c": args.c, "seed": args.seed,
              "success_tol": args.success_tol, "n_signal": args.n_signal,
              "max_iters": args.max_iters}
    fields = ["rho", "success_rate", "mean_rel_error", "mean_iters", "trials"]
    rows = [{f: getattr(r, f) for f in fields} for r in rows_dc]
    if args.format == "json":
        _emit(_rows_to_json("phase", params, rows), args.out)
    else:
        _emit(_rows_to_csv("phase", params, fields, rows), args.out)
    return EXIT_OK


def _cmd_rip_estimate(args) -> int:
    topology = build_complete_tree(args.n_signal, args.d)
    matrix = sample_gaussian_matrix(args.n, args.n_signal, args.seed)
    est = estimate_tree_rip(matrix, topology, args.s, args.samples, args.seed)
    rho = args.s / args.n
    rows = [{"s": est.order_s, "rho": rho, "lower_hat": est.lower_hat,
             "upper_hat": est.upper_hat, "samples": est.n_supports_sampled,
             "tl_bound": theory.rip_bound_lower(args.d, rho) if rho < 1 else None,
             "tu_bound": theory.rip_bound_upper(args.d, rho) if rho <= 1 else None}]
    params = {"n": args.n, "n_signal": args.n_signal, "d": args.d, "s": args.s,
              "samples": args.samples, "seed": args.seed}
    if args.format == "json":
        _emit(_rows_to_json("rip-estimate", params, rows), args.out)
    else:
        _emit(_rows_to_csv("rip-estimate", params,
                           ["s", "rho", "lower_hat", "upper_hat", "samples",
                            "tl_bound", "tu_bound"], rows), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treeitp",
        description="Tree-sparse compressed sensing: solvers and recovery theory")
    parser.add_argument("--version", action="version",
                        version=f"treeitp {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="64-bit run seed")
    common.add_argument("--out", default=None, help="output path (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("thresholds", parents=[common],
                       help="oversampling thresholds rho_hat and 1/rho_hat")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--variant", choices=("itp", "nitp"), default="itp")
    p.add_argument("--analysis", choices=("rip", "sp", "prior"), default="rip")
    p.add_argument("--kappa", type=float, default=1.1)
    p.add_argument("--table", action="store_true",
                   help="print the full comparison table instead")
    p.set_defaults(func=_cmd_thresholds)

    p = sub.add_parser("bounds", parents=[common],
                       help="bound/factor curves on a rho grid (CSV)")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--rho-min", type=float, required=True)
    p.add_argument("--rho-max", type=float, required=True)
    p.add_argument("--points", type=int, required=True)
    p.add_argument("--kappa", type=float, default=1.1)
    p.set_defaults(func=_cmd_bounds)

    p = sub.add_parser("project", parents=[common],
                       help="exact tree projection of a vector file")
    p.add_argument("--topology", required=True, help="topology JSON file")
    p.add_argument("--vector", required=True, help="newline-delimited decimals")
    p.add_argument("--k", type=int, required=True)
    p.set_defaults(func=_cmd_project)

    p = sub.add_parser("recover", parents=[common],
                       help="run ITP/NITP on one instance")
    p.add_argument("--instance", default=None, help="instance JSON file")
    p.add_argument("--synth", default=None,
                   help="generate instance: n=500,k=5[,d=2][,sigma=0][,N=..]")
    p.add_argument("--save-instance", default=None)
    p.add_argument("--variant", choices=("itp", "nitp"), default="itp")
    p.add_argument("--alpha", default=None, help="stepsize or 'opt'")
    p.add_argument("--kappa", type=float, default=1.1)
    p.add_argument("--c", type=float, default=0.05)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--max-iters", type=int, default=2000)
    p.add_argument("--x-out", default=None, help="write recovered vector here")
    p.set_defaults(func=_cmd_recover)

    p = sub.add_parser("phase", parents=[common],
                       help="Monte Carlo phase experiment over a rho grid")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--rho-grid", required=True, help="comma-separated rhos")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--variant", choices=("itp", "nitp"), default="itp")
    p.add_argument("--alpha", default=None, help="stepsize or 'opt'")
    p.add_argument("--kappa", type=float, default=1.1)
    p.add_argument("--c", type=float, default=0.05)
    p.add_argument("--success-tol", type=float, default=1e-6)
    p.add_argument("--n-signal", type=int, default=None)
    p.add_argument("--max-iters", type=int, default=2000)
    p.set_defaults(func=_cmd_phase)

    p = sub.add_parser("rip-estimate", parents=[common],
                       help="Monte Carlo tree-RIP estimate for one matrix")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--n-signal", type=int, required=True)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--samples", type=int, default=1000)
    p.set_defaults(func=_cmd_rip_estimate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        if isinstance(exc, (theory.NoSolutionError,
                            theory.DenominatorNonpositiveError)):
            print(f"numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERICAL
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RankDeficientError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
