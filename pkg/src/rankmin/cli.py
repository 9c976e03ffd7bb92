"""Command line entry points.

Subcommands: synth (generate + solve + report), complete (solve a ratings
file and save the factors), xval (k-fold NMAE), sweep (grid experiments).
Any flag may come from a TOML config file via --config; explicit flags
win.  RANKMIN_OUTPUT_DIR sets the default output directory.

Exit codes: 0 success, 1 config error, 2 solver failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

try:
    import tomllib
except ImportError:  # python < 3.11
    import tomli as tomllib

import numpy as np

from . import data_io, harness, smalldense, solvers
from .data_io import RatingsScale
from .harness import ConfigError, ExperimentConfig
from .regularizers import RegularizerSpec
from .solvers import SolverConfig

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML file supplying any flag (flags override)")
    p.add_argument("--regularizer", default="trace_inverse",
                   help="nuclear|trace_inverse|capped_l1|log_det|schatten_p|scad|laplace")
    p.add_argument("--gamma", type=float, default=None,
                   help="fix the regularizer scale (default: auto heuristic)")
    p.add_argument("--alpha", type=float, default=3.7, help="scad shape parameter")
    p.add_argument("--p-norm", type=float, default=0.5, help="schatten exponent")
    p.add_argument("--solver", default="gen_asd", choices=["gen_asd", "gen_altmin"])
    p.add_argument("--rank", type=int, default=None, help="rank upper bound r")
    p.add_argument("--beta-max", type=float, default=1.0)
    p.add_argument("--beta0", type=float, default=None)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--w-update", default="exact", choices=["exact", "prox_linear"])
    p.add_argument("--seeds", type=int, nargs="+", default=[0])
    p.add_argument("--output", default=None, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rankmin",
                                 description="Low-rank matrix completion with "
                                             "nonconvex spectral regularizers")
    sub = ap.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="generate a synthetic instance, solve, report")
    _add_common(synth)
    synth.add_argument("--m", type=int, default=300)
    synth.add_argument("--n", type=int, default=200)
    synth.add_argument("--r-true", type=int, default=5)
    synth.add_argument("--d", type=float, default=0.05)
    synth.add_argument("--p", type=float, default=0.3)

    comp = sub.add_parser("complete", help="solve a ratings file, save factors")
    _add_common(comp)
    comp.add_argument("input", help="ratings file")
    comp.add_argument("--format", default="tab", choices=["tab", "comma"])
    comp.add_argument("--y-min", type=float, default=1.0)
    comp.add_argument("--y-max", type=float, default=5.0)

    xval = sub.add_parser("xval", help="k-fold cross validated NMAE")
    _add_common(xval)
    xval.add_argument("input", help="ratings file")
    xval.add_argument("--format", default="tab", choices=["tab", "comma"])
    xval.add_argument("--y-min", type=float, default=1.0)
    xval.add_argument("--y-max", type=float, default=5.0)
    xval.add_argument("--folds", type=int, default=5)

    sweep = sub.add_parser("sweep", help="grid experiments over p/beta_max/gamma")
    _add_common(sweep)
    sweep.add_argument("--m", type=int, default=300)
    sweep.add_argument("--n", type=int, default=200)
    sweep.add_argument("--r-true", type=int, default=5)
    sweep.add_argument("--d", type=float, default=0.05)
    sweep.add_argument("--p", type=float, nargs="+", default=[0.3], dest="p_values")
    sweep.add_argument("--beta-max-values", type=float, nargs="+", default=None)
    sweep.add_argument("--gamma-values", type=float, nargs="+", default=None)
    return ap


def _apply_config_file(args: argparse.Namespace, parser: argparse.ArgumentParser) -> None:
    if not getattr(args, "config", None):
        return
    try:
        with open(args.config, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config file: {e}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"bad config file: {e}") from e
    explicit = {a for a in sys.argv if a.startswith("--")}
    for key, value in data.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise ConfigError(f"unknown config key {key!r}")
        if f"--{key.replace('_', '-')}" not in explicit:
            setattr(args, attr, value)


def _spec_from(args) -> RegularizerSpec:
    gamma = args.gamma if args.gamma is not None else 1.0
    return RegularizerSpec(args.regularizer, gamma=gamma, alpha=args.alpha, p=args.p_norm)


def _solver_cfg_from(args, default_rank: int) -> SolverConfig:
    return SolverConfig(
        r=args.rank if args.rank is not None else default_rank,
        beta_max=args.beta_max,
        beta0=args.beta0,
        gamma0=args.gamma if args.gamma is not None else "auto",
        tol=args.tol,
        max_iter=args.max_iter,
        w_update=args.w_update,
    )


def _cmd_synth(args) -> int:
    cfg = ExperimentConfig(
        task="synthetic",
        regularizer=_spec_from(args),
        solver=args.solver,
        solver_cfg=_solver_cfg_from(args, args.r_true),
        m=args.m, n=args.n, r_true=args.r_true, d=args.d, p=args.p,
        seeds=args.seeds, output_dir=args.output,
    )
    result = harness.run_experiment(cfg)
    vals = [r["rfne"] for r in result.records]
    print(f"rfne mean {np.mean(vals):.6g} over {len(vals)} seed(s); "
          f"table: {result.summary_path}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = ExperimentConfig(
        task="synthetic",
        regularizer=_spec_from(args),
        solver=args.solver,
        solver_cfg=_solver_cfg_from(args, args.r_true),
        m=args.m, n=args.n, r_true=args.r_true, d=args.d,
        sweep_p=args.p_values,
        sweep_beta_max=args.beta_max_values or [],
        sweep_gamma=args.gamma_values or [],
        seeds=args.seeds, output_dir=args.output,
    )
    result = harness.run_experiment(cfg)
    print(f"{len(result.records)} rows written to {result.summary_path}")
    return EXIT_OK


def _cmd_complete(args) -> int:
    scale = RatingsScale(args.y_min, args.y_max)
    obs = data_io.load_ratings(args.input, args.format, scale)
    spec = _spec_from(args)
    scfg = _solver_cfg_from(args, 10)
    solve = solvers.gen_asd if args.solver == "gen_asd" else solvers.gen_altmin
    fp, trace = solve(obs, spec, scfg)
    out_dir = Path(args.output) if args.output else ExperimentConfig(
        task="synthetic", regularizer=spec).resolved_output_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    out = out_dir / "factors.npz"
    np.savez(out, p_m=fp.p_m, p_n=fp.p_n)
    sv = smalldense.factored_singular_values(fp.p_m, fp.p_n)
    print(f"solved {obs.m}x{obs.n} ({len(obs)} ratings) in {len(trace.records)} "
          f"iterations ({trace.termination}); top singular values "
          f"{np.array2string(sv[:5], precision=2)}; factors: {out}")
    return EXIT_OK


def _cmd_xval(args) -> int:
    cfg = ExperimentConfig(
        task="ratings",
        regularizer=_spec_from(args),
        solver=args.solver,
        solver_cfg=_solver_cfg_from(args, 10),
        ratings_path=args.input,
        ratings_format=args.format,
        scale=RatingsScale(args.y_min, args.y_max),
        folds=args.folds,
        seeds=args.seeds,
        output_dir=args.output,
    )
    result = harness.run_experiment(cfg)
    avg = result.records[-1]["nmae"]
    print(f"average NMAE {avg:.4f} over {cfg.folds} folds; table: {result.summary_path}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config_file(args, parser)
        handler = {
            "synth": _cmd_synth,
            "sweep": _cmd_sweep,
            "complete": _cmd_complete,
            "xval": _cmd_xval,
        }[args.command]
        return handler(args)
    except (solvers.DegenerateDirectionError, solvers.SingularWeightError,
            np.linalg.LinAlgError) as e:
        print(f"solver failure: {e}", file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
