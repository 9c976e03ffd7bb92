"""Experiment driver: builds instances, dispatches solvers, writes tables.

One comma-separated summary table per experiment plus one trace file per
run (iter, objective, residual, beta, gamma, seconds) for convergence
plots.  Sweep cells x seeds are independent; rows are sorted canonically
before writing so output is deterministic.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import data_io, metrics, smalldense, solvers
from .data_io import RatingsScale
from .regularizers import RegularizerSpec
from .solvers import SolverConfig
from .sparse_ops import ObservationSet

OUTPUT_DIR_ENV = "RANKMIN_OUTPUT_DIR"


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    task: str  # "synthetic" | "ratings"
    regularizer: RegularizerSpec
    solver: str = "gen_asd"  # "gen_asd" | "gen_altmin"
    solver_cfg: SolverConfig = None  # type: ignore[assignment]
    # synthetic instance parameters
    m: int = 300
    n: int = 200
    r_true: int = 5
    d: float = 0.05
    p: float = 0.3
    # ratings parameters
    ratings_path: str | None = None
    ratings_format: str = "tab"
    scale: RatingsScale = data_io.MOVIELENS_SCALE
    folds: int = 5
    # sweep axes (singleton lists = a single cell)
    sweep_p: list = field(default_factory=list)
    sweep_beta_max: list = field(default_factory=list)
    sweep_gamma: list = field(default_factory=list)
    seeds: list = field(default_factory=lambda: [0])
    output_dir: str | None = None

    def __post_init__(self):
        if self.task not in ("synthetic", "ratings"):
            raise ConfigError(f"unknown task {self.task!r}")
        if self.solver not in ("gen_asd", "gen_altmin"):
            raise ConfigError(f"unknown solver {self.solver!r}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.task == "ratings" and not self.ratings_path:
            raise ConfigError("ratings task requires ratings_path")
        if self.solver_cfg is None:
            self.solver_cfg = SolverConfig(r=10 if self.task == "ratings" else self.r_true)

    def resolved_output_dir(self) -> Path:
        if self.output_dir:
            return Path(self.output_dir)
        return Path(os.environ.get(OUTPUT_DIR_ENV, "."))


@dataclass
class ExperimentResult:
    columns: list
    records: list  # list of dicts, one per (cell x seed) or fold
    summary_path: Path | None = None


def _solve_fn(name: str):
    return solvers.gen_asd if name == "gen_asd" else solvers.gen_altmin


def _write_table(path: Path, columns, records) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for rec in records:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in rec.items()})


def read_table(path) -> list[dict]:
    """Parse a summary table back into records (floats restored exactly)."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rec = {}
            for k, v in row.items():
                try:
                    rec[k] = int(v)
                except ValueError:
                    try:
                        rec[k] = float(v)
                    except ValueError:
                        rec[k] = v
            out.append(rec)
    return out


def _write_trace(path: Path, trace: solvers.SolveTrace) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter", "objective", "residual", "beta", "gamma", "seconds"])
        for rec in trace.records:
            writer.writerow(
                [rec.iteration, repr(rec.objective), repr(rec.residual_sumsq),
                 repr(rec.beta), repr(rec.gamma), repr(rec.seconds)]
            )


def _synthetic_cells(cfg: ExperimentConfig):
    ps = cfg.sweep_p or [cfg.p]
    betas = cfg.sweep_beta_max or [cfg.solver_cfg.beta_max]
    gammas = cfg.sweep_gamma or [None]
    for p in ps:
        for bmax in betas:
            for gamma in gammas:
                yield p, bmax, gamma


def run_synthetic(cfg: ExperimentConfig, write: bool = True) -> ExperimentResult:
    columns = [
        "p", "d", "beta_max", "gamma", "seed", "rfne", "noise_rfne",
        "approx_rank", "iterations", "seconds", "termination",
    ]
    records = []
    solve = _solve_fn(cfg.solver)
    out_dir = cfg.resolved_output_dir()
    for p, bmax, gamma in _synthetic_cells(cfg):
        for seed in cfg.seeds:
            inst = data_io.synth_lowrank(cfg.m, cfg.n, cfg.r_true, cfg.d, seed)
            rows, cols = data_io.sample_mask(cfg.m, cfg.n, p, seed)
            obs = ObservationSet.from_dense(inst.m_noisy, rows, cols)
            scfg = replace(cfg.solver_cfg, beta_max=bmax, seed=seed)
            if gamma is not None:
                # Sweep gammas are held fixed for the whole solve.
                scfg = replace(scfg, gamma0=gamma, gamma_min=gamma)
            fp, trace = solve(obs, cfg.regularizer, scfg)
            sv = smalldense.factored_singular_values(fp.p_m, fp.p_n)
            rec = {
                "p": p, "d": cfg.d, "beta_max": bmax,
                "gamma": float("nan") if gamma is None else gamma, "seed": seed,
                "rfne": metrics.rfne(fp, inst.m_true),
                "noise_rfne": float(
                    np.linalg.norm(inst.m_noisy - inst.m_true) / np.linalg.norm(inst.m_true)
                ),
                "approx_rank": metrics.approx_rank(sv, relative=True),
                "iterations": len(trace.records),
                "seconds": trace.records[-1].seconds if trace.records else 0.0,
                "termination": trace.termination,
            }
            records.append(rec)
            if write:
                label = f"p{p}_b{bmax}_g{gamma}_s{seed}"
                _write_trace(out_dir / f"trace_{label}.csv", trace)
    records.sort(key=lambda r: (r["p"], r["beta_max"], str(r["gamma"]), r["seed"]))
    result = ExperimentResult(columns, records)
    if write:
        result.summary_path = out_dir / "results.csv"
        _write_table(result.summary_path, columns, records)
    return result


def run_ratings(cfg: ExperimentConfig, write: bool = True) -> ExperimentResult:
    columns = ["fold", "nmae", "approx_rank", "iterations", "seconds", "termination"]
    obs = data_io.load_ratings(cfg.ratings_path, cfg.ratings_format, cfg.scale)
    pairs = data_io.kfold_split(obs, cfg.folds, cfg.seeds[0])
    solve = _solve_fn(cfg.solver)
    out_dir = cfg.resolved_output_dir()
    records = []
    for i, (train, test) in enumerate(pairs, start=1):
        fp, trace = solve(train, cfg.regularizer, replace(cfg.solver_cfg, seed=cfg.seeds[0]))
        test = _drop_unseen(train, test)
        sv = smalldense.factored_singular_values(fp.p_m, fp.p_n)
        records.append(
            {
                "fold": i,
                "nmae": metrics.nmae(fp, test, cfg.scale),
                "approx_rank": metrics.approx_rank(sv, relative=True),
                "iterations": len(trace.records),
                "seconds": trace.records[-1].seconds if trace.records else 0.0,
                "termination": trace.termination,
            }
        )
        if write:
            _write_trace(out_dir / f"trace_fold{i}.csv", trace)
    avg = {
        "fold": "avg",
        "nmae": float(np.mean([r["nmae"] for r in records])),
        "approx_rank": float(np.mean([r["approx_rank"] for r in records])),
        "iterations": float(np.mean([r["iterations"] for r in records])),
        "seconds": float(np.mean([r["seconds"] for r in records])),
        "termination": "",
    }
    records = records + [avg]
    result = ExperimentResult(columns, records)
    if write:
        result.summary_path = out_dir / "results.csv"
        _write_table(result.summary_path, columns, records)
    return result


def _drop_unseen(train: ObservationSet, test: ObservationSet) -> ObservationSet:
    """Drop test entries whose user or item never appears in training."""
    seen_u = np.zeros(train.m, dtype=bool)
    seen_i = np.zeros(train.n, dtype=bool)
    seen_u[train.rows] = True
    seen_i[train.cols] = True
    keep = seen_u[test.rows] & seen_i[test.cols]
    return ObservationSet.from_entries(
        test.m, test.n, test.rows[keep], test.cols[keep], test.vals[keep]
    )


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> ExperimentResult:
    """Run every sweep cell x seed (or every fold) and emit the tables."""
    if cfg.task == "synthetic":
        return run_synthetic(cfg, write=write)
    return run_ratings(cfg, write=write)
