"""Acceptance suite: nine numbered criteria, one pass/fail line each.

Criterion 7 needs the MovieLens100k ratings file (u.data); point
RANKMIN_ML100K at it, or drop it in ./data/.  The criterion is skipped
with a warning when the file is absent.
"""

import functools
import os
import time
import warnings
from pathlib import Path

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from rankmin import smalldense, solvers
from rankmin.data_io import MOVIELENS_SCALE, sample_mask, synth_lowrank
from rankmin.harness import ExperimentConfig, run_experiment
from rankmin.metrics import approx_rank, rfne
from rankmin.regularizers import RegularizerSpec, kappa, q_of, rho, rho_prime
from rankmin.smalldense import factored_singular_values, weight_update
from rankmin.solvers import (
    FactorPair,
    SolverConfig,
    exact_step,
    gen_altmin,
    gen_asd,
    gradient,
    subproblem_solve,
)
from rankmin.sparse_ops import ObservationSet, SparseResidual, adjoint_apply, observed_product, residual

TI = RegularizerSpec("trace_inverse")
NUC = RegularizerSpec("nuclear")
SEEDS = list(range(10))


def _report(num: int, ok: bool, detail: str) -> None:
    print(f"criterion {num}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"criterion {num} failed: {detail}"


def _solve_cell(solver, spec, m, n, r, d, p, seed, **cfg_kw):
    inst = synth_lowrank(m, n, r, d, seed)
    rows, cols = sample_mask(m, n, p, seed)
    obs = ObservationSet.from_dense(inst.m_noisy, rows, cols)
    cfg = SolverConfig(r=r, seed=seed, **cfg_kw)
    fp, trace = solver(obs, spec, cfg)
    return inst, fp, trace


@functools.lru_cache(maxsize=None)
def _table_cell(d: float, p: float):
    """GenASD + TraceInverse on the 300x200 rank-5 grid, 10 seeds."""
    out = []
    for seed in SEEDS:
        inst, fp, trace = _solve_cell(gen_asd, TI, 300, 200, 5, d, p, seed)
        sv = factored_singular_values(fp.p_m, fp.p_n)
        out.append((rfne(fp, inst.m_true), approx_rank(sv, relative=True)))
    return out


def test_criterion_1_exact_recovery():
    ok = True
    worst = 0.0
    for solver in (gen_altmin, gen_asd):
        for spec in (NUC, TI):
            t0 = time.perf_counter()
            inst, fp, trace = _solve_cell(
                solver, spec, 100, 80, 1, 0.0, 1.0, seed=0,
                beta_max=1e5, max_iter=100,
            )
            err = rfne(fp, inst.m_true)
            worst = max(worst, err)
            ok &= err < 1e-3 and len(trace.records) <= 100
            ok &= time.perf_counter() - t0 < 5.0
    _report(1, ok, f"worst RFNE {worst:.2e} (< 1e-3, <= 100 iters, < 5 s each)")


def test_criterion_2_table_reproduction():
    bands = {(0.05, 0.3): (0.005, 0.015), (0.05, 0.1): (0.015, 0.04), (0.1, 0.3): (0.012, 0.028)}
    t0 = time.perf_counter()
    means = {}
    for (d, p), (lo, hi) in bands.items():
        means[(d, p)] = float(np.mean([e for e, _ in _table_cell(d, p)]))
    elapsed = time.perf_counter() - t0
    ok = elapsed < 60.0 and all(
        bands[k][0] <= v <= bands[k][1] for k, v in means.items()
    )
    detail = ", ".join(f"(d={d},p={p}): {v:.4f}" for (d, p), v in means.items())
    _report(2, ok, f"{detail}; {elapsed:.1f} s total")


def test_criterion_3_bias_ordering():
    ok = True
    parts = []
    for p in (0.2, 0.4, 0.6):
        errs = {}
        for spec, name in ((TI, "ti"), (NUC, "nuc")):
            errs[name] = float(np.mean([
                rfne(fp, inst.m_true)
                for inst, fp, _ in (
                    _solve_cell(gen_asd, spec, 300, 200, 5, 0.05, p, s) for s in SEEDS
                )
            ]))
        ok &= errs["ti"] <= errs["nuc"]
        parts.append(f"p={p}: {errs['ti']:.4f} vs {errs['nuc']:.4f}")
    _report(3, ok, "TraceInverse vs Nuclear mean RFNE, " + "; ".join(parts))


def test_criterion_4_gamma_robustness():
    means = []
    for g in (2.0, 8.0, 32.0, 128.0):
        errs = []
        for seed in range(3):
            inst, fp, _ = _solve_cell(
                gen_asd, TI, 300, 200, 5, 0.1, 0.3, seed,
                gamma0=g, gamma_min=g,
            )
            errs.append(rfne(fp, inst.m_true))
        means.append(float(np.mean(errs)))
    spread = (max(means) - min(means)) / np.mean(means)
    _report(4, spread < 0.2, f"relative spread {spread:.2e} over gamma in {{2,8,32,128}}")


def test_criterion_5_rank_identification():
    ranks = [r for _, r in _table_cell(0.05, 0.3)]
    hits = sum(r == 5 for r in ranks)
    _report(5, hits >= 8, f"approx rank exactly 5 in {hits}/10 seeds")


def test_criterion_6_solver_agreement():
    ok = True
    gaps = []
    for seed in range(3):
        finals = []
        for solver in (gen_altmin, gen_asd):
            _, _, trace = _solve_cell(solver, TI, 300, 200, 5, 0.05, 0.4, seed)
            finals.append(trace.records[-1].objective)
        gap = abs(finals[0] - finals[1]) / max(abs(finals[0]), abs(finals[1]))
        gaps.append(gap)
        ok &= gap < 0.01
    _report(6, ok, f"final objective gaps {[f'{g:.2e}' for g in gaps]}")


def _find_movielens():
    cand = [os.environ.get("RANKMIN_ML100K", "")]
    cand += [str(Path(p) / "u.data") for p in (".", "data", "data/ml-100k")]
    for c in cand:
        if c and Path(c).is_file():
            return c
    return None


def test_criterion_7_movielens_nmae():
    path = _find_movielens()
    if path is None:
        warnings.warn("MovieLens100k u.data not found; set RANKMIN_ML100K to run criterion 7")
        print("criterion 7: SKIP (MovieLens100k dataset not available)")
        pytest.skip("MovieLens100k dataset not available")
    results = {}
    for spec, name in ((TI, "ti"), (NUC, "nuc")):
        cfg = ExperimentConfig(
            task="ratings", regularizer=spec, solver="gen_asd",
            solver_cfg=SolverConfig(r=10), ratings_path=path,
            scale=MOVIELENS_SCALE, folds=5, seeds=[0],
        )
        res = run_experiment(cfg, write=False)
        results[name] = res.records
    ti_avg = results["ti"][-1]["nmae"]
    nuc_avg = results["nuc"][-1]["nmae"]
    wins = sum(
        a["nmae"] < b["nmae"]
        for a, b in zip(results["ti"][:-1], results["nuc"][:-1])
    )
    ok = abs(ti_avg - 0.1719) <= 0.012 and abs(nuc_avg - 0.1802) <= 0.012 and wins >= 4
    _report(7, ok, f"NMAE ti {ti_avg:.4f}, nuclear {nuc_avg:.4f}, ti wins {wins}/5 folds")


def _random_problem(seed, m=15, n=12, r=2, p=0.5):
    rng = np.random.default_rng(seed)
    fp = FactorPair(rng.standard_normal((m, r)), rng.standard_normal((n, r)))
    keep = rng.random((m, n)) < p
    rows, cols = np.nonzero(keep)
    dense = rng.standard_normal((m, n))
    obs = ObservationSet.from_dense(dense, rows.astype(np.int64), cols.astype(np.int64))
    w = weight_update(TI, fp.gram())
    return fp, obs, w


def _side_objective(fp, w, obs, beta):
    s = residual(fp.p_m, fp.p_n, obs)
    return float(np.sum(fp.gram() * w.mat)) + 0.5 * beta * s.sumsq


def _check_regularizer_invariants():
    specs = [TI, RegularizerSpec("log_det", gamma=0.5),
             RegularizerSpec("schatten_p", gamma=1.0, p=0.5),
             RegularizerSpec("laplace", gamma=1.3)]
    rng = np.random.default_rng(0)
    for spec in specs:
        for _ in range(200):
            x1, x2 = np.sort(rng.uniform(0, 40, size=2))
            lam = rng.uniform(0, 1)
            mid = lam * x1 + (1 - lam) * x2
            if rho(spec, mid) < lam * rho(spec, x1) + (1 - lam) * rho(spec, x2) - 1e-10:
                return False
            if rho(spec, x1) > rho(spec, x2) + 1e-12:
                return False
        for x in np.geomspace(1e-2, 1e2, 15):
            if abs(q_of(spec, rho_prime(spec, x)) - x) > 1e-6 * max(1.0, x):
                return False
    return True


def _check_gradient_fd():
    beta = 2.0
    for seed in range(20):
        fp, obs, w = _random_problem(seed, m=10, n=8, r=2)
        for side in ("left", "right"):
            g = gradient(fp, w, obs, beta, side)
            target = fp.p_m if side == "left" else fp.p_n
            h = 1e-6
            fd = np.zeros_like(target)
            for i in range(target.shape[0]):
                for j in range(target.shape[1]):
                    orig = target[i, j]
                    target[i, j] = orig + h
                    up = _side_objective(fp, w, obs, beta)
                    target[i, j] = orig - h
                    dn = _side_objective(fp, w, obs, beta)
                    target[i, j] = orig
                    fd[i, j] = (up - dn) / (2 * h)
            if not np.allclose(g, fd, rtol=1e-5, atol=1e-5):
                return False
    return True


def _check_frozen_descent():
    for seed in range(5):
        inst = synth_lowrank(40, 30, 2, 0.05, seed)
        rows, cols = sample_mask(40, 30, 0.5, seed)
        obs = ObservationSet.from_dense(inst.m_noisy, rows, cols)
        cfg = SolverConfig(
            r=2, beta_max=5.0, beta0=5.0, beta_growth=1.0,
            gamma0=1.0, gamma_min=1.0, gamma_decay=1.0,
            seed=seed, max_iter=50, tol=1e-14,
        )
        for solver in (gen_altmin, gen_asd):
            _, trace = solver(obs, TI, cfg)
            objs = [rec.objective for rec in trace.records]
            if np.any(np.diff(objs) > 1e-8 * max(1.0, abs(objs[0]))):
                return False
    return True


def _check_subproblem_oracle():
    for seed in range(5):
        fp, obs, w = _random_problem(seed, m=20, n=16, r=3)
        for side, fixed in (("left", fp.p_n), ("right", fp.p_m)):
            got = subproblem_solve(fixed, w, obs, 2.5, side)
            n_out = obs.m if side == "left" else obs.n
            own = obs.rows if side == "left" else obs.cols
            opp = obs.cols if side == "left" else obs.rows
            for i in range(n_out):
                sel = own == i
                p = fixed[opp[sel]]
                a = 2.0 * w.mat + 2.5 * p.T @ p
                want = np.linalg.solve(a, 2.5 * p.T @ obs.vals[sel])
                if not np.allclose(got[i], want, rtol=1e-7, atol=1e-9):
                    return False
    return True


def _check_exact_step_golden():
    beta = 3.0
    for seed in range(5):
        fp, obs, w = _random_problem(seed, m=20, n=16, r=3)
        for side in ("left", "right"):
            d = gradient(fp, w, obs, beta, side)

            def phi(t):
                if side == "left":
                    trial = FactorPair(fp.p_m - t * d, fp.p_n)
                else:
                    trial = FactorPair(fp.p_m, fp.p_n - t * d)
                return _side_objective(trial, w, obs, beta)

            t_star = exact_step(fp, d, w, obs, beta, side)
            res = minimize_scalar(phi, bracket=(0.0, 2 * t_star), method="golden",
                                  options={"xtol": 1e-14})
            if abs(t_star - res.x) > 1e-8 * max(1.0, abs(t_star)):
                return False
    return True


def _check_weight_spectrum_every_iteration():
    spectra = []
    original = smalldense.weight_update

    def recording(spec, gram):
        w = original(spec, gram)
        spectra.append((np.linalg.eigvalsh(w.mat), kappa(spec)))
        return w

    solvers.sd.weight_update = recording
    try:
        inst = synth_lowrank(40, 30, 2, 0.05, 0)
        rows, cols = sample_mask(40, 30, 0.5, 0)
        obs = ObservationSet.from_dense(inst.m_noisy, rows, cols)
        gen_asd(obs, TI, SolverConfig(r=2, max_iter=40, seed=0))
    finally:
        solvers.sd.weight_update = original
    if not spectra:
        return False
    return all(lam.min() >= -1e-12 and lam.max() <= k + 1e-12 for lam, k in spectra)


def _check_adjoint_identity():
    rng = np.random.default_rng(1)
    for seed in range(10):
        fp, obs, _ = _random_problem(seed, m=25, n=20, r=3)
        s_vals = rng.standard_normal(len(obs))
        s = SparseResidual(obs=obs, vals=s_vals, sumsq=0.0)
        lhs = float(observed_product(fp.p_m, fp.p_n, obs) @ s_vals)
        rhs_l = float(np.sum(fp.p_m * adjoint_apply(s, fp.p_n, "left")))
        rhs_r = float(np.sum(fp.p_n * adjoint_apply(s, fp.p_m, "right")))
        if abs(lhs - rhs_l) > 1e-10 * max(1.0, abs(lhs)):
            return False
        if abs(lhs - rhs_r) > 1e-10 * max(1.0, abs(lhs)):
            return False
    return True


def test_criterion_8_property_suites():
    checks = {
        "regularizer invariants": _check_regularizer_invariants(),
        "gradient vs finite differences": _check_gradient_fd(),
        "frozen-schedule descent": _check_frozen_descent(),
        "subproblem vs dense oracle": _check_subproblem_oracle(),
        "exact step vs golden section": _check_exact_step_golden(),
        "W spectrum in [0, kappa]": _check_weight_spectrum_every_iteration(),
        "adjoint identity": _check_adjoint_identity(),
    }
    failed = [name for name, ok in checks.items() if not ok]
    _report(8, not failed, "all property suites" if not failed else f"failed: {failed}")


def _asd_seconds_per_iteration(obs, iters=25, repeats=3):
    cfg = SolverConfig(r=5, seed=0, max_iter=iters, tol=1e-16)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        gen_asd(obs, TI, cfg)
        best = min(best, (time.perf_counter() - t0) / iters)
    return best


def test_criterion_9_complexity_smoke():
    m, n = 500, 400
    inst = synth_lowrank(m, n, 5, 0.05, 0)
    obs_sets = []
    for p in (0.3, 0.6):
        rows, cols = sample_mask(m, n, p, 0)
        obs_sets.append(ObservationSet.from_dense(inst.m_noisy, rows, cols))
    t_small = _asd_seconds_per_iteration(obs_sets[0])
    t_big = _asd_seconds_per_iteration(obs_sets[1])
    ratio = t_big / t_small
    _report(
        9, ratio <= 2.5,
        f"doubling |omega| ({len(obs_sets[0])} -> {len(obs_sets[1])}) costs "
        f"{ratio:.2f}x per iteration",
    )
