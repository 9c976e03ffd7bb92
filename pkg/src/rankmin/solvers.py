"""Factored solvers for rank minimization with concave spectral penalties.

Two solvers over the factors (P_m, P_n) with X = P_m P_n^T:

* gen_altmin: exact alternating minimization; each factor subproblem
  decouples by row into r x r positive definite solves.
* gen_asd: alternating steepest descent with exact (closed form) step
  sizes; one gradient step per factor per iteration.

Both reweight W from the Gram matrix P_m^T P_m + P_n^T P_n after the
factor updates, then grow beta and shrink gamma toward their clamps.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import regularizers as reg
from . import smalldense as sd
from . import sparse_ops as sp
from .regularizers import RegularizerSpec
from .smalldense import WeightMatrix
from .sparse_ops import ObservationSet


class DegenerateDirectionError(ValueError):
    pass


class SingularWeightError(ValueError):
    pass


@dataclass
class FactorPair:
    p_m: np.ndarray  # m x r
    p_n: np.ndarray  # n x r

    def __post_init__(self):
        if self.p_m.shape[1] != self.p_n.shape[1]:
            raise ValueError("factor column counts differ")
        if not (np.isfinite(self.p_m).all() and np.isfinite(self.p_n).all()):
            raise ValueError("factors contain non-finite entries")

    @property
    def r(self) -> int:
        return self.p_m.shape[1]

    def gram(self) -> np.ndarray:
        return self.p_m.T @ self.p_m + self.p_n.T @ self.p_n


@dataclass
class SolverConfig:
    r: int
    beta_max: float = 1.0
    beta0: float | None = None  # defaults to beta_max / 50
    beta_growth: float = 1.2
    gamma0: float | str = "auto"
    gamma_min: float | None = None  # defaults to gamma0 / 16
    gamma_decay: float = 0.8
    tol: float = 1e-5
    max_iter: int = 500
    seed: int = 0
    w_update: str = "exact"  # "exact" | "prox_linear"
    init: str = "gaussian"  # "gaussian" | "uniform"

    def __post_init__(self):
        if self.r < 1:
            raise ValueError("rank bound r must be >= 1")
        if self.beta_max <= 0 or self.tol <= 0:
            raise ValueError("beta_max and tol must be positive")
        if self.beta_growth < 1 or not 0 < self.gamma_decay <= 1:
            raise ValueError("need beta_growth >= 1 and gamma_decay in (0, 1]")
        if self.w_update not in ("exact", "prox_linear"):
            raise ValueError(f"unknown w_update {self.w_update!r}")
        if self.init not in ("gaussian", "uniform"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.beta0 is not None and self.beta0 > self.beta_max:
            raise ValueError("beta0 must not exceed beta_max")

    def resolved_beta0(self) -> float:
        return self.beta_max / 50.0 if self.beta0 is None else self.beta0

    def resolved_gamma(self, obs: ObservationSet) -> tuple[float, float]:
        if self.gamma0 == "auto":
            p = len(obs) / (obs.m * obs.n)
            g0 = gamma_heuristic(obs, self.r, p)
        else:
            g0 = float(self.gamma0)
        g_min = g0 / 16.0 if self.gamma_min is None else self.gamma_min
        if g_min > g0:
            raise ValueError("gamma_min must not exceed gamma0")
        return g0, g_min


@dataclass
class TraceRecord:
    iteration: int
    objective: float
    residual_sumsq: float
    beta: float
    gamma: float
    seconds: float


@dataclass
class SolveTrace:
    records: list[TraceRecord] = field(default_factory=list)
    termination: str = "max_iter"


def gamma_heuristic(obs: ObservationSet, r_guess: int, p: float) -> float:
    """Scale estimate ||P_omega(M)||_F / (2 sqrt(r p))."""
    if len(obs) == 0:
        raise ValueError("cannot estimate gamma from an empty observation set")
    if r_guess < 1 or not 0 < p <= 1:
        raise ValueError("need r_guess >= 1 and p in (0, 1]")
    return sp.frobenius_norm_observed(obs) / (2.0 * np.sqrt(r_guess * p))


def schedule_update(beta: float, gamma: float, cfg: SolverConfig) -> tuple[float, float]:
    """Grow beta toward beta_max, shrink gamma toward gamma_min."""
    new_beta = min(cfg.beta_growth * beta, cfg.beta_max)
    floor = cfg.gamma_min if cfg.gamma_min is not None else 0.0
    new_gamma = max(cfg.gamma_decay * gamma, floor)
    return new_beta, new_gamma


def initialize(m: int, n: int, r: int, seed: int, init: str = "gaussian") -> FactorPair:
    """Random starting factors; entries N(0, 1/r) so E||row||^2 = 1.

    init="uniform" restores entries drawn uniformly from [0, 1).
    """
    if r < 1:
        raise ValueError("r must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0,)))
    if init == "uniform":
        p_m = rng.random((m, r))
        p_n = rng.random((n, r))
    else:
        scale = 1.0 / np.sqrt(r)
        p_m = scale * rng.standard_normal((m, r))
        p_n = scale * rng.standard_normal((n, r))
    return FactorPair(p_m=p_m, p_n=p_n)


def gradient(
    fp: FactorPair, w: WeightMatrix, obs: ObservationSet, beta: float, side: str
) -> np.ndarray:
    """2 P W + beta A*(residual) applied to the opposite factor."""
    res = sp.residual(fp.p_m, fp.p_n, obs)
    return _gradient_with_residual(fp, w, res, beta, side)


def _gradient_with_residual(fp, w, res, beta, side):
    if side == "left":
        return 2.0 * fp.p_m @ w.mat + beta * sp.adjoint_apply(res, fp.p_n, "left")
    if side == "right":
        return 2.0 * fp.p_n @ w.mat + beta * sp.adjoint_apply(res, fp.p_m, "right")
    raise ValueError(f"side must be 'left' or 'right', got {side!r}")


def exact_step(
    fp: FactorPair,
    d: np.ndarray,
    w: WeightMatrix,
    obs: ObservationSet,
    beta: float,
    side: str,
) -> float:
    """Exact minimizer of t -> F(P - t d) for the given factor.

    The side objective is quadratic in t, so the step is closed form.
    """
    if side == "left":
        a_d = sp.observed_product(d, fp.p_n, obs)
        p = fp.p_m
    elif side == "right":
        a_d = sp.observed_product(fp.p_m, d, obs)
        p = fp.p_n
    else:
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    res = sp.residual(fp.p_m, fp.p_n, obs)
    num = beta * float(a_d @ res.vals) + 2.0 * float(np.sum((p.T @ d) * w.mat))
    den = beta * float(a_d @ a_d) + 2.0 * float(np.sum((d.T @ d) * w.mat))
    if den <= 0:
        raise DegenerateDirectionError("degenerate direction: zero curvature along d")
    return num / den


def _row_subproblem_solve(fixed, w, obs, beta, side, rows, cols):
    """Row-decoupled exact solves (2W + beta sum p_j p_j^T) u = beta sum v p_j."""
    r = fixed.shape[1]
    if side == "left":
        n_out, own, opp = obs.m, rows, cols
        vals = obs.vals
    else:
        perm = obs.col_perm
        n_out, own, opp = obs.n, cols[perm], rows[perm]
        vals = obs.vals[perm]
    p = fixed[opp]  # nnz x r, rows of the fixed factor per observation
    weighted = vals[:, None] * p
    # Per-row segment sums via cumulative sums (deterministic order).
    boundaries = np.searchsorted(own, np.arange(n_out + 1))
    csum_b = np.concatenate([np.zeros((1, r)), np.cumsum(weighted, axis=0)])
    rhs = beta * (csum_b[boundaries[1:]] - csum_b[boundaries[:-1]])
    outer = (p[:, :, None] * p[:, None, :]).reshape(len(p), r * r)
    csum_a = np.concatenate([np.zeros((1, r * r)), np.cumsum(outer, axis=0)])
    seg = (csum_a[boundaries[1:]] - csum_a[boundaries[:-1]]).reshape(n_out, r, r)
    systems = 2.0 * w.mat[None, :, :] + beta * seg
    return np.linalg.solve(systems, rhs[:, :, None])[:, :, 0]


def subproblem_solve(
    fixed: np.ndarray, w: WeightMatrix, obs: ObservationSet, beta: float, side: str
) -> np.ndarray:
    """Exact argmin of one factor with the other factor held fixed."""
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    if w.min_eig() <= 1e-14 * max(1.0, float(np.abs(w.mat).max())):
        raise SingularWeightError(
            "weight matrix is singular; use a strictly concave regularizer "
            "(e.g. trace_inverse) so W stays positive definite"
        )
    expected = obs.n if side == "left" else obs.m
    if fixed.shape[0] != expected:
        raise sp.ShapeMismatchError("fixed factor shape does not match observations")
    return _row_subproblem_solve(fixed, w, obs, beta, side, obs.rows, obs.cols)


def _validate_spec_for(solver: str, spec: RegularizerSpec, cfg: SolverConfig) -> None:
    if cfg.w_update == "exact":
        if solver == "altmin" and not (spec.strictly_concave and spec.differentiable):
            if spec.kind != "nuclear":
                raise ValueError(
                    f"{spec.kind} is not strictly concave and differentiable; "
                    "gen_altmin with the exact W update requires it "
                    "(or use w_update='prox_linear')"
                )
        if solver == "asd" and not spec.differentiable and spec.kind != "nuclear":
            raise ValueError(
                f"{spec.kind} is not differentiable; gen_asd with the exact "
                "W update requires it (or use w_update='prox_linear')"
            )


def _schedules_clamped(beta, gamma, beta_max, gamma_min):
    return beta >= beta_max * (1 - 1e-12) and gamma <= gamma_min * (1 + 1e-12)


def _update_weight(spec, gamma, gram, w_prev, w_prev2, cfg, kappa):
    cur = spec.with_gamma(gamma) if spec.kind != "nuclear" else spec
    if cfg.w_update == "exact":
        return sd.weight_update(cur, gram), cur
    lam_max = float(np.linalg.eigvalsh(gram)[-1])
    w_new = sd.prox_linear_weight_update(
        w_prev, w_prev2, gram, gamma, l=max(1.0, lam_max + gamma), omega=0.0,
        kappa=kappa, descent_sign=True,
    )
    return w_new, cur


def _solve(solver: str, obs: ObservationSet, spec: RegularizerSpec, cfg: SolverConfig):
    _validate_spec_for(solver, spec, cfg)
    if spec.kind != "nuclear":
        gamma, gamma_min = cfg.resolved_gamma(obs)
    else:
        gamma, gamma_min = spec.gamma, spec.gamma
    beta = cfg.resolved_beta0()
    cfg = replace(cfg, gamma_min=gamma_min)

    fp = initialize(obs.m, obs.n, cfg.r, cfg.seed, cfg.init)
    w = WeightMatrix.identity(cfg.r)
    w_prev = w
    trace = SolveTrace()
    prev_obj = None
    prev_pm, prev_pn = fp.p_m, fp.p_n
    t0 = time.perf_counter()

    for it in range(1, cfg.max_iter + 1):
        if solver == "altmin":
            p_m = subproblem_solve(fp.p_n, w, obs, beta, "left")
            fp = FactorPair(p_m, fp.p_n)
            p_n = subproblem_solve(fp.p_m, w, obs, beta, "right")
            fp = FactorPair(fp.p_m, p_n)
        else:
            res = sp.residual(fp.p_m, fp.p_n, obs)
            d_m = _gradient_with_residual(fp, w, res, beta, "left")
            if np.any(d_m):
                t_m = exact_step(fp, d_m, w, obs, beta, "left")
                fp = FactorPair(fp.p_m - t_m * d_m, fp.p_n)
            res = sp.residual(fp.p_m, fp.p_n, obs)
            d_n = _gradient_with_residual(fp, w, res, beta, "right")
            if np.any(d_n):
                t_n = exact_step(fp, d_n, w, obs, beta, "right")
                fp = FactorPair(fp.p_m, fp.p_n - t_n * d_n)

        gram = fp.gram()
        cur_spec = spec.with_gamma(gamma) if spec.kind != "nuclear" else spec
        kap = reg.kappa(cur_spec)
        w_new, cur_spec = _update_weight(spec, gamma, gram, w, w_prev, cfg, kap)
        w_prev, w = w, w_new

        res = sp.residual(fp.p_m, fp.p_n, obs)
        lam = np.maximum(np.linalg.eigvalsh(gram)[::-1], 0.0)
        obj = reg.surrogate_objective(cur_spec, lam, res.sumsq, beta)
        trace.records.append(
            TraceRecord(it, obj, res.sumsq, beta, gamma, time.perf_counter() - t0)
        )

        clamped = _schedules_clamped(beta, gamma, cfg.beta_max, gamma_min)
        if clamped and prev_obj is not None:
            obj_change = abs(obj - prev_obj) / max(1.0, abs(prev_obj))
            fac_change = (
                np.linalg.norm(fp.p_m - prev_pm) + np.linalg.norm(fp.p_n - prev_pn)
            ) / max(1.0, np.linalg.norm(fp.p_m) + np.linalg.norm(fp.p_n))
            if obj_change < cfg.tol and fac_change < cfg.tol:
                trace.termination = "converged"
                break
        prev_obj = obj if clamped else None
        prev_pm, prev_pn = fp.p_m, fp.p_n
        beta, gamma = (
            min(cfg.beta_growth * beta, cfg.beta_max),
            max(cfg.gamma_decay * gamma, gamma_min),
        )
    return fp, trace


def gen_altmin(obs: ObservationSet, spec: RegularizerSpec, cfg: SolverConfig):
    """Alternating exact subproblem solves with iterative reweighting."""
    return _solve("altmin", obs, spec, cfg)


def gen_asd(obs: ObservationSet, spec: RegularizerSpec, cfg: SolverConfig):
    """Alternating steepest descent with exact step sizes and reweighting."""
    return _solve("asd", obs, spec, cfg)
