"""Concave spectral penalties and their supergradients.

Each penalty is a concave, nondecreasing function ``rho`` on [0, inf) with
``rho(0) = 0`` and a finite largest slope ``kappa``.  Applied to the
eigenvalues of a Gram matrix it acts as a smooth surrogate for the rank.
The conjugate machinery (``q_of``, ``g_of``) inverts the slope map and is
used mainly for property testing and the weight-matrix optimality checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.integrate import quad

KINDS = (
    "nuclear",
    "trace_inverse",
    "capped_l1",
    "log_det",
    "schatten_p",
    "scad",
    "laplace",
)

# Kinds with a continuous, strictly decreasing derivative on [0, inf).
DIFFERENTIABLE = ("trace_inverse", "log_det", "schatten_p", "laplace")
STRICTLY_CONCAVE = ("trace_inverse", "log_det", "schatten_p", "laplace")


@dataclass(frozen=True)
class RegularizerSpec:
    """Which penalty to use and its parameters.

    gamma is the scale parameter of every kind (ignored by nuclear),
    alpha > 1 applies to scad only, p in (0, 2] to schatten_p only.
    """

    kind: str
    gamma: float = 1.0
    alpha: float = 3.7
    p: float = 0.5

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown regularizer kind {self.kind!r}")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.kind == "scad" and not self.alpha > 1:
            raise ValueError("scad requires alpha > 1")
        if self.kind == "schatten_p" and not 0 < self.p <= 2:
            raise ValueError("schatten_p requires 0 < p <= 2")

    def with_gamma(self, gamma: float) -> "RegularizerSpec":
        return RegularizerSpec(self.kind, gamma, self.alpha, self.p)

    @property
    def differentiable(self) -> bool:
        if self.kind == "schatten_p" and self.p == 2:
            return False  # linear, slope map not invertible
        return self.kind in DIFFERENTIABLE

    @property
    def strictly_concave(self) -> bool:
        if self.kind == "schatten_p" and self.p == 2:
            return False
        return self.kind in STRICTLY_CONCAVE


def _check_nonneg(x: float) -> None:
    if x < 0:
        raise ValueError(f"argument must be nonnegative, got {x}")


def rho(spec: RegularizerSpec, x: float) -> float:
    """Penalty value at x >= 0.  Shifted so rho(0) = 0 for every kind."""
    _check_nonneg(x)
    g = spec.gamma
    if spec.kind == "nuclear":
        return x
    if spec.kind == "trace_inverse":
        return 1.0 - g / (g + x)
    if spec.kind == "capped_l1":
        return min(g * x, 1.0)
    if spec.kind == "log_det":
        return math.log(x + g) - math.log(g)
    if spec.kind == "schatten_p":
        h = spec.p / 2.0
        return (x + g) ** h - g**h
    if spec.kind == "scad":
        a = spec.alpha
        if x <= g:
            return g * x
        if x <= a * g:
            return (-x * x + 2 * g * a * x - g * g) / (2 * (a - 1))
        return g * g * (a + 1) / 2
    # laplace
    return 1.0 - math.exp(-g * x)


def rho_prime(spec: RegularizerSpec, x: float) -> float:
    """A representative supergradient of rho at x >= 0.

    At the capped-l1 kink (x = 1/gamma) the lower extreme 0 is returned so
    repeated weight updates are idempotent.
    """
    _check_nonneg(x)
    g = spec.gamma
    if spec.kind == "nuclear":
        return 1.0
    if spec.kind == "trace_inverse":
        return g / (g + x) ** 2
    if spec.kind == "capped_l1":
        return g if x < 1.0 / g else 0.0
    if spec.kind == "log_det":
        return 1.0 / (x + g)
    if spec.kind == "schatten_p":
        h = spec.p / 2.0
        return h * (x + g) ** (h - 1.0)
    if spec.kind == "scad":
        a = spec.alpha
        if x <= g:
            return g
        if x <= a * g:
            return (a * g - x) / (a - 1)
        return 0.0
    return g * math.exp(-g * x)


def kappa(spec: RegularizerSpec) -> float:
    """Largest slope, sup of the supergradients at 0."""
    g = spec.gamma
    if spec.kind == "nuclear":
        return 1.0
    if spec.kind in ("trace_inverse", "log_det"):
        return 1.0 / g
    if spec.kind == "schatten_p":
        h = spec.p / 2.0
        return h * g ** (h - 1.0)
    # capped_l1, scad, laplace
    return g


def _slope_infimum(spec: RegularizerSpec) -> tuple[float, bool]:
    """(infimum slope, whether the infimum is attained at finite x)."""
    if spec.kind == "nuclear":
        return 1.0, True
    if spec.kind == "schatten_p" and spec.p == 2:
        return 1.0, True
    if spec.kind in ("capped_l1", "scad"):
        return 0.0, True
    # trace_inverse, log_det, schatten_p (p<2), laplace: slope -> 0, never 0
    return 0.0, False


def q_of(spec: RegularizerSpec, t: float) -> float:
    """Inverse of the slope map: smallest x whose supergradients contain t."""
    lo, attained = _slope_infimum(spec)
    if t < lo or (t == lo and not attained):
        raise ValueError(f"slope {t} below the infimum slope of {spec.kind}")
    if t >= kappa(spec):
        return 0.0
    g = spec.gamma
    if spec.kind == "trace_inverse":
        return math.sqrt(g / t) - g
    if spec.kind == "capped_l1":
        return 1.0 / g
    if spec.kind == "log_det":
        return 1.0 / t - g
    if spec.kind == "schatten_p":
        h = spec.p / 2.0
        return (t / h) ** (1.0 / (h - 1.0)) - g
    if spec.kind == "scad":
        a = spec.alpha
        return a * g - (a - 1) * t
    if spec.kind == "laplace":
        return -math.log(t / g) / g
    # nuclear / schatten p=2: only slope 1 exists, handled by t >= kappa
    raise AssertionError("unreachable")


def invert_slope(rho_prime_fn, t: float, kappa_val: float, hi: float = 1.0) -> float:
    """Generic q(t) by bisection on a nonincreasing slope function.

    Finds the smallest x with rho_prime_fn(x) <= t.  Used for penalties
    without a closed-form inverse (e.g. test-only piecewise examples).
    """
    if t >= kappa_val and rho_prime_fn(0.0) <= t:
        return 0.0
    while rho_prime_fn(hi) > t:
        hi *= 2.0
        if hi > 1e16:
            raise ValueError(f"slope {t} is never reached")
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if rho_prime_fn(mid) > t:
            lo = mid
        else:
            hi = mid
    return hi


def g_of(spec: RegularizerSpec, w: float) -> float:
    """Convex conjugate-style integral g(w) = int_w^kappa q(t) dt.

    Computed by adaptive quadrature of q_of; w must lie in (0, kappa].
    """
    k = kappa(spec)
    if not 0 < w <= k:
        raise ValueError(f"w must lie in (0, {k}], got {w}")
    if w == k:
        return 0.0
    val, _ = quad(lambda t: q_of(spec, t), w, k, limit=200)
    return val


def surrogate_objective(
    spec: RegularizerSpec,
    gram_eigenvalues,
    residual_sumsq: float,
    beta: float,
) -> float:
    """Sum of rho over the Gram eigenvalues plus (beta/2) * residual_sumsq."""
    return sum(rho(spec, lam) for lam in gram_eigenvalues) + 0.5 * beta * residual_sumsq
