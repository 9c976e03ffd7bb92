"""Dense linear algebra on r x r and tall-thin matrices.

The weight matrix and Gram matrix are tiny (r is at most a few hundred),
so everything here defers to LAPACK via numpy/scipy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import regularizers as reg
from .regularizers import RegularizerSpec

SYMMETRY_RTOL = 1e-12


class NotSymmetricError(ValueError):
    pass


class NotSPDError(ValueError):
    pass


@dataclass
class WeightMatrix:
    """Symmetric r x r reweighting matrix with spectrum in [0, kappa]."""

    mat: np.ndarray
    eigvals: np.ndarray | None = None  # descending, cached when available
    eigvecs: np.ndarray | None = None

    @property
    def r(self) -> int:
        return self.mat.shape[0]

    @classmethod
    def identity(cls, r: int) -> "WeightMatrix":
        return cls(np.eye(r), eigvals=np.ones(r), eigvecs=np.eye(r))

    def min_eig(self) -> float:
        if self.eigvals is not None:
            return float(self.eigvals[-1])
        return float(np.linalg.eigvalsh(self.mat)[0])


def _require_symmetric(a: np.ndarray) -> np.ndarray:
    scale = np.abs(a).max() if a.size else 0.0
    if scale and np.abs(a - a.T).max() > 1e-8 * scale:
        raise NotSymmetricError("matrix is not symmetric within tolerance")
    return 0.5 * (a + a.T)


def sym_eig(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix, eigenvalues descending."""
    g = _require_symmetric(np.asarray(g, dtype=np.float64))
    lam, v = np.linalg.eigh(g)
    return v[:, ::-1], lam[::-1]


def weight_update(spec: RegularizerSpec, gram: np.ndarray) -> WeightMatrix:
    """W = V diag(rho'(lambda)) V^T for the Gram eigenpairs (V, lambda).

    Negative eigenvalues from roundoff are clamped to 0 before applying
    the supergradient.
    """
    v, lam = sym_eig(gram)
    lam = np.maximum(lam, 0.0)
    w_eigs = np.array([reg.rho_prime(spec, x) for x in lam])
    mat = (v * w_eigs) @ v.T
    mat = 0.5 * (mat + mat.T)
    order = np.argsort(w_eigs)[::-1]
    return WeightMatrix(mat, eigvals=w_eigs[order], eigvecs=v[:, order])


def spd_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve a @ x = b for symmetric positive definite a."""
    try:
        c, low = scipy.linalg.cho_factor(a)
    except np.linalg.LinAlgError as e:
        raise NotSPDError(f"matrix is not positive definite: {e}") from e
    except scipy.linalg.LinAlgError as e:  # pragma: no cover - alias in scipy
        raise NotSPDError(f"matrix is not positive definite: {e}") from e
    return scipy.linalg.cho_solve((c, low), b)


def factored_singular_values(p_m: np.ndarray, p_n: np.ndarray) -> np.ndarray:
    """Singular values of P_m P_n^T without forming the m x n product.

    Thin QR of each factor reduces the problem to an r x r SVD.
    """
    if p_m.shape[1] != p_n.shape[1]:
        raise ValueError("factor column counts differ")
    r_m = np.linalg.qr(p_m, mode="r")
    r_n = np.linalg.qr(p_n, mode="r")
    return np.linalg.svd(r_m @ r_n.T, compute_uv=False)


def box_project(w: np.ndarray, kappa: float) -> WeightMatrix:
    """Nearest (Frobenius) symmetric matrix with spectrum in [0, kappa]."""
    v, lam = sym_eig(w)
    clamped = np.clip(lam, 0.0, kappa)
    mat = (v * clamped) @ v.T
    return WeightMatrix(0.5 * (mat + mat.T), eigvals=clamped, eigvecs=v)


def prox_linear_weight_update(
    w_k: WeightMatrix,
    w_km1: WeightMatrix,
    gram: np.ndarray,
    gamma: float,
    l: float,
    omega: float,
    kappa: float,
    descent_sign: bool = False,
) -> WeightMatrix:
    """Extrapolated linearized weight step, projected onto the spectral box.

    The published step adds (1/l)(Gram + gamma I); descent_sign=True flips
    it to the descending direction, which is what the solvers use for the
    capped-l1 penalty.
    """
    if not l > 0:
        raise ValueError("l must be positive")
    if omega < 0:
        raise ValueError("omega must be nonnegative")
    step = (gram + gamma * np.eye(gram.shape[0])) / l
    if descent_sign:
        step = -step
    cand = w_k.mat + step + omega * (w_k.mat - w_km1.mat)
    return box_project(cand, kappa)
