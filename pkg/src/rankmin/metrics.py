"""Reconstruction metrics: relative Frobenius error, NMAE, approximate rank."""

from __future__ import annotations

import numpy as np

from .data_io import RatingsScale
from .solvers import FactorPair
from .sparse_ops import ObservationSet, observed_product

RANK_THRESHOLD = 0.001


def rfne(fp: FactorPair, m_true: np.ndarray, block: int = 256) -> float:
    """||P_m P_n^T - M||_F / ||M||_F, computed in row blocks."""
    if fp.p_m.shape[0] != m_true.shape[0] or fp.p_n.shape[0] != m_true.shape[1]:
        raise ValueError("factor shapes do not match the reference matrix")
    denom = np.linalg.norm(m_true)
    if denom == 0:
        raise ValueError("reference matrix is zero; RFNE undefined")
    err_sq = 0.0
    for start in range(0, m_true.shape[0], block):
        chunk = fp.p_m[start : start + block] @ fp.p_n.T - m_true[start : start + block]
        err_sq += float(np.sum(chunk * chunk))
    return float(np.sqrt(err_sq) / denom)


def nmae(fp: FactorPair, test: ObservationSet, scale: RatingsScale) -> float:
    """Mean |y - y_hat| / (y_max - y_min); predictions clipped to the scale."""
    if len(test) == 0:
        raise ValueError("empty test set")
    pred = observed_product(fp.p_m, fp.p_n, test)
    pred = np.clip(pred, scale.y_min, scale.y_max)
    return float(np.mean(np.abs(test.vals - pred)) / (scale.y_max - scale.y_min))


def approx_rank(singular_values, tau: float = RANK_THRESHOLD, relative: bool = False) -> int:
    """Count of singular values above tau (or tau * largest if relative)."""
    sv = np.asarray(singular_values, dtype=np.float64)
    if sv.size == 0:
        return 0
    cut = tau * sv[0] if relative else tau
    return int(np.sum(sv > cut))
