"""Synthetic instance generation, ratings ingestion, masks, k-fold splits.

All randomness flows through numpy's PCG64 generator, with one substream
per purpose (factors, noise, mask, folds) derived from a single seed so
experiments reproduce bit-for-bit across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .sparse_ops import ObservationSet

# Substream ids; initialize() in solvers uses 0.
_FACTORS, _NOISE, _MASK, _FOLDS = 1, 2, 3, 4


def _rng(seed: int, purpose: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(purpose,)))


@dataclass
class SyntheticInstance:
    m_true: np.ndarray  # exact rank r_true
    m_noisy: np.ndarray
    m: int
    n: int
    r_true: int
    d: float
    seed: int


@dataclass(frozen=True)
class RatingsScale:
    y_min: float
    y_max: float

    def __post_init__(self):
        if not self.y_min < self.y_max:
            raise ValueError("y_min must be less than y_max")


MOVIELENS_SCALE = RatingsScale(1.0, 5.0)
JESTER_SCALE = RatingsScale(-10.0, 10.0)


def synth_lowrank(m: int, n: int, r_true: int, d: float, seed: int) -> SyntheticInstance:
    """Gaussian factor product of rank r_true plus d-scaled Gaussian noise."""
    if r_true > min(m, n):
        raise ValueError(f"r_true={r_true} exceeds min(m, n)={min(m, n)}")
    rng = _rng(seed, _FACTORS)
    m_true = rng.standard_normal((m, r_true)) @ rng.standard_normal((r_true, n))
    noise = d * _rng(seed, _NOISE).standard_normal((m, n)) if d else np.zeros((m, n))
    return SyntheticInstance(m_true, m_true + noise, m, n, r_true, d, seed)


def sample_mask(m: int, n: int, p: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Bernoulli-p index sample: (rows, cols) in row-major order."""
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    keep = _rng(seed, _MASK).random((m, n)) < p
    rows, cols = np.nonzero(keep)
    return rows.astype(np.int64), cols.astype(np.int64)


def load_ratings(path, fmt: str, scale: RatingsScale) -> ObservationSet:
    """Parse a `user sep item sep rating [sep timestamp]` ratings file.

    fmt is "tab" or "comma".  1-based ids are remapped to dense 0-based
    indices in first-seen order.
    """
    if fmt not in ("tab", "comma"):
        raise ValueError(f"format must be 'tab' or 'comma', got {fmt!r}")
    sep = "\t" if fmt == "tab" else ","
    users: dict[str, int] = {}
    items: dict[str, int] = {}
    rows, cols, vals = [], [], []
    with open(Path(path)) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(sep)
            if len(parts) not in (3, 4):
                raise ValueError(f"{path}:{lineno}: expected 3 or 4 fields, got {len(parts)}")
            try:
                rating = float(parts[2])
            except ValueError as e:
                raise ValueError(f"{path}:{lineno}: bad rating {parts[2]!r}") from e
            if not scale.y_min <= rating <= scale.y_max:
                raise ValueError(
                    f"{path}:{lineno}: rating {rating} outside "
                    f"[{scale.y_min}, {scale.y_max}]"
                )
            rows.append(users.setdefault(parts[0], len(users)))
            cols.append(items.setdefault(parts[1], len(items)))
            vals.append(rating)
    if not rows:
        raise ValueError(f"{path}: no ratings found")
    return ObservationSet.from_entries(len(users), len(items), rows, cols, vals)


def kfold_split(obs: ObservationSet, k: int, seed: int) -> list[tuple[ObservationSet, ObservationSet]]:
    """Random k-way partition of the entries; fold i gives (rest, fold i)."""
    nnz = len(obs)
    if k < 2 or nnz < k:
        raise ValueError(f"need 2 <= k <= |entries|, got k={k}, entries={nnz}")
    perm = _rng(seed, _FOLDS).permutation(nnz)
    fold_ids = np.empty(nnz, dtype=np.int64)
    for i, chunk in enumerate(np.array_split(perm, k)):
        fold_ids[chunk] = i
    pairs = []
    for i in range(k):
        test = fold_ids == i
        train = ~test
        pairs.append(
            (
                ObservationSet.from_entries(
                    obs.m, obs.n, obs.rows[train], obs.cols[train], obs.vals[train]
                ),
                ObservationSet.from_entries(
                    obs.m, obs.n, obs.rows[test], obs.cols[test], obs.vals[test]
                ),
            )
        )
    return pairs
