"""SMOTE oversampling of the minority class."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import DatasetError, LabeledDataset


@dataclass(frozen=True)
class SmoteConfig:
    k_neighbors: int = 5
    target_ratio: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")
        if not 0 < self.target_ratio <= 1:
            raise ValueError("target_ratio must lie in (0, 1]")


@dataclass(frozen=True, eq=False)
class SmoteResult:
    dataset: LabeledDataset
    # indices into the input dataset of (base row, neighbour row) per synthetic row
    parents: np.ndarray
    gaps: np.ndarray


def k_nearest(P: np.ndarray, queries: np.ndarray, k: int, chunk: int = 512) -> np.ndarray:
    """Indices (into ``P``) of the ``k`` nearest other points for each query row index.

    Ties are broken by lower index.
    """
    out = np.empty((len(queries), k), dtype=np.intp)
    sq = np.einsum("ij,ij->i", P, P)
    for s in range(0, len(queries), chunk):
        q = queries[s:s + chunk]
        d = sq[q][:, None] + sq[None, :] - 2.0 * (P[q] @ P.T)
        d[np.arange(len(q)), q] = np.inf
        # stable sort keeps equal distances in index order
        out[s:s + chunk] = np.argsort(d, axis=1, kind="stable")[:, :k]
    return out


def smote_detailed(train: LabeledDataset, cfg: SmoteConfig, snap_columns=(),
                   scale: np.ndarray | None = None) -> SmoteResult:
    """SMOTE with parent bookkeeping.

    ``snap_columns`` (e.g. one-hot blocks or category codes) are copied from
    the base row instead of interpolated. ``scale`` divides coordinates before
    the neighbour search, so raw-unit data can be searched in range-normalised
    space.
    """
    n_benign, n_attack = train.class_counts()
    if n_benign == 0 or n_attack == 0:
        raise DatasetError("SMOTE needs both classes present")
    minority = 1 if n_attack < n_benign else 0
    n_min, n_maj = min(n_benign, n_attack), max(n_benign, n_attack)
    target = int(round(cfg.target_ratio * n_maj))
    n_new = target - n_min
    if n_new <= 0:
        return SmoteResult(train, np.zeros((0, 2), dtype=np.intp), np.zeros(0))
    if n_min < cfg.k_neighbors + 1:
        raise DatasetError(f"minority class has {n_min} rows; need more than k={cfg.k_neighbors}")

    idx = np.flatnonzero(train.labels == minority)
    X = train.features
    P = X[idx]
    if scale is not None:
        P = P / np.asarray(scale, dtype=np.float64)
    rng = np.random.default_rng(cfg.seed)
    base = rng.integers(0, n_min, size=n_new)
    pick = rng.integers(0, cfg.k_neighbors, size=n_new)
    gaps = rng.random(n_new)
    uniq, inv = np.unique(base, return_inverse=True)
    nn = k_nearest(P, uniq, cfg.k_neighbors)
    nb = nn[inv, pick]

    Xa, Xb = X[idx[base]], X[idx[nb]]
    S = Xa + gaps[:, None] * (Xb - Xa)
    snap = np.asarray(list(snap_columns), dtype=np.intp)
    if snap.size:
        S[:, snap] = Xa[:, snap]
    syn = LabeledDataset(S, np.full(n_new, minority), train.schema_id, train.feature_names,
                         np.full(n_new, "synthetic", dtype=object), train.categories)
    parents = np.column_stack([idx[base], idx[nb]])
    return SmoteResult(train.concat(syn), parents, gaps)


def smote(train: LabeledDataset, cfg: SmoteConfig, snap_columns=(),
          scale: np.ndarray | None = None) -> LabeledDataset:
    return smote_detailed(train, cfg, snap_columns, scale).dataset


def collinearity_residual(point, a, b, skip=()) -> float:
    """Distance from ``point`` to the closed segment [a, b], ignoring ``skip`` coordinates."""
    keep = np.ones(len(point), dtype=bool)
    keep[list(skip)] = False
    p, a, b = point[keep], a[keep], b[keep]
    d = b - a
    dd = float(d @ d)
    t = 0.0 if dd == 0 else min(1.0, max(0.0, float((p - a) @ d) / dd))
    return float(np.linalg.norm(p - (a + t * d)))
