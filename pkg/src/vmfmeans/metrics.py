"""Clustering quality: normalized mutual information and cosine silhouette."""

from __future__ import annotations

import numpy as np


class LengthMismatch(ValueError):
    pass


class SingleCluster(ValueError):
    """Silhouette is undefined for fewer than two clusters."""


def contingency(labels_a, labels_b) -> np.ndarray:
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape:
        raise LengthMismatch(f"{a.shape[0]} vs {b.shape[0]} labels")
    if a.size == 0:
        raise ValueError("labelings must be non-empty")
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    return table


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log(p)))


def nmi(labels_a, labels_b) -> float:
    """Mutual information normalized by the geometric mean of the entropies.

    Zero entropy on either side gives 0, except two identical one-cluster
    labelings which give 1.
    """
    table = contingency(labels_a, labels_b)
    n = table.sum()
    ra = table.sum(axis=1)
    rb = table.sum(axis=0)
    ha = _entropy(ra)
    hb = _entropy(rb)
    if ha == 0.0 or hb == 0.0:
        return 1.0 if table.shape == (1, 1) else 0.0
    nz_rows = (table > 0).sum(axis=1)
    if table.shape[0] == table.shape[1] and np.all(nz_rows == 1) and np.all((table > 0).sum(axis=0) == 1):
        # same grouping under renaming; skip the rounding of the ratio
        return 1.0
    nz = table > 0
    pij = table[nz] / n
    outer = np.outer(ra, rb)[nz] / (n * n)
    mi = float(np.sum(pij * (np.log(pij) - np.log(outer))))
    return float(np.clip(mi / np.sqrt(ha * hb), 0.0, 1.0))


def silhouette_cosine(X, labels, max_sample: int = 10000, seed: int = 0) -> float:
    """Mean silhouette with distance ``1 - x^T y``.

    Mean distances to a cluster reduce to dot products with the cluster's
    vector sum, so the full-data evaluation costs O(N K D). When ``N`` exceeds
    ``max_sample`` a seeded uniform subsample is scored against all points.
    Points in singleton clusters contribute 0.
    """
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels)
    if labels.shape[0] != X.shape[0]:
        raise LengthMismatch(f"{X.shape[0]} points vs {labels.shape[0]} labels")
    _, z = np.unique(labels, return_inverse=True)
    K = int(z.max()) + 1 if z.size else 0
    if K < 2:
        raise SingleCluster("silhouette needs at least two clusters")
    N = X.shape[0]
    sums = np.zeros((K, X.shape[1]))
    np.add.at(sums, z, X)
    sizes = np.bincount(z, minlength=K)

    idx = np.arange(N)
    if N > max_sample:
        idx = np.sort(np.random.default_rng(seed).choice(N, size=max_sample, replace=False))
    Xs = X[idx]
    zs = z[idx]
    dots = Xs @ sums.T
    # mean distance to every cluster, counting the point itself where it belongs
    mean_d = 1.0 - dots / sizes[None, :]
    own = sizes[zs]
    self_dot = np.einsum("ij,ij->i", Xs, Xs)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = ((own - dots[np.arange(idx.size), zs]) - (1.0 - self_dot)) / (own - 1)
    a = np.maximum(a, 0.0)
    mean_d[np.arange(idx.size), zs] = np.inf
    b = np.maximum(mean_d.min(axis=1), 0.0)
    denom = np.maximum(a, b)
    s = np.zeros(idx.size)
    ok = (own > 1) & (denom > 0)
    s[ok] = (b[ok] - a[ok]) / denom[ok]
    return float(s.mean())
