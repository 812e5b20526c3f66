"""Spherical k-means, the parametric baseline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dp import FitResult, cluster_sums
from .sphere import EPS_NORM


@dataclass
class SpkmConfig:
    K: int
    max_iterations: int = 100
    restarts: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")


def init_means(X: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding with dissimilarity ``1 - max_k x^T mu_k``."""
    N = X.shape[0]
    if K > N:
        raise ValueError(f"K={K} exceeds the number of points {N}")
    means = np.empty((K, X.shape[1]))
    means[0] = X[rng.integers(N)]
    best = X @ means[0]
    for k in range(1, K):
        d = np.clip(1.0 - best, 0.0, None)
        tot = d.sum()
        if tot > 0:
            i = rng.choice(N, p=d / tot)
        else:
            i = rng.integers(N)
        means[k] = X[i]
        best = np.maximum(best, X @ means[k])
    return means


def cosine_objective(X, labels, means) -> float:
    return float(np.sum(X * means[labels]))


def _repair_empty(X, labels, means, K):
    """Reseed empty clusters at the worst-fitting points of non-singleton clusters."""
    events = 0
    counts = np.bincount(labels, minlength=K)
    for k in np.flatnonzero(counts == 0):
        sim = np.einsum("ij,ij->i", X, means[labels])
        sim[counts[labels] <= 1] = np.inf
        i = int(np.argmin(sim))
        counts[labels[i]] -= 1
        labels[i] = k
        counts[k] = 1
        means[k] = X[i]
        events += 1
    return events


def _single_run(X, K, max_iterations, rng):
    means = init_means(X, K, rng)
    labels = np.argmax(X @ means.T, axis=1)
    trace = []
    repairs = 0
    converged = False
    it = 0
    for it in range(1, max_iterations + 1):
        repairs += _repair_empty(X, labels, means, K)
        sums = cluster_sums(X, labels, K)
        norms = np.linalg.norm(sums, axis=1)
        ok = norms > EPS_NORM
        means[ok] = sums[ok] / norms[ok, None]
        trace.append(cosine_objective(X, labels, means))
        new = np.argmax(X @ means.T, axis=1)
        if np.array_equal(new, labels):
            converged = True
            break
        labels = new
    return labels, means, trace, it, converged, repairs


def fit(X, config: SpkmConfig) -> FitResult:
    """Best of ``config.restarts`` seeded runs by cosine objective (ties to the earliest)."""
    X = np.asarray(X, dtype=np.float64)
    if config.K > X.shape[0]:
        raise ValueError(f"K={config.K} exceeds the number of points {X.shape[0]}")
    streams = np.random.SeedSequence(config.seed).spawn(config.restarts)
    best = None
    for ss in streams:
        labels, means, trace, it, conv, repairs = _single_run(
            X, config.K, config.max_iterations, np.random.default_rng(ss))
        J = cosine_objective(X, labels, means)
        if best is None or J > best[0]:
            best = (J, labels, means, trace, it, conv, repairs)
    J, labels, means, trace, it, conv, repairs = best
    return FitResult(labels, means, config.K, J, it, 0, conv, trace, repairs)
