"""DP-vMF-means: batch nonparametric clustering of unit vectors.

Each observation joins the cluster whose mean it is most aligned with, unless
``lam + 1`` beats every alignment, in which case it opens a new cluster with
mean equal to itself. ``lam = cos(phi_lambda) - 1`` where ``phi_lambda`` is the
largest angular radius a cluster may have. The procedure maximizes

    J = sum_k sum_{i in I_k} x_i^T mu_k + lam * K.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import oir
from .sphere import EPS_NORM, DegenerateVector, row_dots, row_dots_one

NEW = oir.NEW
UNASSIGNED = oir.UNASSIGNED


class InconsistentLabeling(ValueError):
    pass


def lambda_from_angle(phi_lambda: float) -> float:
    """``lam = cos(phi_lambda) - 1`` for an angle in radians."""
    if not 0.0 <= phi_lambda <= np.pi:
        raise ValueError("phi_lambda must lie in [0, pi]")
    return float(np.cos(phi_lambda) - 1.0)


def angle_from_lambda(lam: float) -> float:
    return float(np.arccos(np.clip(lam + 1.0, -1.0, 1.0)))


def check_lambda(lam: float) -> float:
    lam = float(lam)
    if not -2.0 <= lam <= 0.0:
        raise ValueError(f"lambda must lie in [-2, 0], got {lam}")
    return lam


@dataclass
class DpConfig:
    lam: float
    max_iterations: int = 100
    workers: int | None = None
    sequential: bool = False

    def __post_init__(self):
        self.lam = check_lambda(self.lam)
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")

    @classmethod
    def from_angle(cls, phi_lambda: float, **kw) -> "DpConfig":
        return cls(lambda_from_angle(phi_lambda), **kw)

    @property
    def phi_lambda(self) -> float:
        return angle_from_lambda(self.lam)


@dataclass
class DpState:
    means: np.ndarray
    labels: np.ndarray
    counts: np.ndarray

    @classmethod
    def empty(cls, n: int, dim: int) -> "DpState":
        return cls(np.zeros((0, dim)), np.full(n, UNASSIGNED, dtype=np.int64),
                   np.zeros(0, dtype=np.int64))

    @property
    def K(self) -> int:
        return self.means.shape[0]


@dataclass
class FitResult:
    labels: np.ndarray
    means: np.ndarray
    K: int
    objective: float
    iterations: int
    restarts: int
    converged: bool = True
    objective_trace: list = field(default_factory=list)
    repairs: int = 0


def assign_one(x, means, lam: float) -> int:
    """Index of the best existing mean, or ``NEW``.

    Exact ties go to the existing cluster, and among clusters to the lowest index.
    """
    means = np.asarray(means, dtype=np.float64)
    if means.shape[0] == 0:
        return NEW
    s = row_dots(np.asarray(x, dtype=np.float64)[None, :], means)[0]
    k = int(np.argmax(s))
    return k if s[k] >= lam + 1.0 else NEW


class DpLabelModel:
    """Label-pass model for the OIR engine. Slots are never reindexed mid-pass."""

    def __init__(self, X: np.ndarray, means: np.ndarray, counts: np.ndarray, lam: float):
        self.X = X
        self.lam = lam
        self.means = np.array(means, dtype=np.float64).reshape(-1, X.shape[1])
        self.counts = np.array(counts, dtype=np.int64)
        self.alive = np.ones(self.means.shape[0], dtype=bool)

    def _argmax(self, Xs: np.ndarray) -> np.ndarray:
        S = self.means.shape[0]
        sc = np.empty((Xs.shape[0], S + 1))
        if S:
            sc[:, :S] = row_dots(Xs, self.means)
            sc[:, :S][:, ~self.alive] = -np.inf
        sc[:, S] = self.lam + 1.0
        j = np.argmax(sc, axis=1)
        j[j == S] = NEW
        return j

    def propose(self, start: int, stop: int) -> np.ndarray:
        return self._argmax(self.X[start:stop])

    def _choose_one(self, x: np.ndarray) -> int:
        # single-point form of _argmax: first maximum, NEW only if strictly better
        if self.means.shape[0] == 0:
            return NEW
        s = row_dots_one(x, self.means)
        s[~self.alive] = -np.inf
        k = int(np.argmax(s))
        return k if s[k] >= self.lam + 1.0 else NEW

    def is_structural_choice(self, slots: np.ndarray) -> np.ndarray:
        return np.zeros(slots.shape[0], dtype=bool)

    def commit(self, old: np.ndarray, new: np.ndarray) -> None:
        np.subtract.at(self.counts, old[old >= 0], 1)
        np.add.at(self.counts, new, 1)

    def visit(self, i: int, old: int) -> tuple[int, bool]:
        structural = False
        if old >= 0:
            self.counts[old] -= 1
            if self.counts[old] == 0:
                # last member leaves: the cluster goes before the point is relabeled
                self.alive[old] = False
                structural = True
        x = self.X[i]
        j = self._choose_one(x)
        if j == NEW:
            self.means = np.vstack([self.means, x[None, :]])
            self.counts = np.append(self.counts, 1)
            self.alive = np.append(self.alive, True)
            return self.means.shape[0] - 1, True
        self.counts[j] += 1
        return j, structural


def same_partition(a: np.ndarray, b: np.ndarray) -> bool:
    """True if two complete labelings group the points identically.

    A sole member leaves its cluster and reopens an identical one, so a pass
    at the fixpoint may rename clusters without changing the grouping.
    """
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if a.shape != b.shape or np.any(a < 0) or np.any(b < 0):
        return False
    if a.size == 0:
        return True
    # the label maps a -> b and b -> a must both be functions
    fwd = np.empty(a.max() + 1, dtype=np.int64)
    fwd[a] = b
    back = np.empty(b.max() + 1, dtype=np.int64)
    back[b] = a
    return bool(np.array_equal(fwd[a], b) and np.array_equal(back[b], a))


def label_pass(X, state: DpState, lam: float, workers: int | None = None,
               sequential: bool = False) -> tuple[DpState, int, bool]:
    """One sequential-semantics label pass.

    Returns the new state (clusters compacted, creation order kept), the number
    of structural restarts, and whether the grouping changed.
    """
    X = np.asarray(X, dtype=np.float64)
    model = DpLabelModel(X, state.means, state.counts, lam)
    if sequential:
        labels, restarts = oir.sequential_label_pass(model, state.labels)
    else:
        labels, restarts = oir.parallel_label_pass(model, state.labels, workers)
    keep = np.flatnonzero(model.alive & (model.counts > 0))
    remap = np.full(model.means.shape[0], -1, dtype=np.int64)
    remap[keep] = np.arange(keep.size)
    new_state = DpState(model.means[keep].copy(), remap[labels], model.counts[keep].copy())
    changed = not same_partition(state.labels, new_state.labels)
    return new_state, restarts, changed


def cluster_sums(X: np.ndarray, labels: np.ndarray, K: int) -> np.ndarray:
    sums = np.empty((K, X.shape[1]))
    for d in range(X.shape[1]):
        sums[:, d] = np.bincount(labels, weights=X[:, d], minlength=K)
    return sums


def update_parameters(X, state: DpState) -> DpState:
    """Replace each mean by the normalized vector sum of its members."""
    X = np.asarray(X, dtype=np.float64)
    sums = cluster_sums(X, state.labels, state.K)
    norms = np.linalg.norm(sums, axis=1)
    bad = np.flatnonzero(~(norms > EPS_NORM))
    if bad.size:
        raise DegenerateVector(f"cluster {bad[0]} has a vanishing vector sum")
    return DpState(sums / norms[:, None], state.labels, state.counts)


def objective(X, labels, means, lam: float) -> float:
    """``sum_i x_i^T mu_{z_i} + lam * K``."""
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels)
    means = np.asarray(means, dtype=np.float64).reshape(-1, X.shape[1])
    K = means.shape[0]
    if labels.shape[0] != X.shape[0]:
        raise InconsistentLabeling("one label per observation is required")
    if labels.size and (labels.min() < 0 or labels.max() >= K):
        raise InconsistentLabeling("labels must index the means")
    return float(np.sum(X * means[labels]) + lam * K)


def fit(X, config: DpConfig, init: DpState | None = None) -> FitResult:
    """Alternate label passes and mean updates until a pass leaves the grouping unchanged."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("X must be a non-empty (N, D) array")
    lam = config.lam
    state = init if init is not None else DpState.empty(X.shape[0], X.shape[1])
    restarts = 0
    trace = []
    best = None
    converged = False
    it = 0
    for it in range(1, config.max_iterations + 1):
        state, r, changed = label_pass(X, state, lam, config.workers, config.sequential)
        restarts += r
        if not changed:
            converged = True
            break
        trace.append(objective(X, state.labels, state.means, lam))
        state = update_parameters(X, state)
        J = objective(X, state.labels, state.means, lam)
        trace.append(J)
        if best is None or J > best[0]:
            best = (J, state)
    if not converged and best is not None:
        state = best[1]
    J = objective(X, state.labels, state.means, lam)
    return FitResult(state.labels.copy(), state.means.copy(), state.K, J, it,
                     restarts, converged, trace)


class DPvMFMeans:
    """Estimator-style wrapper around :func:`fit`."""

    def __init__(self, lam: float | None = None, phi_lambda: float | None = None,
                 max_iterations: int = 100, workers: int | None = None):
        if (lam is None) == (phi_lambda is None):
            raise ValueError("give exactly one of lam and phi_lambda")
        self.config = (DpConfig(lam, max_iterations, workers) if lam is not None
                       else DpConfig.from_angle(phi_lambda, max_iterations=max_iterations,
                                                workers=workers))
        self.result_: FitResult | None = None

    def fit(self, X):
        self.result_ = fit(X, self.config)
        self.labels_ = self.result_.labels
        self.cluster_centers_ = self.result_.means
        return self

    def fit_predict(self, X):
        return self.fit(X).labels_
