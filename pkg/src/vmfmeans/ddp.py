"""DDP-vMF-means: temporally consistent clustering of a stream of batches.

Clusters persist across timesteps. Within a frame a cluster is either
instantiated (it has data in this frame and is scored by ``x^T mu``) or tracked
but unobserved, in which case its score accounts for ``dt`` random-walk
steps since it was last seen (see :mod:`vmfmeans.geodesic`). A tracked cluster
that wins a point is revived. Clusters that have been unobserved so long that
``Q * dt < lam`` are dropped for good.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import oir
from .dp import NEW, UNASSIGNED, check_lambda, cluster_sums, lambda_from_angle, same_partition
from .geodesic import (TransitionParams, dead_cluster_scores, objective_value,
                       revival_threshold, transition_angles)
from .sphere import (EPS_NORM, DegenerateGeodesic, DegenerateVector, rotate_towards, row_dots,
                     row_dots_one)

INSTANTIATED = "instantiated"
DEAD = "tracked-dead"
REMOVED = "removed"

# margin (radians) added to the revival threshold before pruning a candidate
PRUNE_MARGIN = 1e-9
# relative slack on the permanent-removal test so Q = lam/n removes at dt = n + 1
REMOVAL_RTOL = 1e-12


@dataclass
class DdpConfig:
    lam: float
    beta: float = 1e5
    Q: float | None = None
    max_iterations: int = 100
    workers: int | None = None
    sequential: bool = False

    def __post_init__(self):
        self.lam = check_lambda(self.lam)
        if self.Q is None:
            self.Q = self.lam / 400.0
        if self.Q > 0:
            raise ValueError("Q must be <= 0")
        if not self.beta > 0:
            raise ValueError("beta must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")

    @classmethod
    def from_angle(cls, phi_lambda: float, **kw) -> "DdpConfig":
        return cls(lambda_from_angle(phi_lambda), **kw)


@dataclass
class ClusterState:
    id: int
    m: np.ndarray
    w: float
    dt: int
    c: int
    status: str = INSTANTIATED

    def params(self, beta: float) -> TransitionParams:
        return TransitionParams(self.w, beta, self.dt, 1.0)


@dataclass
class FrameResult:
    t: int
    labels: np.ndarray
    born_ids: list
    revived_ids: list
    removed_ids: list
    fractions: dict
    iterations: int
    restarts: int
    converged: bool
    degenerate: bool = False
    timing_ms: dict = field(default_factory=dict)


def removal_due(Q: float, dt: int, lam: float) -> bool:
    """``Q * dt < lam``: the cluster can never again beat a new cluster."""
    return Q * dt < lam - REMOVAL_RTOL * abs(lam)


def score_point(x, cluster: ClusterState, config: DdpConfig) -> float:
    """Label score of ``x`` for one cluster (the new-cluster option scores ``lam + 1``)."""
    x = np.asarray(x, dtype=np.float64)
    if cluster.status == INSTANTIATED:
        return float(x @ cluster.m)
    if cluster.status == REMOVED:
        raise ValueError(f"cluster {cluster.id} has been removed")
    zeta = np.arccos(np.clip(row_dots(x[None, :], cluster.m[None, :])[0], -1.0, 1.0))
    return float(dead_cluster_scores(zeta, cluster.w, config.beta, cluster.dt, config.Q,
                                     allow_obtuse=True)[0])


class FrameLabelModel:
    """Slot bookkeeping for one frame; plugs into the OIR engine.

    Slots ``0..T-1`` are the tracked clusters in id order, born clusters are
    appended after them. A tracked slot is scored with the transition formula
    until a parameter pass has given it an instantiated mean.
    """

    def __init__(self, X: np.ndarray, tracked: list[ClusterState], config: DdpConfig,
                 cache: bool = True):
        self.X = X
        self.config = config
        self.tracked = tracked
        T = len(tracked)
        self.T = T
        D = X.shape[1]
        self.means = np.zeros((T, D))
        self.has_mean = np.zeros(T, dtype=bool)
        self.active = np.zeros(T, dtype=bool)
        self.alive = np.ones(T, dtype=bool)
        self.counts = np.zeros(T, dtype=np.int64)
        self.f_star = np.full(T, np.nan)
        self.use_cache = cache
        self._cache: dict[int, np.ndarray] = {}
        lam = config.lam
        self.cos_cut = np.empty(T)
        for s, cl in enumerate(tracked):
            zmax = revival_threshold(cl.params(config.beta), config.Q, lam, allow_obtuse=True)
            self.cos_cut[s] = np.cos(min(np.pi, zmax + PRUNE_MARGIN)) if zmax > 0 else np.inf
        if cache:
            # filled up front: worker threads then only read it
            for s in range(T):
                self._cache[s] = self._dead_scores(s, X)

    @property
    def S(self) -> int:
        return self.means.shape[0]

    def _dead_column(self, s: int, start: int, stop: int) -> np.ndarray:
        if self.use_cache:
            return self._cache[s][start:stop]
        return self._dead_scores(s, self.X[start:stop])

    def _dead_scores(self, s: int, Xs: np.ndarray) -> np.ndarray:
        cl = self.tracked[s]
        dots = row_dots(Xs, cl.m[None, :])[:, 0]
        out = np.full(Xs.shape[0], -np.inf)
        cand = dots >= self.cos_cut[s]
        if np.any(cand):
            zeta = np.arccos(np.clip(dots[cand], -1.0, 1.0))
            out[cand] = dead_cluster_scores(zeta, cl.w, self.config.beta, cl.dt,
                                            self.config.Q, allow_obtuse=True)
        return out

    def _scores(self, start: int, stop: int) -> np.ndarray:
        Xs = self.X[start:stop]
        S = self.S
        sc = np.full((Xs.shape[0], S + 1), -np.inf)
        dot_slots = np.flatnonzero(self.alive & self.has_mean)
        if dot_slots.size:
            sc[:, dot_slots] = row_dots(Xs, self.means[dot_slots])
        for s in np.flatnonzero(~self.has_mean[:self.T]):
            sc[:, s] = self._dead_column(int(s), start, stop)
        sc[:, S] = self.config.lam + 1.0
        return sc

    def propose(self, start: int, stop: int) -> np.ndarray:
        sc = self._scores(start, stop)
        j = np.argmax(sc, axis=1)
        j[j == self.S] = NEW
        return j

    def _choose_one(self, i: int) -> int:
        # single-point form of propose: same scores, first maximum, NEW last
        S = self.S
        sc = np.full(S, -np.inf)
        dot_slots = np.flatnonzero(self.alive & self.has_mean)
        if dot_slots.size:
            sc[dot_slots] = row_dots_one(self.X[i], self.means[dot_slots])
        for s in np.flatnonzero(~self.has_mean[:self.T]):
            sc[s] = self._dead_column(int(s), i, i + 1)[0]
        if S:
            k = int(np.argmax(sc))
            if sc[k] >= self.config.lam + 1.0:
                return k
        return NEW

    def is_structural_choice(self, slots: np.ndarray) -> np.ndarray:
        out = np.zeros(slots.shape[0], dtype=bool)
        tr = (slots >= 0) & (slots < self.T)
        out[tr] = ~self.active[slots[tr]]
        return out

    def commit(self, old: np.ndarray, new: np.ndarray) -> None:
        np.subtract.at(self.counts, old[old >= 0], 1)
        np.add.at(self.counts, new, 1)

    def visit(self, i: int, old: int) -> tuple[int, bool]:
        structural = False
        if old >= 0:
            self.counts[old] -= 1
            if self.counts[old] == 0:
                structural = True
                if old >= self.T:
                    self.alive[old] = False
                else:
                    # abandoned revival: back to the pre-frame tracked state
                    self.active[old] = False
                    self.has_mean[old] = False
                    self.f_star[old] = np.nan
        j = self._choose_one(i)
        if j == NEW:
            self.means = np.vstack([self.means, self.X[i][None, :]])
            self.has_mean = np.append(self.has_mean, True)
            self.active = np.append(self.active, True)
            self.alive = np.append(self.alive, True)
            self.counts = np.append(self.counts, 1)
            self.f_star = np.append(self.f_star, np.nan)
            return self.S - 1, True
        if j < self.T and not self.active[j]:
            self.active[j] = True
            structural = True
        self.counts[j] += 1
        return j, structural

    def compact(self, labels: np.ndarray) -> np.ndarray:
        """Drop dead born slots; tracked slots keep their indices."""
        keep = np.concatenate([np.arange(self.T),
                               self.T + np.flatnonzero(self.alive[self.T:] & (self.counts[self.T:] > 0))])
        remap = np.full(self.S, -1, dtype=np.int64)
        remap[keep] = np.arange(keep.size)
        for name in ("means", "has_mean", "active", "alive", "counts", "f_star"):
            setattr(self, name, getattr(self, name)[keep].copy())
        out = labels.copy()
        out[labels >= 0] = remap[labels[labels >= 0]]
        return out

    def parameter_pass(self, labels: np.ndarray) -> bool:
        """Update means of instantiated slots. Returns True if a degenerate geodesic occurred."""
        beta = self.config.beta
        sums = cluster_sums(self.X, labels, self.S)
        norms = np.linalg.norm(sums, axis=1)
        degenerate = False
        for s in np.flatnonzero(self.active & self.alive & (self.counts > 0)):
            if not norms[s] > EPS_NORM:
                raise DegenerateVector(f"slot {s} has a vanishing vector sum")
            xn = sums[s] / norms[s]
            if s >= self.T:
                self.means[s] = xn
                self.has_mean[s] = True
                continue
            cl = self.tracked[s]
            rho = float(norms[s])
            zeta = float(np.arccos(np.clip(cl.m @ xn, -1.0, 1.0)))
            th, ph, et = transition_angles(np.array([zeta]), cl.w, beta, cl.dt, rho,
                                           allow_obtuse=True)
            self.f_star[s] = float(objective_value(th[0], ph[0], et[0], cl.w, beta, cl.dt, rho))
            try:
                self.means[s] = rotate_towards(xn, cl.m, float(et[0]))
            except DegenerateGeodesic:
                # data direction antipodal to the tracked mean
                self.means[s] = xn
                degenerate = True
            self.has_mean[s] = True
        return degenerate


class DDPvMFMeans:
    """Streaming clusterer. Call :meth:`step` once per frame."""

    def __init__(self, config: DdpConfig):
        self.config = config
        self.clusters: list[ClusterState] = []
        self.removed: list[ClusterState] = []
        self.next_id = 0
        self.t = -1
        self._pending_removed: list[int] = []
        self.dim: int | None = None

    def begin_timestep(self) -> list[int]:
        """Age every cluster by one step and drop the ones that can never return."""
        cfg = self.config
        kept, gone = [], []
        for cl in self.clusters:
            cl.dt += 1
            if removal_due(cfg.Q, cl.dt, cfg.lam):
                cl.status = REMOVED
                self.removed.append(cl)
                gone.append(cl.id)
            else:
                cl.status = DEAD
                kept.append(cl)
        self.clusters = kept
        self.t += 1
        return gone

    def step(self, X) -> FrameResult:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValueError("a frame must be a non-empty (N, D) array")
        if self.dim is None:
            self.dim = X.shape[1]
        elif X.shape[1] != self.dim:
            raise ValueError(f"frame dimension {X.shape[1]} != stream dimension {self.dim}")
        cfg = self.config
        timing = {"label": 0.0, "parameter": 0.0}
        t0 = time.perf_counter()
        removed_ids = self.begin_timestep()
        model = FrameLabelModel(X, self.clusters, cfg)
        timing["setup"] = 1e3 * (time.perf_counter() - t0)

        labels = np.full(X.shape[0], UNASSIGNED, dtype=np.int64)
        restarts = 0
        converged = False
        degenerate = False
        it = 0
        for it in range(1, cfg.max_iterations + 1):
            t1 = time.perf_counter()
            if cfg.sequential:
                new, r = oir.sequential_label_pass(model, labels)
            else:
                new, r = oir.parallel_label_pass(model, labels, cfg.workers)
            restarts += r
            new = model.compact(new)
            changed = not same_partition(labels, new)
            labels = new
            t2 = time.perf_counter()
            timing["label"] += 1e3 * (t2 - t1)
            if not changed:
                converged = True
                break
            degenerate |= model.parameter_pass(labels)
            timing["parameter"] += 1e3 * (time.perf_counter() - t2)
        t3 = time.perf_counter()
        result = self._finalize(X, model, labels, removed_ids, it, restarts, converged, degenerate)
        timing["finalize"] = 1e3 * (time.perf_counter() - t3)
        result.timing_ms = timing
        return result

    def _finalize(self, X, model, labels, removed_ids, it, restarts, converged, degenerate):
        sums = cluster_sums(X, labels, model.S)
        slot_ids = np.empty(model.S, dtype=np.int64)
        born, revived = [], []
        for s in range(model.S):
            n = int(model.counts[s])
            if s < model.T:
                cl = model.tracked[s]
                slot_ids[s] = cl.id
                if model.active[s] and n > 0:
                    cl.w = float(model.f_star[s])
                    cl.m = model.means[s].copy()
                    cl.c += n
                    cl.dt = 0
                    cl.status = INSTANTIATED
                    revived.append(cl.id)
            else:
                cl = ClusterState(self.next_id, model.means[s].copy(),
                                  float(np.linalg.norm(sums[s])), 0, n, INSTANTIATED)
                self.next_id += 1
                self.clusters.append(cl)
                slot_ids[s] = cl.id
                born.append(cl.id)
        self.clusters.sort(key=lambda c: c.id)
        ids = slot_ids[labels]
        uniq, cnt = np.unique(ids, return_counts=True)
        fractions = {int(k): float(v) / ids.size for k, v in zip(uniq, cnt)}
        return FrameResult(self.t, ids, born, revived, list(removed_ids), fractions,
                           it, restarts, converged, degenerate)

    def ledger(self) -> dict:
        return {
            "t": self.t,
            "clusters": [{"id": c.id, "status": c.status, "w": c.w, "dt": c.dt, "c": c.c,
                          "m": c.m.tolist()} for c in self.clusters],
            "removed": [c.id for c in self.removed],
        }
