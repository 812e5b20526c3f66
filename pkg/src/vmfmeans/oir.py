"""Optimistic Iterated Restarts: parallel label passes with sequential semantics.

A DP-style label pass visits observations in id order and may change the set
of clusters (create, delete, revive) at any observation; every later
assignment depends on those changes. The parallel pass scores all remaining
observations against a frozen snapshot, finds the lowest id whose visit would
change the cluster set, commits every label before it, replays the
sequential rule at that id and restarts the sweep right after it.

A label model plugged into the engine provides

``counts``
    per-slot membership counts for the current position in the pass (visited
    points counted under their new label, unvisited under their old one);
``propose(start, stop)``
    read-only argmax decisions for observations ``start:stop`` against the
    current snapshot, as slot indices or ``NEW``;
``is_structural_choice(slots)``
    mask of proposed slots whose selection changes the cluster set (revival);
``visit(i, old)``
    the sequential rule for one observation; returns ``(label, structural)``;
``commit(old, new)``
    bulk bookkeeping for a run of non-structural moves.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

NEW = -1
UNASSIGNED = -1


def default_workers() -> int:
    env = os.environ.get("VMFMEANS_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def sequential_label_pass(model, labels: np.ndarray) -> tuple[np.ndarray, int]:
    """Reference pass: visit every observation in id order."""
    out = np.array(labels, dtype=np.int64, copy=True)
    restarts = 0
    for i in range(out.shape[0]):
        lab, structural = model.visit(i, int(out[i]))
        out[i] = lab
        restarts += bool(structural)
    return out, restarts


def _sole_member_mask(counts: np.ndarray, old: np.ndarray, prop: np.ndarray) -> np.ndarray:
    """Which observations would find themselves alone in their old cluster when visited.

    For window position ``i`` with old label ``k`` the membership of ``k`` at
    visit time is ``counts[k] + #{j < i: prop[j] == k} - #{j < i: old[j] == k}``.
    """
    n = old.shape[0]
    has_old = old >= 0
    if not np.any(has_old):
        return np.zeros(n, dtype=bool)
    pos = np.arange(n, dtype=np.int64)
    stride = n + 1
    pk = prop >= 0
    prop_keys = np.sort(prop[pk].astype(np.int64) * stride + pos[pk])
    old_keys = np.sort(old[has_old].astype(np.int64) * stride + pos[has_old])
    k = old[has_old].astype(np.int64)
    q = k * stride + pos[has_old]
    base = k * stride
    n_prop = np.searchsorted(prop_keys, q) - np.searchsorted(prop_keys, base)
    n_old = np.searchsorted(old_keys, q) - np.searchsorted(old_keys, base)
    sole = np.zeros(n, dtype=bool)
    sole[has_old] = (counts[k] + n_prop - n_old) == 1
    return sole


class OIRStats:
    __slots__ = ("restarts", "sweeps")

    def __init__(self):
        self.restarts = 0
        self.sweeps = 0


def parallel_label_pass(model, labels: np.ndarray, workers: int | None = None,
                        executor: ThreadPoolExecutor | None = None,
                        stats: OIRStats | None = None) -> tuple[np.ndarray, int]:
    """Label pass equivalent to :func:`sequential_label_pass`, swept in parallel.

    Returns the new labels and the number of restarts (structural commits).
    """
    old = np.array(labels, dtype=np.int64, copy=True)
    out = old.copy()
    n = old.shape[0]
    workers = default_workers() if workers is None else max(1, int(workers))
    stats = stats if stats is not None else OIRStats()
    own_pool = executor is None and workers > 1
    pool = ThreadPoolExecutor(max_workers=workers) if own_pool else executor
    try:
        p = 0
        while p < n:
            prop = _propose(model, p, n, workers, pool)
            stats.sweeps += 1
            ev = (prop == NEW) | model.is_structural_choice(prop)
            ev |= _sole_member_mask(model.counts, old[p:], prop)
            hits = np.flatnonzero(ev)
            e = n if hits.size == 0 else p + int(hits[0])
            if e > p:
                model.commit(old[p:e], prop[:e - p])
                out[p:e] = prop[:e - p]
            if hits.size == 0:
                break
            lab, structural = model.visit(e, int(old[e]))
            if not structural:
                raise AssertionError(f"visit at {e} was flagged structural but changed nothing")
            out[e] = lab
            stats.restarts += 1
            p = e + 1
    finally:
        if own_pool:
            pool.shutdown()
    return out, stats.restarts


def _propose(model, start: int, stop: int, workers: int, pool) -> np.ndarray:
    n = stop - start
    if pool is None or workers == 1 or n < 64 * workers:
        return model.propose(start, stop)
    # static contiguous chunks keep id order and deterministic minima
    bounds = np.linspace(start, stop, workers + 1).astype(np.int64)
    parts = list(pool.map(lambda ab: model.propose(int(ab[0]), int(ab[1])),
                          zip(bounds[:-1], bounds[1:])))
    return np.concatenate(parts)
