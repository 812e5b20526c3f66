import numpy as np
import pytest

from vmfmeans import oir
from vmfmeans.oir import NEW, OIRStats, _sole_member_mask, parallel_label_pass, sequential_label_pass

from helpers import (clustered, ddp_config, dp_model, dp_states, random_unit,
                     run_frame_passes, tracked_clusters)


def brute_sole_member(counts, old, prop):
    c = counts.copy()
    out = np.zeros(len(old), dtype=bool)
    for i in range(len(old)):
        if old[i] >= 0:
            out[i] = c[old[i]] == 1
            c[old[i]] -= 1
        if prop[i] >= 0:
            c[prop[i]] += 1
    return out


@pytest.mark.parametrize("seed", range(20))
def test_sole_member_mask_matches_simulation(seed):
    rng = np.random.default_rng(seed)
    K = int(rng.integers(1, 6))
    n = int(rng.integers(1, 40))
    old = rng.integers(-1, K, size=n)
    prop = rng.integers(-1, K, size=n)
    counts = np.bincount(old[old >= 0], minlength=K) + rng.integers(0, 2, size=K)
    np.testing.assert_array_equal(_sole_member_mask(counts, old, prop),
                                  brute_sole_member(counts, old, prop))


@pytest.mark.parametrize("seed", range(12))
@pytest.mark.parametrize("workers", [1, 2, 8])
def test_dp_parallel_equals_sequential(seed, workers):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 1500))
    X = clustered(rng, n, int(rng.integers(1, 12)), D=int(rng.integers(2, 6)))
    lam = float(np.cos(np.deg2rad(rng.uniform(15, 90))) - 1)
    for state in dp_states(X, lam, 4):
        seq_model = dp_model(X, state, lam)
        par_model = dp_model(X, state, lam)
        ls, rs = sequential_label_pass(seq_model, state.labels)
        stats = OIRStats()
        lp, rp = parallel_label_pass(par_model, state.labels, workers, stats=stats)
        np.testing.assert_array_equal(ls, lp)
        assert rs == rp
        assert stats.sweeps <= rp + 1
        np.testing.assert_array_equal(seq_model.counts, par_model.counts)
        np.testing.assert_array_equal(seq_model.alive, par_model.alive)
        np.testing.assert_array_equal(seq_model.means, par_model.means)


def test_dp_duplicates_and_ties():
    # exact duplicates and points exactly on the new-cluster boundary
    X = np.repeat(np.eye(3), 50, axis=0)
    lam = -1.0  # cos(90 deg) - 1: orthogonal points tie with the new-cluster score
    for state in dp_states(X, lam, 3):
        a, ra = sequential_label_pass(dp_model(X, state, lam), state.labels)
        b, rb = parallel_label_pass(dp_model(X, state, lam), state.labels, 4)
        np.testing.assert_array_equal(a, b)
        assert ra == rb
    # ties go to the existing cluster: everything lands in one cluster
    assert len(np.unique(a)) == 1


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("workers", [1, 2, 8])
def test_ddp_parallel_equals_sequential(seed, workers):
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(50, 1200))
    X = clustered(rng, n, int(rng.integers(1, 8)), tau=30.0)
    cfg = ddp_config(float(rng.uniform(20, 100)), beta=float(10 ** rng.uniform(1, 5)))
    tracked_a = tracked_clusters(np.random.default_rng(seed), int(rng.integers(0, 6)))
    tracked_b = tracked_clusters(np.random.default_rng(seed), len(tracked_a))
    hs, ms = run_frame_passes(X, tracked_a, cfg, sequential=True)
    hp, mp = run_frame_passes(X, tracked_b, cfg, sequential=False, workers=workers)
    assert len(hs) == len(hp)
    for (ls, rs), (lp, rp) in zip(hs, hp):
        np.testing.assert_array_equal(ls, lp)
        assert rs == rp
    np.testing.assert_array_equal(ms.means, mp.means)
    np.testing.assert_array_equal(ms.active, mp.active)


def test_restart_counts_structural_events():
    # three well separated points, each opens a cluster: 3 structural events
    X = np.eye(3)
    from vmfmeans.dp import DpLabelModel
    m = DpLabelModel(X, np.zeros((0, 3)), np.zeros(0, dtype=np.int64), -0.5)
    stats = OIRStats()
    labels, r = parallel_label_pass(m, np.full(3, -1), 2, stats=stats)
    assert list(labels) == [0, 1, 2] and r == 3 and stats.sweeps == 3


def test_default_workers_env(monkeypatch):
    monkeypatch.setenv("VMFMEANS_THREADS", "3")
    assert oir.default_workers() == 3
    monkeypatch.delenv("VMFMEANS_THREADS")
    assert oir.default_workers() >= 1


def test_new_sentinel():
    assert NEW == -1
