"""Shared builders for tests."""

import numpy as np

from vmfmeans import oir
from vmfmeans.ddp import DEAD, ClusterState, DdpConfig, FrameLabelModel
from vmfmeans.dp import DpLabelModel, DpState, label_pass, update_parameters


def random_unit(rng, n, D=3):
    g = rng.standard_normal((n, D))
    return g / np.linalg.norm(g, axis=1)[:, None]


def clustered(rng, n, k, D=3, tau=50.0):
    from vmfmeans.sphere import sample_vmf
    centers = random_unit(rng, k, D)
    z = rng.integers(k, size=n)
    X = np.empty((n, D))
    for j in range(k):
        idx = np.flatnonzero(z == j)
        if idx.size:
            X[idx] = sample_vmf(centers[j], tau, rng, idx.size)
    return X


def dp_states(X, lam, passes):
    """Sequence of DP states reached by sequential passes and mean updates."""
    state = DpState.empty(X.shape[0], X.shape[1])
    out = [state]
    for _ in range(passes):
        # inputs only; any equivalent pass will do
        state, _, changed = label_pass(X, state, lam, workers=1)
        state = update_parameters(X, state)
        out.append(state)
        if not changed:
            break
    return out


def dp_model(X, state, lam):
    return DpLabelModel(X, state.means, state.counts, lam)


def tracked_clusters(rng, k, D=3, max_dt=5, w_range=(2.0, 200.0)):
    out = []
    for i, m in enumerate(random_unit(rng, k, D)):
        out.append(ClusterState(i, m, float(rng.uniform(*w_range)), int(rng.integers(1, max_dt + 1)),
                                int(rng.integers(1, 100)), DEAD))
    return out


def run_frame_passes(X, tracked, config, sequential, workers=1, passes=20, cache=None):
    """Drive a frame model for several label/parameter passes; returns per-pass labels.

    The sequential oracle recomputes every dead-cluster score unless ``cache``
    is set explicitly.
    """
    cache = (not sequential) if cache is None else cache
    model = FrameLabelModel(X, tracked, config, cache=cache)
    labels = np.full(X.shape[0], oir.UNASSIGNED, dtype=np.int64)
    hist = []
    for _ in range(passes):
        if sequential:
            new, r = oir.sequential_label_pass(model, labels)
        else:
            new, r = oir.parallel_label_pass(model, labels, workers)
        from vmfmeans.dp import same_partition
        new = model.compact(new)
        changed = not same_partition(labels, new)
        labels = new
        hist.append((labels.copy(), r))
        if not changed:
            break
        model.parameter_pass(labels)
    return hist, model


def ddp_config(phi_deg=60.0, **kw):
    return DdpConfig.from_angle(np.deg2rad(phi_deg), **kw)
