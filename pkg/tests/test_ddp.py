import numpy as np
import pytest

from vmfmeans import dp
from vmfmeans.ddp import (DEAD, INSTANTIATED, REMOVED, ClusterState, DdpConfig, DDPvMFMeans,
                          removal_due, score_point)
from vmfmeans.geodesic import solve_transition_angles
from vmfmeans.metrics import nmi
from vmfmeans.sphere import sample_vmf
from vmfmeans.synth import aba_scenario, generate_stream

LAM100 = float(np.cos(np.deg2rad(100)) - 1)


def blob(rng, mu, n, tau=200.0):
    return sample_vmf(np.asarray(mu, float) / np.linalg.norm(mu), tau, rng, n)


def test_config_defaults_and_validation():
    c = DdpConfig(LAM100)
    assert c.beta == 1e5 and c.Q == pytest.approx(LAM100 / 400)
    with pytest.raises(ValueError):
        DdpConfig(-0.5, Q=0.1)
    with pytest.raises(ValueError):
        DdpConfig(-0.5, beta=0.0)


def test_removal_rule_boundaries():
    Q = LAM100 / 400
    assert not removal_due(Q, 400, LAM100)
    assert removal_due(Q, 401, LAM100)
    assert not any(removal_due(0.0, dt, LAM100) for dt in (1, 10, 10 ** 6))
    assert removal_due(LAM100 - 1e-6, 1, LAM100)
    # strict inequality at Q == lam: survives dt = 1, removed at dt = 2
    assert not removal_due(LAM100, 1, LAM100)
    assert removal_due(LAM100, 2, LAM100)


def test_score_point_cases():
    cfg = DdpConfig(-0.5, Q=0.0)
    m = np.array([0, 0, 1.0])
    inst = ClusterState(0, m, 5.0, 0, 10, INSTANTIATED)
    assert score_point(m, inst, cfg) == 1.0
    dead = ClusterState(0, m, 5.0, 3, 10, DEAD)
    assert score_point(m, dead, cfg) == 1.0
    x = np.array([0, np.sin(0.4), np.cos(0.4)])
    stiff = ClusterState(0, m, 1e12, 1, 10, DEAD)
    assert score_point(x, stiff, DdpConfig(-0.5, beta=1e12, Q=0.0)) == pytest.approx(np.cos(0.4), abs=1e-9)
    with pytest.raises(ValueError):
        score_point(x, ClusterState(0, m, 1.0, 1, 1, REMOVED), cfg)


def test_identical_frames_revive_without_births(rng):
    model = DDPvMFMeans(DdpConfig.from_angle(np.deg2rad(40)))
    X = blob(rng, [1, 1, 0], 300)
    r0 = model.step(X)
    assert r0.born_ids == [0] and r0.revived_ids == []
    r1 = model.step(X)
    assert r1.born_ids == [] and r1.revived_ids == [0]
    assert set(r1.labels) == {0}
    cl = model.clusters[0]
    assert cl.dt == 0 and cl.c == 600 and cl.status == INSTANTIATED


def test_far_frame_gives_births_only(rng):
    model = DDPvMFMeans(DdpConfig.from_angle(np.deg2rad(30), Q=-0.05))
    model.step(blob(rng, [0, 0, 1], 200))
    r = model.step(blob(rng, [0, 0, -1], 200))
    assert r.revived_ids == [] and r.born_ids == [1]
    assert [c.status for c in model.clusters] == [DEAD, INSTANTIATED]
    assert model.clusters[0].dt == 1


def test_weight_updates(rng):
    cfg = DdpConfig.from_angle(np.deg2rad(60), beta=50.0)
    model = DDPvMFMeans(cfg)
    X0 = blob(rng, [0, 0, 1], 100, tau=50)
    model.step(X0)
    w0 = model.clusters[0].w
    assert w0 == pytest.approx(np.linalg.norm(X0.sum(axis=0)))
    m0 = model.clusters[0].m.copy()
    X1 = blob(rng, [0, 0.3, 1], 80, tau=50)
    r = model.step(X1)
    assert r.revived_ids == [0]
    s = X1.sum(axis=0)
    rho = np.linalg.norm(s)
    xn = s / rho
    zeta = np.arccos(m0 @ xn)
    from vmfmeans.geodesic import TransitionParams
    sol = solve_transition_angles(zeta, TransitionParams(w0, 50.0, 1, rho))
    cl = model.clusters[0]
    assert cl.w == pytest.approx(sol.f_star, rel=1e-12)
    # the fused mean sits eta away from the data direction, towards the old mean
    assert np.arccos(np.clip(cl.m @ xn, -1, 1)) == pytest.approx(sol.eta, abs=1e-7)
    assert np.arccos(np.clip(cl.m @ m0, -1, 1)) == pytest.approx(zeta - sol.eta, abs=1e-7)


def test_frame_invariants(rng):
    model = DDPvMFMeans(DdpConfig.from_angle(np.deg2rad(45)))
    centers = [[1, 0, 0], [0, 1, 0], [0, 0, 1], [-1, 0, 0]]
    for t in range(6):
        X = np.vstack([blob(rng, centers[(t + j) % 4], 100) for j in range(2)])
        r = model.step(X)
        assert sum(r.fractions.values()) == pytest.approx(1.0, abs=1e-9)
        alive = {c.id: c for c in model.clusters}
        for k in r.fractions:
            assert alive[k].status == INSTANTIATED and alive[k].dt == 0
        for c in model.clusters:
            assert c.c > 0
            assert (c.status == INSTANTIATED) == (c.id in r.fractions)
            if c.status == DEAD:
                assert c.dt >= 1


def test_reduction_to_dp_when_q_below_lambda(rng):
    lam = dp.lambda_from_angle(np.deg2rad(35))
    model = DDPvMFMeans(DdpConfig(lam, Q=lam - 1e-6))
    for t in range(3):
        X = np.vstack([blob(rng, rng.standard_normal(3), 150, tau=60) for _ in range(4)])
        r = model.step(X)
        ref = dp.fit(X, dp.DpConfig(lam))
        assert nmi(ref.labels, r.labels) == 1.0
        assert r.revived_ids == []
        # born ids follow creation order, which matches the DP cluster order
        means = np.array([c.m for c in model.clusters if c.id in r.born_ids])
        np.testing.assert_allclose(means, ref.means, atol=1e-9)


def test_aba_revival():
    frames = generate_stream(aba_scenario(frames_per_phase=2, n_per_frame=300, seed=1))
    model = DDPvMFMeans(DdpConfig.from_angle(np.deg2rad(100)))
    res = [model.step(f.X) for f in frames]
    phase1 = set(res[0].labels) | set(res[1].labels)
    phase2 = set(res[2].labels) | set(res[3].labels)
    assert phase1.isdisjoint(phase2)
    for r in res[4:]:
        assert np.mean(np.isin(r.labels, list(phase1))) >= 0.95
        assert set(r.revived_ids) == phase1


def test_stream_errors(rng):
    model = DDPvMFMeans(DdpConfig(-0.5))
    model.step(blob(rng, [0, 0, 1], 10))
    with pytest.raises(ValueError):
        model.step(np.zeros((0, 3)))
    with pytest.raises(ValueError):
        model.step(blob(rng, [0, 0, 0, 1], 10))


def test_permanent_removal_short():
    # Q = lam / 2: survives 2 absent steps, removed at dt = 3
    rng = np.random.default_rng(3)
    lam = -0.5
    model = DDPvMFMeans(DdpConfig(lam, Q=lam / 2))
    model.step(blob(rng, [0, 0, 1], 50))
    seen_removed = []
    for t in range(1, 6):
        r = model.step(blob(rng, [0, 0, -1], 50))
        seen_removed += r.removed_ids
        if t < 3:
            assert 0 in [c.id for c in model.clusters]
    assert seen_removed == [0]
    assert 0 not in [c.id for c in model.clusters]
    assert model.ledger()["removed"] == [0]
