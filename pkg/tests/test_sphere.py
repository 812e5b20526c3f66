import numpy as np
import pytest
from hypothesis import given, strategies as st

from vmfmeans.sphere import (DegenerateGeodesic, DegenerateVector, DimensionMismatch,
                             MeanAccumulator, geodesic_angle, normalize, normalize_rows,
                             rotate_towards, row_dots, row_dots_one, sample_uniform_sphere, sample_vmf,
                             weighted_mean_direction)

from conftest import random_unit

vec3 = st.lists(st.floats(-10, 10, allow_nan=False), min_size=3, max_size=3).filter(
    lambda v: np.linalg.norm(v) > 1e-3)


def test_normalize_basic():
    np.testing.assert_allclose(normalize([0, 0, 2]), [0, 0, 1])
    with pytest.raises(DegenerateVector):
        normalize([0, 0, 0])
    with pytest.raises(DegenerateVector):
        normalize_rows(np.array([[1.0, 0, 0], [0, 0, 0]]))


def test_geodesic_angle_values():
    assert geodesic_angle([1, 0, 0], [0, 1, 0]) == pytest.approx(np.pi / 2)
    assert geodesic_angle([1, 0, 0], [-1, 0, 0]) == pytest.approx(np.pi)
    # slightly over-unit inner products are clipped
    v = np.array([1.0, 1e-17, 0.0])
    assert geodesic_angle(v, v) == 0.0
    with pytest.raises(DimensionMismatch):
        geodesic_angle([1, 0], [1, 0, 0])


def test_rotate_towards_endpoints():
    u = np.array([1.0, 0, 0])
    t = np.array([0.0, 1, 0])
    np.testing.assert_array_equal(rotate_towards(u, t, 0.0), u)
    np.testing.assert_allclose(rotate_towards(u, t, np.pi / 2), t, atol=1e-15)
    np.testing.assert_allclose(rotate_towards(u, t, np.pi / 6),
                               [np.cos(np.pi / 6), np.sin(np.pi / 6), 0], atol=1e-15)
    with pytest.raises(DegenerateGeodesic):
        rotate_towards(u, -u, 0.3)


@given(vec3, vec3, st.floats(0, np.pi))
def test_rotate_towards_stays_on_great_circle(a, b, ang):
    u, t = normalize(a), normalize(b)
    if np.linalg.norm(t - (u @ t) * u) < 1e-6:
        return
    r = rotate_towards(u, t, ang)
    assert abs(np.linalg.norm(r) - 1) < 1e-12
    assert geodesic_angle(u, r) == pytest.approx(ang, abs=1e-7)
    # r lies in the plane spanned by u and t
    n = np.cross(u, t)
    assert abs(r @ n) / np.linalg.norm(n) < 1e-9


def test_weighted_mean_and_accumulator(rng):
    X = random_unit(rng, 20)
    d, n = weighted_mean_direction(X)
    s = X.sum(axis=0)
    np.testing.assert_allclose(d, s / np.linalg.norm(s))
    assert n == pytest.approx(np.linalg.norm(s))
    acc = MeanAccumulator(3)
    for x in X:
        acc.add(x)
    acc.remove(X[0])
    np.testing.assert_allclose(acc.direction(), normalize(X[1:].sum(axis=0)))
    with pytest.raises(DegenerateVector):
        weighted_mean_direction(np.array([[1.0, 0, 0], [-1.0, 0, 0]]))


def test_uniform_sphere_moments(rng):
    X = sample_uniform_sphere(3, rng, 200000)
    np.testing.assert_allclose(np.linalg.norm(X, axis=1), 1.0)
    np.testing.assert_allclose(X.mean(axis=0), 0.0, atol=0.01)
    np.testing.assert_allclose(X.T @ X / len(X), np.eye(3) / 3, atol=0.01)


@pytest.mark.parametrize("tau", [1.0, 10.0, 120.0, 1e4])
def test_vmf_mean_resultant_length(tau, rng):
    # in D = 3 the mean resultant length is A3(tau) = coth(tau) - 1/tau
    mu = normalize([1.0, 2.0, -0.5])
    n = 100000
    X = sample_vmf(mu, tau, rng, n)
    A3 = 1.0 / np.tanh(tau) - 1.0 / tau
    R = X @ mu
    assert R.mean() == pytest.approx(A3, abs=4 * R.std() / np.sqrt(n) + 1e-12)
    # tangent part is isotropic around the mean
    resid = X - np.outer(R, mu)
    assert np.linalg.norm(resid.mean(axis=0)) < 5 * np.sqrt(max(1 - A3, 1e-12) / n) + 1e-9


def test_vmf_cosine_distribution_matches_cdf(rng):
    # D = 3: P(w <= c) = (exp(tau c) - exp(-tau)) / (exp(tau) - exp(-tau))
    tau = 5.0
    w = sample_vmf(np.array([0, 0, 1.0]), tau, rng, 50000)[:, 2]
    grid = np.linspace(-0.9, 0.99, 20)
    emp = (w[:, None] <= grid[None, :]).mean(axis=0)
    cdf = (np.exp(tau * grid) - np.exp(-tau)) / (np.exp(tau) - np.exp(-tau))
    assert np.max(np.abs(emp - cdf)) < 0.01


def test_vmf_high_dimension_and_tau_zero(rng):
    mu = normalize(np.arange(1.0, 11.0))
    X = sample_vmf(mu, 50.0, rng, 5000)
    assert X.shape == (5000, 10)
    np.testing.assert_allclose(np.linalg.norm(X, axis=1), 1.0)
    U = sample_vmf(mu, 0.0, rng, 20000)
    assert abs((U @ mu).mean()) < 0.03
    with pytest.raises(ValueError):
        sample_vmf(mu, -1.0, rng)
    with pytest.raises(ValueError):
        sample_vmf(2 * mu, 1.0, rng)


def test_row_dots_shape_independent(rng):
    X = random_unit(rng, 1000)
    M = random_unit(rng, 7)
    full = row_dots(X, M)
    np.testing.assert_allclose(full, X @ M.T, atol=1e-15)
    for i in (0, 17, 999):
        np.testing.assert_array_equal(row_dots(X[i:i + 1], M)[0], full[i])
        np.testing.assert_array_equal(row_dots_one(X[i], M), full[i])
        np.testing.assert_array_equal(row_dots(X, M[3:4])[:, 0], full[:, 3])
