"""Geometry on the unit hypersphere and von Mises-Fisher sampling.

Points are plain numpy float64 arrays. Functions that produce a direction
always return a vector with unit Euclidean norm (to within rounding).
"""

from __future__ import annotations

import numpy as np

EPS_NORM = 1e-12
# parallel / antiparallel detection for geodesic rotations
EPS_PARALLEL = 1e-12


class DegenerateVector(ValueError):
    """A vector (or vector sum) is too short to be normalized."""


class DegenerateGeodesic(ValueError):
    """Two directions are (anti)parallel, so the geodesic between them is not unique."""


class DimensionMismatch(ValueError):
    pass


def normalize(v, eps: float = EPS_NORM) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v)
    if not n > eps:
        raise DegenerateVector(f"cannot normalize vector of norm {n:.3g}")
    return v / n


def normalize_rows(X, eps: float = EPS_NORM) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    n = np.linalg.norm(X, axis=1)
    bad = np.flatnonzero(~(n > eps))
    if bad.size:
        raise DegenerateVector(f"row {bad[0]} has norm {n[bad[0]]:.3g}")
    return X / n[:, None]


def _check_same_dim(u, v):
    if u.shape != v.shape:
        raise DimensionMismatch(f"dimension mismatch: {u.shape} vs {v.shape}")


def geodesic_angle(u, v) -> float:
    """Great-circle angle between two unit vectors, in [0, pi]."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    _check_same_dim(u, v)
    return float(np.arccos(np.clip(u @ v, -1.0, 1.0)))


def rotate_towards(u, target, angle: float) -> np.ndarray:
    """Move ``u`` along the great circle through ``target`` by ``angle`` radians.

    The result is ``cos(angle) u + sin(angle) t`` with ``t`` the unit tangent
    at ``u`` pointing at ``target``.
    """
    u = np.asarray(u, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    _check_same_dim(u, target)
    if angle == 0.0:
        return u.copy()
    c = float(np.clip(u @ target, -1.0, 1.0))
    tangent = target - c * u
    tn = np.linalg.norm(tangent)
    if tn <= EPS_PARALLEL:
        raise DegenerateGeodesic("u and target are (anti)parallel; rotation plane undefined")
    tangent /= tn
    out = np.cos(angle) * u + np.sin(angle) * tangent
    return out / np.linalg.norm(out)


def weighted_mean_direction(X, indices=None) -> tuple[np.ndarray, float]:
    """Normalized vector sum of the selected rows and the norm of that sum."""
    X = np.asarray(X, dtype=np.float64)
    rows = X if indices is None else X[np.asarray(indices)]
    if rows.shape[0] == 0:
        raise ValueError("empty index set")
    s = rows.sum(axis=0)
    n = float(np.linalg.norm(s))
    if not n > EPS_NORM:
        raise DegenerateVector(f"vector sum has norm {n:.3g}")
    return s / n, n


class MeanAccumulator:
    """Running (sum, count) over unit vectors."""

    def __init__(self, dim: int):
        self.sum = np.zeros(dim)
        self.count = 0

    def add(self, x):
        self.sum += x
        self.count += 1

    def remove(self, x):
        if self.count == 0:
            raise ValueError("accumulator is empty")
        self.sum -= x
        self.count -= 1

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.sum))

    def direction(self) -> np.ndarray:
        return normalize(self.sum)


def sample_uniform_sphere(D: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Uniform draw(s) on S^{D-1}: normalized isotropic Gaussians."""
    if D < 2:
        raise ValueError("D must be >= 2")
    n = 1 if size is None else size
    g = rng.standard_normal((n, D))
    norms = np.linalg.norm(g, axis=1)
    # probability-zero event, but redraw rather than divide by zero
    while np.any(norms <= EPS_NORM):
        bad = norms <= EPS_NORM
        g[bad] = rng.standard_normal((int(bad.sum()), D))
        norms = np.linalg.norm(g, axis=1)
    out = g / norms[:, None]
    return out[0] if size is None else out


def _wood_cosines(tau: float, D: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Rejection sampler (Wood 1994) for w = mu^T x under vMF(mu, tau)."""
    d1 = D - 1.0
    # b = (-2 tau + sqrt(4 tau^2 + d1^2)) / d1, rewritten to avoid cancellation
    b = d1 / (2.0 * tau + np.sqrt(4.0 * tau * tau + d1 * d1))
    x0 = (1.0 - b) / (1.0 + b)
    c = tau * x0 + d1 * np.log1p(-x0 * x0)
    out = np.empty(n)
    filled = 0
    while filled < n:
        m = max(n - filled, 16)
        z = rng.beta(d1 / 2.0, d1 / 2.0, size=m)
        w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z)
        u = rng.uniform(size=m)
        ok = tau * w + d1 * np.log1p(-x0 * w) - c >= np.log(u)
        acc = w[ok][: n - filled]
        out[filled:filled + acc.size] = acc
        filled += acc.size
    return out


def sample_vmf(mean, tau: float, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw from the von Mises-Fisher distribution vMF(mean, tau).

    Parameters
    ----------
    mean : array_like, shape (D,)
        Unit mean direction.
    tau : float
        Concentration, ``tau >= 0``. ``tau == 0`` is the uniform law on the sphere.
    rng : numpy.random.Generator
    size : int, optional
        Number of draws. ``None`` returns a single vector.

    Returns
    -------
    ndarray of shape (D,) or (size, D)
    """
    mean = np.asarray(mean, dtype=np.float64)
    D = mean.shape[0]
    if not np.isfinite(tau) or tau < 0:
        raise ValueError(f"tau must be finite and >= 0, got {tau}")
    if abs(np.linalg.norm(mean) - 1.0) > 1e-9:
        raise ValueError("mean must be a unit vector")
    n = 1 if size is None else size
    if tau == 0:
        return sample_uniform_sphere(D, rng, size)
    w = _wood_cosines(float(tau), D, n, rng)
    # uniform tangent direction orthogonal to the mean
    g = rng.standard_normal((n, D))
    g -= np.outer(g @ mean, mean)
    g /= np.linalg.norm(g, axis=1)[:, None]
    s = np.sqrt(np.clip(1.0 - w * w, 0.0, None))
    out = w[:, None] * mean[None, :] + s[:, None] * g
    out /= np.linalg.norm(out, axis=1)[:, None]
    return out[0] if size is None else out


def row_dots(X: np.ndarray, M: np.ndarray) -> np.ndarray:
    """All inner products ``X @ M.T`` with a fixed, shape-independent summation order.

    BLAS kernels may reorder or fuse the reduction depending on the matrix
    shape. Label assignment must give identical results for one point or a
    million, so the sum over coordinates is accumulated explicitly.
    """
    out = X[:, 0:1] * M[None, :, 0]
    for d in range(1, X.shape[1]):
        out += X[:, d:d + 1] * M[None, :, d]
    return out


def row_dots_one(x: np.ndarray, M: np.ndarray) -> np.ndarray:
    """``row_dots(x[None], M)[0]`` with less overhead; same operations, same order."""
    out = x[0] * M[:, 0]
    for d in range(1, M.shape[1]):
        out += x[d] * M[:, d]
    return out
