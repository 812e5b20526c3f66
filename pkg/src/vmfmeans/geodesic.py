"""Transition geometry for DDP-vMF-means.

A tracked cluster with previous mean ``m`` and weight ``w`` that is matched
to data direction ``x`` after ``dt`` random-walk steps of stiffness ``beta``
has its optimal walk laid out on the geodesic from ``m`` to ``x``. The walk
is described by three angles

    theta : m        -> mu_0        (weight w)
    phi   : mu_{n-1} -> mu_n        (weight beta, repeated dt times)
    eta   : mu_dt    -> x           (weight rho)

which satisfy ``w sin(theta) = beta sin(phi) = rho sin(eta)`` and
``theta + dt*phi + eta = zeta`` where ``zeta`` is the angle between m and x.

The principal solution (all angles acute) is found by eliminating theta and
phi and running a safeguarded Newton iteration on eta. When the principal
branch has no root, ``allow_obtuse=True`` solves the branch in which the
angle carrying the smallest weight is obtuse.

All array routines act elementwise and each element follows exactly the same
floating point path it would follow alone, so vectorized and scalar calls
give bit-identical results.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

HALF_PI = 0.5 * np.pi
MAX_ITER = 100
TOL = 1e-12
# residual accepted from the bisection-only obtuse branch
OBTUSE_TOL = 1e-10


class NoPrincipalSolution(ArithmeticError):
    """The angle system has no root with all three angles in [0, pi/2]."""


class NonConvergence(ArithmeticError):
    pass


@dataclass(frozen=True)
class TransitionParams:
    w: float
    beta: float
    dt: int
    rho: float = 1.0

    def __post_init__(self):
        if not (self.w > 0 and np.isfinite(self.w)):
            raise ValueError(f"w must be positive and finite, got {self.w}")
        if not (self.beta > 0 and np.isfinite(self.beta)):
            raise ValueError(f"beta must be positive and finite, got {self.beta}")
        if int(self.dt) != self.dt or self.dt < 1:
            raise ValueError(f"dt must be a positive integer, got {self.dt}")
        if not (self.rho > 0 and np.isfinite(self.rho)):
            raise ValueError(f"rho must be positive and finite, got {self.rho}")


@dataclass(frozen=True)
class AngleSolution:
    theta: float
    phi: float
    eta: float
    f_star: float


def _one_minus_cos(x):
    s = np.sin(0.5 * x)
    return 2.0 * s * s


def principal_limit(params: TransitionParams) -> float:
    """Largest zeta for which the all-acute branch has a root."""
    w, beta, dt, rho = params.w, params.beta, params.dt, params.rho
    s = min(1.0, w / rho, beta / rho)
    return float(
        np.arcsin(min(1.0, rho * s / w))
        + dt * np.arcsin(min(1.0, rho * s / beta))
        + np.arcsin(s)
    )


def _principal_eta(zeta, w, beta, dt, rho):
    """Safeguarded Newton on g(eta) = asin(a sin eta) + dt asin(b sin eta) + eta - zeta.

    Returns eta and a boolean mask of elements that have no principal root.
    """
    a = rho / w
    b = rho / beta
    hi = np.minimum(zeta, HALF_PI)
    if a > 1.0:
        hi = np.minimum(hi, np.arcsin(1.0 / a))
    if b > 1.0:
        hi = np.minimum(hi, np.arcsin(1.0 / b))
    lo = np.zeros_like(zeta)

    def g(eta, z):
        s = np.sin(eta)
        return (np.arcsin(np.minimum(a * s, 1.0))
                + dt * np.arcsin(np.minimum(b * s, 1.0)) + eta - z)

    def dg(eta):
        s = np.sin(eta)
        c = np.cos(eta)
        with np.errstate(divide="ignore", invalid="ignore"):
            return 1.0 + c * (a / np.sqrt(1.0 - (a * s) ** 2)
                              + dt * b / np.sqrt(1.0 - (b * s) ** 2))

    g_hi = g(hi, zeta)
    nosol = g_hi < -TOL
    eta = np.empty_like(zeta)
    at_hi = (g_hi <= 0.0) & ~nosol
    eta[at_hi] = hi[at_hi]

    # small-angle linearization, exact as zeta -> 0
    eta0 = zeta * (1.0 / rho) / (1.0 / w + dt / beta + 1.0 / rho)
    active = np.flatnonzero(~nosol & ~at_hi)
    e = np.clip(eta0[active], lo[active], hi[active])
    l_ = lo[active]
    h_ = hi[active]
    z_ = zeta[active]
    for _ in range(MAX_ITER):
        if active.size == 0:
            break
        gv = g(e, z_)
        done = np.abs(gv) <= TOL
        if np.any(done):
            eta[active[done]] = e[done]
            keep = ~done
            active, e, l_, h_, z_, gv = (active[keep], e[keep], l_[keep],
                                         h_[keep], z_[keep], gv[keep])
            if active.size == 0:
                break
        neg = gv < 0.0
        l_ = np.where(neg, e, l_)
        h_ = np.where(neg, h_, e)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = e - gv / dg(e)
        bad = ~np.isfinite(step) | (step <= l_) | (step >= h_)
        step = np.where(bad, 0.5 * (l_ + h_), step)
        # bracket collapsed to adjacent floats: the residual cannot shrink further
        stuck = (step == e) | (h_ - l_ <= 4.0 * np.finfo(float).eps * np.maximum(h_, 1e-300))
        if np.any(stuck):
            final = g(step[stuck], z_[stuck])
            if np.any(np.abs(final) > 1e3 * TOL):
                raise NonConvergence("Newton bracket collapsed above the residual target")
            eta[active[stuck]] = step[stuck]
            keep = ~stuck
            active, step, l_, h_, z_ = (active[keep], step[keep], l_[keep],
                                        h_[keep], z_[keep])
        e = step
    if active.size:
        raise NonConvergence(f"{active.size} angle solves did not reach |g| <= {TOL}")
    return eta, nosol


def _obtuse_branch(zeta, w, beta, dt, rho):
    """Angles when the smallest-weight angle is obtuse; bisection on that angle."""
    coeffs = {"theta": w, "eta": rho}
    if dt == 1:
        coeffs["phi"] = beta
    which = min(coeffs, key=coeffs.get)
    c = coeffs[which]
    if beta < c and dt > 1:
        raise NoPrincipalSolution("obtuse random-walk step with dt > 1 is not supported")
    others = [(w, 1, "theta"), (beta, dt, "phi"), (rho, 1, "eta")]
    others = [o for o in others if o[2] != which]

    def H(psi):
        L = c * np.sin(psi)
        tot = psi - zeta
        for coef, mult, _ in others:
            tot = tot + mult * np.arcsin(np.minimum(L / coef, 1.0))
        return tot

    lo = np.full_like(zeta, HALF_PI)
    hi = np.full_like(zeta, np.pi)
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        pos = H(mid) >= 0.0
        hi = np.where(pos, mid, hi)
        lo = np.where(pos, lo, mid)
    psi = np.where(np.abs(H(hi)) <= np.abs(H(lo)), hi, lo)
    if np.any(np.abs(H(psi)) > OBTUSE_TOL):
        raise NonConvergence("obtuse-branch bisection did not reach the residual target")
    L = c * np.sin(psi)
    out = {which: psi}
    for coef, _, name in others:
        out[name] = np.arcsin(np.minimum(L / coef, 1.0))
    return out["theta"], out["phi"], out["eta"]


def transition_angles(zeta, w, beta, dt, rho=1.0, allow_obtuse=False):
    """Vectorized angle solve. Returns (theta, phi, eta) arrays shaped like ``zeta``."""
    TransitionParams(w, beta, dt, rho)
    zeta = np.atleast_1d(np.asarray(zeta, dtype=np.float64))
    if np.any((zeta < 0) | (zeta > np.pi)):
        raise ValueError("zeta must lie in [0, pi]")
    eta, nosol = _principal_eta(zeta, w, beta, dt, rho)
    s = np.sin(eta)
    theta = np.arcsin(np.minimum(rho * s / w, 1.0))
    phi = np.arcsin(np.minimum(rho * s / beta, 1.0))
    if np.any(nosol):
        if not allow_obtuse:
            bad = zeta[nosol][0]
            raise NoPrincipalSolution(
                f"no all-acute solution for zeta={bad:.6g} (w={w}, beta={beta}, dt={dt}, rho={rho})")
        th, ph, et = _obtuse_branch(zeta[nosol], w, beta, dt, rho)
        theta[nosol], phi[nosol], eta[nosol] = th, ph, et
    return theta, phi, eta


def objective_value(theta, phi, eta, w, beta, dt, rho=1.0):
    return w * np.cos(theta) + beta * dt * np.cos(phi) + rho * np.cos(eta)


def solve_transition_angles(zeta: float, params: TransitionParams,
                            allow_obtuse: bool = False) -> AngleSolution:
    """Solve the angle system for a single ``zeta``.

    Raises
    ------
    NoPrincipalSolution
        If no all-acute root exists and ``allow_obtuse`` is False.
    NonConvergence
        If the iteration stalls above the residual target.
    """
    p = params
    th, ph, et = transition_angles(np.array([zeta]), p.w, p.beta, p.dt, p.rho, allow_obtuse)
    f = objective_value(th[0], ph[0], et[0], p.w, p.beta, p.dt, p.rho)
    return AngleSolution(float(th[0]), float(ph[0]), float(et[0]), float(f))


def dead_cluster_scores(zeta, w, beta, dt, Q, allow_obtuse=False):
    """Label score of a tracked-but-unobserved cluster, elementwise in ``zeta``.

    ``dt*beta*(cos phi - 1) + w*(cos theta - 1) + cos eta + dt*Q``, with the
    cosine deficits evaluated as ``2 sin^2(x/2)`` so large weights keep precision.
    """
    if Q > 0:
        raise ValueError("Q must be <= 0")
    theta, phi, eta = transition_angles(zeta, w, beta, dt, 1.0, allow_obtuse)
    return (-dt * beta * _one_minus_cos(phi) - w * _one_minus_cos(theta)
            + np.cos(eta) + dt * Q)


def dead_cluster_score(zeta: float, params: TransitionParams, Q: float,
                       allow_obtuse: bool = False) -> float:
    if params.rho != 1.0:
        raise ValueError("dead-cluster scoring uses rho = 1")
    p = params
    return float(dead_cluster_scores(np.array([zeta]), p.w, p.beta, p.dt, Q, allow_obtuse)[0])


def revival_threshold(params: TransitionParams, Q: float, lam: float,
                      allow_obtuse: bool = False) -> float:
    """Largest angle from the tracked mean at which revival can still beat a new cluster.

    Returns ``zeta_max`` with ``dead_cluster_score(zeta_max) == lam + 1``; 0 when
    the cluster cannot be revived at all; pi when even the antipode qualifies.
    """
    target = lam + 1.0

    def h(z):
        return dead_cluster_score(z, params, Q, allow_obtuse) - target

    if h(0.0) <= 0.0:
        return 0.0
    upper = np.pi if allow_obtuse else min(np.pi, principal_limit(params))
    hu = h(upper)
    if hu >= 0.0:
        if upper < np.pi:
            raise NoPrincipalSolution("revival threshold lies beyond the all-acute branch")
        return float(np.pi)
    return float(brentq(h, 0.0, upper, xtol=1e-15, rtol=1e-15, maxiter=200))
