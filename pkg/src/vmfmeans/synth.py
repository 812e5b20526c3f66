"""Synthetic directional data: vMF mixtures and multi-frame streams."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .sphere import sample_uniform_sphere, sample_vmf

MAX_MEAN_ATTEMPTS = 20000


class SeparationInfeasible(RuntimeError):
    """Could not place the cluster means at the requested pairwise separation."""


@dataclass
class SynthSpec:
    K_T: int = 30
    N: int = 6000
    tau: float = 120.0
    D: int = 3
    min_separation: float = np.deg2rad(20.0)
    weights: list | None = None
    seed: int = 0

    def __post_init__(self):
        if self.K_T < 1:
            raise ValueError("K_T must be >= 1")
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.D < 2:
            raise ValueError("D must be >= 2")
        if self.min_separation < 0:
            raise ValueError("min_separation must be >= 0")
        if self.tau < 0:
            raise ValueError("tau must be >= 0")
        self.weights = _check_weights(self.weights, self.K_T)


def _check_weights(weights, k):
    if weights is None:
        return None
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (k,) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise ValueError(f"weights must be {k} non-negative numbers summing to 1")
    return [float(v) for v in w]


def draw_means(K: int, D: int, min_separation: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform means, rejection-sampled until all pairwise angles reach ``min_separation``."""
    means = np.empty((K, D))
    cos_max = np.cos(min_separation)
    for k in range(K):
        attempts = 0
        while True:
            cand = sample_uniform_sphere(D, rng)
            attempts += 1
            if k == 0 or min_separation == 0 or np.all(means[:k] @ cand <= cos_max):
                means[k] = cand
                break
            if attempts >= MAX_MEAN_ATTEMPTS:
                raise SeparationInfeasible(
                    f"placed {k} of {K} means at {np.rad2deg(min_separation):.3g} deg "
                    f"separation before giving up")
    return means


def draw_points(means: np.ndarray, ids, N: int, tau: float, weights,
                rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Mixture draw: multinomial cluster sizes, then vMF samples, in random order."""
    ids = np.asarray(ids, dtype=np.int64)
    p = np.full(ids.size, 1.0 / ids.size) if weights is None else np.asarray(weights)
    z = ids[rng.choice(ids.size, size=N, p=p)]
    X = np.empty((N, means.shape[1]))
    for k in ids:
        sel = np.flatnonzero(z == k)
        if sel.size:
            X[sel] = sample_vmf(means[k], tau, rng, size=sel.size)
    return X, z


def generate(spec: SynthSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Points, true labels and true means for a vMF mixture."""
    rng = np.random.default_rng(spec.seed)
    means = draw_means(spec.K_T, spec.D, spec.min_separation, rng)
    X, z = draw_points(means, np.arange(spec.K_T), spec.N, spec.tau, spec.weights, rng)
    return X, z, means


@dataclass
class FrameSpec:
    active: list
    N: int | None = None
    tau: float | None = None
    weights: list | None = None


@dataclass
class StreamScenario:
    """Frames drawn from a shared pool of ``base.K_T`` cluster means.

    ``means`` may pin the pool explicitly; otherwise it is drawn from ``base``.
    """

    base: SynthSpec
    frames: list = field(default_factory=list)
    means: np.ndarray | None = None

    def __post_init__(self):
        if not self.frames:
            raise ValueError("a scenario needs at least one frame")
        self.frames = [f if isinstance(f, FrameSpec) else FrameSpec(**f) for f in self.frames]
        if self.means is not None:
            self.means = np.asarray(self.means, dtype=np.float64)
            if self.means.shape != (self.base.K_T, self.base.D):
                raise ValueError("explicit means must have shape (K_T, D)")
        for t, f in enumerate(self.frames):
            if not f.active or min(f.active) < 0 or max(f.active) >= self.base.K_T:
                raise ValueError(f"frame {t}: active ids must be a non-empty subset of range(K_T)")
            if (f.N if f.N is not None else self.base.N) < 1:
                raise ValueError(f"frame {t} is empty")
            f.weights = _check_weights(f.weights, len(f.active))

    @classmethod
    def from_dict(cls, d: dict) -> "StreamScenario":
        base = dict(d.get("base", {}))
        if "min_separation_deg" in base:
            base["min_separation"] = np.deg2rad(base.pop("min_separation_deg"))
        return cls(SynthSpec(**base), [FrameSpec(**f) for f in d["frames"]], d.get("means"))


@dataclass
class Frame:
    X: np.ndarray
    labels: np.ndarray
    means: np.ndarray


def generate_stream(scenario: StreamScenario) -> list[Frame]:
    """Frames in order; labels are global cluster ids shared across frames.

    A single generator seeded by ``base.seed`` draws the means and then every
    frame in turn, so a one-frame scenario over all clusters reproduces
    :func:`generate` exactly.
    """
    b = scenario.base
    rng = np.random.default_rng(b.seed)
    means = (scenario.means.copy() if scenario.means is not None
             else draw_means(b.K_T, b.D, b.min_separation, rng))
    frames = []
    for f in scenario.frames:
        N = f.N if f.N is not None else b.N
        tau = f.tau if f.tau is not None else b.tau
        weights = f.weights
        if weights is None and b.weights is not None and len(f.active) == b.K_T:
            weights = b.weights
        X, z = draw_points(means, f.active, N, tau, weights, rng)
        frames.append(Frame(X, z, means))
    return frames


def tetrahedron() -> np.ndarray:
    """Four unit vectors with pairwise angles arccos(-1/3), about 109.47 degrees."""
    v = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=np.float64)
    return v / np.sqrt(3.0)


def aba_scenario(frames_per_phase: int = 3, n_per_frame: int = 600, tau: float = 200.0,
                 seed: int = 0) -> StreamScenario:
    """Clusters {0, 1} for a phase, then the disjoint {2, 3}, then {0, 1} again."""
    phases = [[0, 1], [2, 3], [0, 1]]
    frames = [FrameSpec(active=list(a), N=n_per_frame)
              for a in phases for _ in range(frames_per_phase)]
    base = SynthSpec(K_T=4, N=n_per_frame, tau=tau, D=3, min_separation=0.0, seed=seed)
    return StreamScenario(base, frames, tetrahedron())
