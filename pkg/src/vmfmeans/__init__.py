"""Small-variance asymptotic clustering of unit vectors.

Batch DP-vMF-means, streaming DDP-vMF-means, and a spherical k-means
baseline, with synthetic data generators and evaluation metrics.
"""

from .ddp import ClusterState, DdpConfig, DDPvMFMeans, FrameResult
from .dp import DpConfig, DPvMFMeans, FitResult, angle_from_lambda, lambda_from_angle
from .geodesic import (AngleSolution, NonConvergence, NoPrincipalSolution, TransitionParams,
                       dead_cluster_score, solve_transition_angles)
from .metrics import LengthMismatch, SingleCluster, nmi, silhouette_cosine
from .sphere import DegenerateGeodesic, DegenerateVector, DimensionMismatch
from .spkm import SpkmConfig
from .synth import SeparationInfeasible, StreamScenario, SynthSpec, generate, generate_stream

__all__ = [
    "AngleSolution", "ClusterState", "DDPvMFMeans", "DPvMFMeans", "DdpConfig",
    "DegenerateGeodesic", "DegenerateVector", "DimensionMismatch", "DpConfig",
    "FitResult", "FrameResult", "LengthMismatch", "NoPrincipalSolution",
    "NonConvergence", "SeparationInfeasible", "SingleCluster", "SpkmConfig",
    "StreamScenario", "SynthSpec", "TransitionParams", "angle_from_lambda",
    "dead_cluster_score", "generate", "generate_stream", "lambda_from_angle", "nmi",
    "silhouette_cosine", "solve_transition_angles",
]
__version__ = "0.1.0"
