r"""Cluster separation and merging of Gaussian mixture components under noise.

For identity-covariance components the total variation distance reduces to
one dimension:  TV(N(mu1, I), N(mu2, I)) = 2 Phi(||mu1 - mu2|| / 2) - 1.
The forward corruption contracts means by sqrt(1 - sigma_t^2) and keeps
unit covariance, so TV decreases monotonically with noise: originally
distinct clusters merge as sigma_t -> 1.

Two components count as epsilon-separated when TV > 2 epsilon and as
epsilon-merged when TV <= epsilon.  ``merge_sigma_threshold`` and
``separation_sigma_threshold`` give sufficient noise levels for each
status, derived from the linear two-sided bounds
``||mu - mu'||/200 <= TV <= ||mu - mu'||/sqrt(2)`` valid for well-separated
small-TV pairs; the exact TV makes their implications checkable.
"""

from __future__ import annotations

import math

import numpy as np

from . import rng

__all__ = [
    "tv_identity_gaussians",
    "tv_at_noise",
    "merge_and_separation_status",
    "merge_sigma_threshold",
    "separation_sigma_threshold",
    "smoothed_single_rep_check",
]


def tv_identity_gaussians(mu1, mu2) -> float:
    """Exact TV between N(mu1, I) and N(mu2, I)."""
    mu1, mu2 = np.asarray(mu1, dtype=np.float64), np.asarray(mu2, dtype=np.float64)
    if mu1.shape != mu2.shape:
        raise ValueError("means must share a dimension")
    delta = float(np.linalg.norm(mu1 - mu2))
    # 2 Phi(delta/2) - 1 written through erf
    return math.erf(delta / (2.0 * math.sqrt(2.0)))


def tv_at_noise(mu1, mu2, sigma_t: float) -> float:
    """TV between the components after corruption at level sigma_t."""
    if not 0.0 <= sigma_t < 1.0:
        raise ValueError("sigma_t must lie in [0, 1)")
    alpha = math.sqrt(1.0 - sigma_t**2)
    return tv_identity_gaussians(alpha * np.asarray(mu1), alpha * np.asarray(mu2))


def merge_and_separation_status(mu1, mu2, sigma_t: float, epsilon: float) -> str:
    """Classify a pair at a noise level: "separated", "merged" or "neither"."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    tv = tv_at_noise(mu1, mu2, sigma_t)
    if tv > 2.0 * epsilon:
        return "separated"
    if tv <= epsilon:
        return "merged"
    return "neither"


def merge_sigma_threshold(mu1, mu2, epsilon: float) -> float:
    """Noise level beyond which the pair is guaranteed epsilon-merged.

    From TV <= ||contracted gap||/sqrt(2): sigma >= sqrt(1 - 2 (eps/gap)^2)
    suffices; 0 when even the clean pair is already close enough.
    """
    gap = float(np.linalg.norm(np.asarray(mu1, float) - np.asarray(mu2, float)))
    if gap == 0.0:
        return 0.0
    arg = 1.0 - 2.0 * (epsilon / gap) ** 2
    return math.sqrt(arg) if arg > 0.0 else 0.0


def separation_sigma_threshold(mu1, mu2, epsilon: float):
    """Noise level below which the pair is guaranteed epsilon-separated.

    From TV >= ||contracted gap||/200: sigma <= sqrt(1 - (400 eps/gap)^2)
    suffices.  Returns None when no noise level can be certified.
    """
    gap = float(np.linalg.norm(np.asarray(mu1, float) - np.asarray(mu2, float)))
    if gap == 0.0:
        return None
    arg = 1.0 - (400.0 * epsilon / gap) ** 2
    return math.sqrt(arg) if arg > 0.0 else None


def smoothed_single_rep_check(x0, m: int, sigma_t: float, eps_target: float, seed: int):
    """Do m noisy copies of one point stay within eps of each other?

    Draws x_i = sqrt(1-sigma_t^2) x0 + sigma_t z_i and returns
    (all pairwise distances <= eps_target, observed maximum distance).
    At small sigma_t the copies concentrate, so a cluster known through a
    single example still looks like a single tight cluster after noising.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if not 0.0 <= sigma_t < 1.0:
        raise ValueError("sigma_t must lie in [0, 1)")
    x0 = np.asarray(x0, dtype=np.float64)
    gen = rng.stream("smoothed-rep", seed)
    copies = math.sqrt(1.0 - sigma_t**2) * x0 + sigma_t * gen.standard_normal((m, x0.size))
    diffs = copies[:, None, :] - copies[None, :, :]
    max_dist = float(np.sqrt(np.einsum("ijk,ijk->ij", diffs, diffs)).max())
    return max_dist <= eps_target, max_dist
