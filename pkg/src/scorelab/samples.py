"""Point sets with provenance.

A :class:`SampleSet` is an (n, d) matrix of points that is either clean or
the one-shot noised copy of a clean set at a recorded noise time and seed.
Re-noising with the same seed is bit-identical, which is what makes
checkpointed experiments reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import rng
from .schedule import NoiseSchedule

__all__ = ["SampleSet", "noise_sample_set", "noisy_set_build_count"]

# Instrumentation: incremented on every noised-set construction so tests
# can assert the training loop builds its noisy copy exactly once.
_NOISY_BUILDS = 0


def noisy_set_build_count() -> int:
    return _NOISY_BUILDS


@dataclass(frozen=True)
class SampleSet:
    points: np.ndarray
    noised_at: float | None = None  # t_n of the noising, None for clean sets
    seed: int | None = None  # seed that produced the noise, None for clean sets

    def __post_init__(self):
        pts = np.ascontiguousarray(np.atleast_2d(np.asarray(self.points, dtype=np.float64)))
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError("points must form an (n, d) matrix with n, d >= 1")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        if (self.noised_at is None) != (self.seed is None):
            raise ValueError("noised sets carry both t_n and seed")
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def is_clean(self) -> bool:
        return self.noised_at is None

    @cached_property
    def data_scale(self) -> float:
        """Largest point norm; used to scale distance tolerances."""
        return float(np.max(np.linalg.norm(self.points, axis=1)))


def noise_sample_set(clean: SampleSet, t_n: float, seed: int, sched: NoiseSchedule) -> SampleSet:
    """One noisy copy of each clean point at level t_n.

    x_{t_n} = sqrt(1 - sigma_{t_n}^2) x_0 + sigma_{t_n} eps with one fresh
    eps per point, drawn from a stream keyed by the seed alone.
    """
    global _NOISY_BUILDS
    if not clean.is_clean:
        raise ValueError("can only noise a clean sample set")
    sigma_n = sched.sigma(t_n)
    alpha_n = sched.alpha(t_n)
    eps = rng.substream(seed, 0).standard_normal(clean.points.shape)
    pts = alpha_n * clean.points + sigma_n * eps
    _NOISY_BUILDS += 1
    return SampleSet(points=pts, noised_at=float(t_n), seed=int(seed))
