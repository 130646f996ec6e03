"""Built-in toy datasets and flat-matrix file loading."""

from __future__ import annotations

import numpy as np

from . import rng
from .samples import SampleSet

__all__ = ["gauss_ring", "load_points", "save_points"]


def gauss_ring(n: int, seed: int, modes: int = 8, radius: float = 2.0, spread: float = 0.25,
               stream_name: str = "dataset") -> SampleSet:
    """n points from a ring of equally weighted 2-D Gaussian modes.

    Points are assigned to modes round-robin so every mode is populated
    evenly; ``stream_name`` lets callers draw disjoint train/held-out sets
    from the same distribution.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    gen = rng.stream(stream_name, seed)
    angles = 2.0 * np.pi * np.arange(modes) / modes
    centers = radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    which = np.arange(n) % modes
    pts = centers[which] + spread * gen.standard_normal((n, 2))
    return SampleSet(pts)


def load_points(path) -> SampleSet:
    """Read a clean sample set from a comma-separated numeric file."""
    pts = np.loadtxt(path, delimiter=",", ndmin=2)
    return SampleSet(pts)


def save_points(path, points: np.ndarray):
    np.savetxt(path, np.atleast_2d(points), delimiter=",", fmt="%.17g")
