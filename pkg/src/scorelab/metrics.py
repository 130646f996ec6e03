"""Memorization and quality metrics for generated sample sets.

Memorization is measured in raw coordinate space: each generated point is
matched to its nearest training point (Euclidean, ties to the lowest
index) and the report aggregates the cosine similarities and distances of
those matches.  Quality is measured against a reference set either by the
closed-form Frechet distance between fitted Gaussians or by the exact
empirical 2-Wasserstein distance from an optimal assignment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .samples import SampleSet

__all__ = [
    "MemorizationReport",
    "nn_similarity",
    "memorization_fraction",
    "FrechetResult",
    "gaussian_frechet",
    "exact_w2",
    "pareto_sweep",
]


@dataclass(frozen=True)
class MemorizationReport:
    similarities: np.ndarray  # cosine similarity to the matched neighbor
    distances: np.ndarray  # Euclidean distance to the matched neighbor
    nn_indices: np.ndarray
    threshold_fractions: dict  # {similarity threshold: fraction above}
    mean_similarity: float
    p95_similarity: float


def nn_similarity(gen: SampleSet, train: SampleSet, thresholds=()) -> MemorizationReport:
    """Nearest-training-neighbor report for every generated point."""
    if gen.dim != train.dim:
        raise ValueError("dimension mismatch between generated and training sets")
    dists = cdist(gen.points, train.points)
    idx = np.argmin(dists, axis=1)  # argmin takes the lowest index on ties
    nn_dist = dists[np.arange(gen.n), idx]
    matched = train.points[idx]
    norms = np.linalg.norm(gen.points, axis=1) * np.linalg.norm(matched, axis=1)
    dots = np.einsum("ij,ij->i", gen.points, matched)
    sims = np.divide(dots, norms, out=np.zeros(gen.n), where=norms > 0)
    fractions = {float(th): float(np.mean(sims > th)) for th in sorted(thresholds)}
    return MemorizationReport(
        similarities=sims,
        distances=nn_dist,
        nn_indices=idx,
        threshold_fractions=fractions,
        mean_similarity=float(np.mean(sims)),
        p95_similarity=float(np.percentile(sims, 95)),
    )


def memorization_fraction(report: MemorizationReport, delta: float) -> float:
    """Fraction of generated points within distance delta of a training point."""
    return float(np.mean(report.distances < delta))


@dataclass(frozen=True)
class FrechetResult:
    value: float
    regularized: bool  # a singular covariance was ridged with 1e-6 I

    def __float__(self):
        return self.value


def _psd_sqrt(mat):
    evals, evecs = np.linalg.eigh(mat)
    return (evecs * np.sqrt(np.clip(evals, 0.0, None))) @ evecs.T


def gaussian_frechet(a: SampleSet, b: SampleSet) -> FrechetResult:
    """Frechet distance between Gaussians fitted to the two sets.

    ||mu_a - mu_b||^2 + tr(S_a + S_b - 2 (S_a^{1/2} S_b S_a^{1/2})^{1/2})
    with sample means and covariances; near-singular covariances are
    ridged with 1e-6 I and flagged.
    """
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    if a.n <= a.dim or b.n <= b.dim:
        raise ValueError("need more samples than dimensions to fit moments")
    mu_a, mu_b = a.points.mean(axis=0), b.points.mean(axis=0)
    cov_a = np.atleast_2d(np.cov(a.points, rowvar=False))
    cov_b = np.atleast_2d(np.cov(b.points, rowvar=False))
    regularized = False
    eps = 1e-12
    for cov in (cov_a, cov_b):
        if np.linalg.eigvalsh(cov).min() < eps:
            cov += 1e-6 * np.eye(a.dim)
            regularized = True
    root_a = _psd_sqrt(cov_a)
    cross = _psd_sqrt(root_a @ cov_b @ root_a)
    value = float(np.sum((mu_a - mu_b) ** 2) + np.trace(cov_a + cov_b - 2.0 * cross))
    return FrechetResult(value=max(value, 0.0), regularized=regularized)


def exact_w2(a: SampleSet, b: SampleSet) -> float:
    """Exact empirical 2-Wasserstein distance via optimal assignment.

    Requires equally sized sets (at most 4096 points; the assignment is
    cubic in n).
    """
    if a.n != b.n:
        raise ValueError("exact W2 needs equally sized sets")
    if a.n > 4096:
        raise ValueError("assignment limited to 4096 points")
    cost = cdist(a.points, b.points, metric="sqeuclidean")
    rows, cols = linear_sum_assignment(cost)
    return float(np.sqrt(cost[rows, cols].mean()))


def pareto_sweep(results):
    """Mark Pareto-optimal (quality, memorization) entries, both minimized.

    ``results`` is an iterable of (sigma_tn, quality, memorization).
    Returns rows (sigma_tn, quality, memorization, on_frontier) sorted by
    sigma_tn.  An entry is dominated only if another is at least as good
    on both axes and strictly better on one, so exact ties stay on the
    frontier.
    """
    rows = sorted((float(s), float(q), float(m)) for s, q, m in results)
    if len(rows) < 2:
        raise ValueError("need at least 2 sweep entries")
    qm = np.array([(q, m) for _, q, m in rows])
    order = np.lexsort((qm[:, 1], qm[:, 0]))  # quality asc, then memorization asc
    on_front = np.ones(len(rows), dtype=bool)
    best_m_before = np.inf  # best memorization among strictly better quality
    i = 0
    while i < len(order):
        j = i
        while j < len(order) and qm[order[j], 0] == qm[order[i], 0]:
            j += 1
        group = order[i:j]
        group_min = qm[group, 1].min()
        for idx in group:
            m = qm[idx, 1]
            on_front[idx] = m < best_m_before and m <= group_min
        best_m_before = min(best_m_before, group_min)
        i = j
    return [(s, q, m, bool(f)) for (s, q, m), f in zip(rows, on_front)]
