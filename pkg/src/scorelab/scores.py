r"""Closed-form optimal scores, Tweedie conversions and denoising targets.

For a finite clean set S the optimal denoising-trained score at time t is
the score of the mixture ``(1/n) sum_i N(x; alpha_t x_i, sigma_t^2 I)``: a
softmax-weighted attraction toward the scaled training points.  For a set
noised once at level t_n the corresponding object for t > t_n is the score
of the mixture with means ``sqrt((1-sigma_t^2)/(1-sigma_{t_n}^2)) x_{t_n}``
and variance ``(sigma_t^2 - sigma_{t_n}^2)/(1-sigma_{t_n}^2)``.

Scores and posterior-mean denoisers are interchangeable through

    score(x, t) = (sqrt(1 - sigma_t^2) * E[x_0 | x_t = x] - x) / sigma_t^2,

and the pair (a, b) with ``E[x_{t_n}|x_t] = a E[x_0|x_t] + b x_t`` lets a
denoiser trained only on noisy data target the noisy points directly.
"""

from __future__ import annotations

import numpy as np

from ._backend import mixture_score_kernel
from .samples import SampleSet
from .schedule import NoiseSchedule

__all__ = [
    "ScoreField",
    "EmpiricalDDPMScore",
    "EmpiricalAmbientScore",
    "AnalyticGaussianScore",
    "LearnedScore",
    "empirical_ddpm_score",
    "empirical_ambient_score",
    "analytic_gaussian_score",
    "denoiser_to_score",
    "score_to_denoiser",
    "ambient_denoiser_coeffs",
    "v_prediction_target",
]


def _as_batch(x):
    x = np.ascontiguousarray(np.asarray(x, dtype=np.float64))
    if x.ndim == 1:
        return x[None, :], True
    if x.ndim == 2:
        return x, False
    raise ValueError("points must be 1-d or 2-d arrays")


class ScoreField:
    """Evaluable score s(x, t).

    Immutable; ``score`` takes a single point, ``score_batch`` a matrix of
    points evaluated independently (batching never changes per-point
    results).  ``t_floor`` is the largest time the field is *not*
    evaluable at; the sampler only asks for times strictly above it.
    """

    sched: NoiseSchedule
    t_floor: float = 0.0

    def score_batch(self, x, t):  # pragma: no cover - interface
        raise NotImplementedError

    def score(self, x, t):
        batch, single = _as_batch(x)
        out = self.score_batch(batch, t)
        return out[0] if single else out

    def _check_time(self, t):
        if not self.t_floor < t <= self.sched.t_max:
            raise ValueError(f"field not defined at t={t} (needs t > {self.t_floor})")


class EmpiricalDDPMScore(ScoreField):
    """Optimal score for the empirical distribution of a clean set."""

    def __init__(self, data: SampleSet, sched: NoiseSchedule):
        if not data.is_clean:
            raise ValueError("empirical DDPM score expects a clean sample set")
        self.data = data
        self.sched = sched
        self.t_floor = 0.0

    def score_batch(self, x, t):
        self._check_time(t)
        x, _ = _as_batch(x)
        out = np.empty_like(x)
        sigma = self.sched.sigma(t)
        alpha = float(self.sched.alpha(t))
        mixture_score_kernel(self.data.points, x, alpha, sigma * sigma, out)
        return out


class EmpiricalAmbientScore(ScoreField):
    """Score of the distribution induced by bridge-noising a noisy set.

    Defined for t strictly above the set's noising time t_n; at t -> t_n
    the mixture collapses onto the noisy points themselves.
    """

    def __init__(self, data: SampleSet, sched: NoiseSchedule):
        if data.is_clean:
            raise ValueError("ambient score expects a noised sample set")
        self.data = data
        self.sched = sched
        self.t_n = float(data.noised_at)
        self.t_floor = self.t_n

    def score_batch(self, x, t):
        self._check_time(t)
        x, _ = _as_batch(x)
        out = np.empty_like(x)
        c1, c2 = self.sched.bridge_coeffs(t, self.t_n)
        mixture_score_kernel(self.data.points, x, float(c1), float(c2) ** 2, out)
        return out


class AnalyticGaussianScore(ScoreField):
    """Exact score when the clean distribution is N(mu, Sigma)."""

    def __init__(self, mu, Sigma, sched: NoiseSchedule):
        self.mu = np.asarray(mu, dtype=np.float64)
        Sigma = np.asarray(Sigma, dtype=np.float64)
        if Sigma.ndim == 0:
            Sigma = Sigma.reshape(1, 1)
        if Sigma.shape != (self.mu.size, self.mu.size) or not np.allclose(Sigma, Sigma.T):
            raise ValueError("Sigma must be a symmetric d x d matrix")
        evals, evecs = np.linalg.eigh(Sigma)
        if np.any(evals <= 0):
            raise ValueError("Sigma must be positive definite")
        self._evals = evals
        self._evecs = evecs
        self.sched = sched
        self.t_floor = 0.0

    def score_batch(self, x, t):
        self._check_time(t)
        x, _ = _as_batch(x)
        sigma2 = self.sched.sigma(t) ** 2
        alpha = self.sched.alpha(t)
        # marginal covariance (1-sigma^2) Sigma + sigma^2 I, inverted via eigh
        inv = 1.0 / ((1.0 - sigma2) * self._evals + sigma2)
        centered = x - alpha * self.mu
        return -((centered @ self._evecs) * inv) @ self._evecs.T


class LearnedScore(ScoreField):
    """Score backed by a denoiser network snapshot via Tweedie's formula."""

    def __init__(self, net, sched: NoiseSchedule):
        self.net = net
        self.sched = sched
        self.t_floor = 0.0

    def score_batch(self, x, t):
        self._check_time(t)
        x, _ = _as_batch(x)
        sigma = self.sched.sigma(t)
        h = self.net.forward(x, np.full(x.shape[0], sigma))
        return (self.sched.alpha(t) * h - x) / sigma**2


# -- functional entry points ----------------------------------------------


def empirical_ddpm_score(data: SampleSet, x, t, sched: NoiseSchedule):
    """Softmax-weighted attraction score for a clean set; see module docs."""
    return EmpiricalDDPMScore(data, sched).score(x, t)


def empirical_ambient_score(data: SampleSet, x, t, sched: NoiseSchedule):
    """Exact score of the bridge mixture over a noised set, t > t_n."""
    return EmpiricalAmbientScore(data, sched).score(x, t)


def analytic_gaussian_score(mu, Sigma, x, t, sched: NoiseSchedule):
    return AnalyticGaussianScore(mu, Sigma, sched).score(x, t)


def denoiser_to_score(h, x, t, sched: NoiseSchedule):
    """Map a posterior-mean denoiser value to the score at (x, t)."""
    sigma2 = sched.sigma(t) ** 2
    return (sched.alpha(t) * np.asarray(h) - np.asarray(x)) / sigma2


def score_to_denoiser(s, x, t, sched: NoiseSchedule):
    """Inverse of :func:`denoiser_to_score`."""
    sigma2 = sched.sigma(t) ** 2
    return (sigma2 * np.asarray(s) + np.asarray(x)) / sched.alpha(t)


def ambient_denoiser_coeffs(t, t_n, sched: NoiseSchedule):
    """Pair (a, b) with E[x_{t_n} | x_t] = a * E[x_0 | x_t] + b * x_t.

    a = (sigma_t^2 - sigma_{t_n}^2) / (sigma_t^2 sqrt(1 - sigma_{t_n}^2)),
    b = (sigma_{t_n}^2 / sigma_t^2) sqrt((1 - sigma_t^2)/(1 - sigma_{t_n}^2)).
    """
    if not t > t_n:
        raise ValueError("ambient coefficients require t > t_n")
    s_t2 = sched.sigma(t) ** 2
    s_n2 = sched.sigma(t_n) ** 2
    a = (s_t2 - s_n2) / (s_t2 * np.sqrt(1.0 - s_n2))
    b = (s_n2 / s_t2) * np.sqrt((1.0 - s_t2) / (1.0 - s_n2))
    return float(a), float(b)


def v_prediction_target(x_tn, x_t, z, t, t_n, sched: NoiseSchedule):
    """v-parameterization training target for a sample noised at t_n.

    v = alpha_t z - sigma_t (x_{t_n} - b x_t) / a with (a, b) from
    :func:`ambient_denoiser_coeffs`; for t_n = 0 this is the usual
    alpha_t z - sigma_t x_0.
    """
    a, b = ambient_denoiser_coeffs(t, t_n, sched)
    alpha_t = sched.alpha(t)
    sigma_t = sched.sigma(t)
    return alpha_t * np.asarray(z) - sigma_t * (np.asarray(x_tn) - b * np.asarray(x_t)) / a
