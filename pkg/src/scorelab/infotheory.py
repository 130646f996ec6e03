r"""Information leakage of denoising targets, in closed form and by simulation.

For a Gaussian source x_0 ~ N(mu, Sigma) observed through the corruption
``x_{t_n} = sqrt(1-sigma^2) x_0 + sigma z``, the mutual information between
the source and the noisy observation is

    I = (1/2) log det( (1-sigma^2)/sigma^2 * Sigma + I )   [nats].

A model that can only replay the single noisy observation leaks exactly I
no matter how many samples are drawn from it, while a model that draws m
fresh corruptions of x_0 leaks m * I.  All quantities use natural logs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng

__all__ = ["MIResult", "mi_single_point", "mi_dataset_bound", "mi_monte_carlo_gaussian"]

_RIDGE = 1e-12


@dataclass(frozen=True)
class MIResult:
    mi_ambient: float  # nats leaked by replaying one noisy copy
    mi_ddpm: float  # nats leaked by m fresh corruptions (= m * mi_ambient)
    regularized: bool  # Sigma was ridged to restore positive definiteness


def mi_single_point(Sigma, sigma_tn: float, m: int) -> MIResult:
    """Leakage about a single Gaussian point; see module docstring."""
    if not 0.0 < sigma_tn < 1.0:
        raise ValueError("sigma_tn must lie strictly inside (0, 1)")
    if m < 1:
        raise ValueError("m must be >= 1")
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=np.float64))
    if Sigma.shape[0] != Sigma.shape[1] or not np.allclose(Sigma, Sigma.T):
        raise ValueError("Sigma must be square symmetric")
    evals = np.linalg.eigvalsh(Sigma)
    if evals.min() < -1e-10:
        raise ValueError("Sigma must be positive semi-definite")
    regularized = bool(evals.min() < _RIDGE)
    if regularized:
        Sigma = Sigma + _RIDGE * np.eye(Sigma.shape[0])
    snr = (1.0 - sigma_tn**2) / sigma_tn**2
    _, logdet = np.linalg.slogdet(snr * Sigma + np.eye(Sigma.shape[0]))
    mi = 0.5 * logdet
    return MIResult(mi_ambient=mi, mi_ddpm=m * mi, regularized=regularized)


def mi_dataset_bound(d: int, sigma_tn: float, m: int) -> float:
    """Upper bound m * d/2 * log(1/sigma_tn^2) on dataset leakage, in nats."""
    if not 0.0 < sigma_tn <= 1.0:
        raise ValueError("sigma_tn must lie in (0, 1]")
    if d < 1 or m < 1:
        raise ValueError("d and m must be >= 1")
    return m * d / 2.0 * math.log(1.0 / sigma_tn**2)


def mi_monte_carlo_gaussian(sigma_tn: float, draws: int, seed: int) -> float:
    """Simulation estimate of the d=1, Sigma=1 leakage.

    Draws (x_0, x_{t_n}) pairs, computes the sample correlation and applies
    the jointly-Gaussian identity I = -(1/2) log(1 - rho^2).  Accumulation
    is chunked in fixed order, so the estimate depends only on the seed.
    """
    if draws < 10_000:
        raise ValueError("need at least 1e4 draws")
    if not 0.0 < sigma_tn < 1.0:
        raise ValueError("sigma_tn must lie strictly inside (0, 1)")
    gen = rng.stream("mi-monte-carlo", seed)
    alpha = math.sqrt(1.0 - sigma_tn**2)
    sums = np.zeros(5)  # x, y, x^2, y^2, xy
    remaining = draws
    while remaining:
        k = min(remaining, 1 << 18)
        x = gen.standard_normal(k)
        y = alpha * x + sigma_tn * gen.standard_normal(k)
        sums += [x.sum(), y.sum(), (x * x).sum(), (y * y).sum(), (x * y).sum()]
        remaining -= k
    ex, ey, exx, eyy, exy = sums / draws
    rho2 = (exy - ex * ey) ** 2 / ((exx - ex * ex) * (eyy - ey * ey))
    return -0.5 * math.log(1.0 - rho2)
