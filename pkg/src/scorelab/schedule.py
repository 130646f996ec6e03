r"""Variance-preserving noise schedules.

A schedule maps a time ``t in [0, t_max]`` to a noise level ``sigma(t)``
of the corruption

    x_t = sqrt(1 - sigma(t)^2) * x_0 + sigma(t) * z,    z ~ N(0, I),

with ``sigma`` strictly increasing, ``sigma(0) = 0`` and
``sigma(t_max) = sigma_max < 1``.  The signal coefficient
``alpha(t) = sqrt(1 - sigma(t)^2)`` therefore stays in ``(0, 1]`` and the
marginal variance of unit-variance data is constant in ``t``.

Besides point evaluation the schedule provides the bridge between two
noise levels (noising an already-noisy sample further) and the scalar
coefficient of the deterministic reverse flow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["NoiseSchedule", "linear_schedule", "tabulated_schedule"]

_DSIGMA_FD_STEP = 1e-6  # central-difference step for tabulated schedules


@dataclass(frozen=True)
class NoiseSchedule:
    """Monotone map ``t -> sigma(t)`` with derivative and bridging.

    Immutable after construction; every method is pure.
    """

    kind: str = "linear"
    sigma_max: float = 0.995
    t_min: float = 1e-3
    t_max: float = 1.0
    # knots used only for kind="tabulated": strictly increasing times with
    # strictly increasing sigma values, spanning [0, t_max].
    knot_t: np.ndarray | None = field(default=None, repr=False)
    knot_sigma: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("linear", "tabulated"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if not 0.0 < self.sigma_max < 1.0:
            raise ValueError("sigma_max must lie in (0, 1)")
        if not 0.0 < self.t_min < self.t_max:
            raise ValueError("need 0 < t_min < t_max")
        if self.kind == "tabulated":
            t = np.asarray(self.knot_t, dtype=np.float64)
            s = np.asarray(self.knot_sigma, dtype=np.float64)
            if t.ndim != 1 or t.shape != s.shape or t.size < 2:
                raise ValueError("tabulated schedule needs matching 1-d knot arrays")
            if t[0] != 0.0 or s[0] != 0.0:
                raise ValueError("tabulated schedule must start at (0, 0)")
            if not math.isclose(t[-1], self.t_max) or not math.isclose(s[-1], self.sigma_max):
                raise ValueError("tabulated schedule must end at (t_max, sigma_max)")
            if np.any(np.diff(t) <= 0) or np.any(np.diff(s) <= 0):
                raise ValueError("knots must be strictly increasing")
            object.__setattr__(self, "knot_t", t)
            object.__setattr__(self, "knot_sigma", s)

    # -- point evaluation ------------------------------------------------

    def _check_domain(self, t):
        t = np.asarray(t, dtype=np.float64)
        if np.any(t < 0.0) or np.any(t > self.t_max):
            raise ValueError(f"time outside [0, {self.t_max}]")
        return t

    def sigma(self, t):
        """Noise level sigma(t).  Accepts scalars or arrays."""
        t = self._check_domain(t)
        if self.kind == "linear":
            out = self.sigma_max * t
        else:
            out = np.interp(t, self.knot_t, self.knot_sigma)
        return float(out) if np.ndim(out) == 0 else out

    def alpha(self, t):
        """Signal coefficient sqrt(1 - sigma(t)^2)."""
        s = self.sigma(t)
        return np.sqrt(1.0 - np.square(s))

    def dsigma(self, t):
        """d sigma / d t; analytic for the linear rule, otherwise a
        central difference clipped to the schedule domain."""
        t = self._check_domain(t)
        if self.kind == "linear":
            out = np.broadcast_to(np.float64(self.sigma_max), np.shape(t)).copy()
            return float(out) if np.ndim(t) == 0 else out
        hi = np.minimum(np.asarray(t) + _DSIGMA_FD_STEP, self.t_max)
        lo = np.maximum(np.asarray(t) - _DSIGMA_FD_STEP, 0.0)
        out = (self.sigma(hi) - self.sigma(lo)) / (hi - lo)
        return float(out) if np.ndim(t) == 0 else out

    def flow_coeff(self, t):
        """Scale k(t) = sigma * dsigma/dt / (1 - sigma^2) of the reverse flow.

        The deterministic reverse process that transports the forward
        marginals is dx = -k(t) * (x + score(x, t)) dt; k is the common
        factor of its linear and score terms.
        """
        s = self.sigma(t)
        return s * self.dsigma(t) / (1.0 - np.square(s))

    # -- bridging between levels ------------------------------------------

    def bridge_coeffs(self, t, t_n):
        """Coefficients (c1, c2) of the bridge x_t = c1 * x_{t_n} + c2 * eps.

        c1 = sqrt((1 - sigma_t^2) / (1 - sigma_{t_n}^2)) and
        c2 = sqrt((sigma_t^2 - sigma_{t_n}^2) / (1 - sigma_{t_n}^2)), so that
        noising to t_n and then bridge-noising to t reproduces the single-shot
        marginal at t.
        """
        if np.any(np.asarray(t) < np.asarray(t_n)):
            raise ValueError("bridge requires t >= t_n")
        s_t = np.square(self.sigma(t))
        s_n = np.square(self.sigma(t_n))
        c1 = np.sqrt((1.0 - s_t) / (1.0 - s_n))
        c2 = np.sqrt(np.maximum(s_t - s_n, 0.0) / (1.0 - s_n))
        return c1, c2

    # -- discretization ----------------------------------------------------

    def time_grid(self, steps, t_end=None, rho=3.0):
        """Strictly decreasing integration grid of ``steps + 1`` times.

        Runs from ``t_max`` down to ``t_end`` (default ``t_min``).  Points
        cluster polynomially (degree ``rho``) toward both endpoints: score
        fields stiffen like 1/sigma^2 near the floor, and the reverse-flow
        coefficient has its largest curvature near t_max where
        1 - sigma^2 is smallest; a uniform grid loses explicit-stepper
        stability at one end and second-order accuracy at the other.
        """
        if steps < 1:
            raise ValueError("steps must be >= 1")
        if t_end is None:
            t_end = self.t_min
        if not 0.0 <= t_end < self.t_max:
            raise ValueError("t_end must lie in [0, t_max)")
        s = np.linspace(0.0, 1.0, steps + 1)
        u = s**rho / (s**rho + (1.0 - s) ** rho)
        return t_end + (self.t_max - t_end) * (1.0 - u)


def linear_schedule(sigma_max=0.995, t_min=1e-3):
    """Default schedule sigma(t) = sigma_max * t on [0, 1]."""
    return NoiseSchedule(kind="linear", sigma_max=sigma_max, t_min=t_min)


def tabulated_schedule(knot_t, knot_sigma, t_min=1e-3):
    knot_t = np.asarray(knot_t, dtype=np.float64)
    knot_sigma = np.asarray(knot_sigma, dtype=np.float64)
    return NoiseSchedule(
        kind="tabulated",
        sigma_max=float(knot_sigma[-1]),
        t_min=t_min,
        t_max=float(knot_t[-1]),
        knot_t=knot_t,
        knot_sigma=knot_sigma,
    )
