r"""Subpopulation frequency model and the memorization error decomposition.

The data distribution is a mixture of N disjoint-support components whose
mixing weights are random: each component independently picks a candidate
frequency from a list pi and the picks are normalized.  ``bar_pi`` denotes
the marginal law of one normalized weight.

For a dataset of size n, the population error of any learner splits exactly
into its error off the dataset plus, for every multiplicity ell, the
coefficient

    tau_ell = E[a^(ell+1) (1-a)^(n-ell)] / E[a^ell (1-a)^(n-ell)],  a ~ bar_pi,

times its error on dataset points whose component has exactly ell
representatives.  tau_1 is large precisely when bar_pi puts mass on
frequencies of order 1/n (a heavy-tailed list), which is what makes fitting
singleton examples unavoidable for good generalization.

Everything here is exactly enumerable for small (k, N) and estimated by
seeded Monte Carlo otherwise, with a grid-convolution quadrature as an
independent cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations_with_replacement

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import logsumexp

from . import rng

__all__ = [
    "FrequencyPrior",
    "FrequencyMarginal",
    "sample_mixing_weights",
    "tau",
    "tau_report",
    "TauResult",
    "tau_quadrature",
    "weight",
    "heavy_tail_predicate",
    "tau1_bounds_check",
    "MixtureInstance",
    "error_decomposition_check",
    "posterior_mean_weights",
]

_ENUM_LIMIT = 1_000_000  # enumerate exactly while k^N stays below this
_MC_DRAWS = 2_000_000


@dataclass(frozen=True)
class FrequencyPrior:
    """Candidate frequency list pi and the number of components N."""

    pi: tuple
    N: int

    def __post_init__(self):
        pi = tuple(float(p) for p in self.pi)
        if not pi or any(p <= 0 for p in pi):
            raise ValueError("pi must be a non-empty list of positive frequencies")
        if self.N < 1:
            raise ValueError("N must be >= 1")
        object.__setattr__(self, "pi", pi)

    @property
    def k(self) -> int:
        return len(self.pi)

    def enumerable(self) -> bool:
        return self.k**self.N <= _ENUM_LIMIT


def sample_mixing_weights(prior: FrequencyPrior, seed: int) -> np.ndarray:
    """One draw of the normalized weight vector D."""
    gen = rng.substream(seed, 0)
    picks = np.asarray(prior.pi)[gen.integers(0, prior.k, size=prior.N)]
    return picks / picks.sum()


@dataclass(frozen=True)
class FrequencyMarginal:
    """Discrete law of a single normalized weight D_i.

    ``atoms``/``probs`` are either the exact support (enumeration) or an
    empirical cloud (Monte Carlo); both work with the same expectation
    formulas.  Carries N because interval weights scale with it.
    """

    atoms: np.ndarray
    probs: np.ndarray
    N: int
    method: str  # "enumeration" | "monte-carlo" | "point-mass"

    @classmethod
    def point_mass(cls, a: float, N: int) -> "FrequencyMarginal":
        return cls(atoms=np.array([float(a)]), probs=np.array([1.0]), N=N, method="point-mass")

    @classmethod
    def from_prior_exact(cls, prior: FrequencyPrior) -> "FrequencyMarginal":
        """Exact marginal via enumeration over multisets of the other N-1 picks."""
        vals = np.asarray(prior.pi)
        k, N = prior.k, prior.N
        atoms, probs = [], []
        log_kn1 = (N - 1) * math.log(k)
        for combo in combinations_with_replacement(range(k), N - 1):
            counts = np.bincount(np.asarray(combo, dtype=int), minlength=k) if combo else np.zeros(k, int)
            log_multi = math.lgamma(N) - sum(math.lgamma(c + 1) for c in counts)
            p_combo = math.exp(log_multi - log_kn1)
            total = float(vals @ counts)
            for v in vals:
                atoms.append(v / (v + total))
                probs.append(p_combo / k)
        atoms = np.asarray(atoms)
        probs = np.asarray(probs)
        order = np.argsort(atoms, kind="stable")
        atoms, probs = atoms[order], probs[order]
        # consolidate exactly equal atoms
        keep = np.concatenate([[True], np.diff(atoms) != 0.0])
        idx = np.cumsum(keep) - 1
        merged = np.zeros(keep.sum())
        np.add.at(merged, idx, probs)
        return cls(atoms=atoms[keep], probs=merged, N=N, method="enumeration")

    @classmethod
    def from_prior_mc(cls, prior: FrequencyPrior, draws: int = _MC_DRAWS, seed: int = 0) -> "FrequencyMarginal":
        gen = rng.stream("marginal-mc", seed)
        vals = np.asarray(prior.pi)
        out = np.empty(draws)
        pos, chunk = 0, max(1, (1 << 22) // max(prior.N, 1))
        while pos < draws:
            b = min(chunk, draws - pos)
            picks = vals[gen.integers(0, prior.k, size=(b, prior.N))]
            out[pos : pos + b] = picks[:, 0] / picks.sum(axis=1)
            pos += b
        return cls(atoms=out, probs=np.full(draws, 1.0 / draws), N=prior.N, method="monte-carlo")


def _as_marginal(prior, draws=_MC_DRAWS, seed=0) -> FrequencyMarginal:
    if isinstance(prior, FrequencyMarginal):
        return prior
    if prior.enumerable():
        return FrequencyMarginal.from_prior_exact(prior)
    return FrequencyMarginal.from_prior_mc(prior, draws=draws, seed=seed)


def _log_moment(marg: FrequencyMarginal, a_pow: int, b_pow: int) -> float:
    """log E[a^a_pow (1-a)^b_pow] over the marginal, safe at a = 1."""
    a = marg.atoms
    with np.errstate(divide="ignore"):
        terms = np.log(marg.probs) + a_pow * np.log(a)
        if b_pow > 0:
            terms = terms + b_pow * np.log1p(-a)
    return float(logsumexp(terms))


@dataclass(frozen=True)
class TauResult:
    value: float
    ell: int
    n: int
    method: str
    cross_check: float | None  # quadrature value on the Monte Carlo path


def tau_report(ell: int, n: int, prior, draws: int = _MC_DRAWS, seed: int = 0) -> TauResult:
    """tau_ell with the evaluation path recorded.

    Exact enumeration when k^N is small; otherwise Monte Carlo, with the
    grid-convolution quadrature attached as an independent cross-check.
    """
    if not 1 <= ell <= n:
        raise ValueError("need 1 <= ell <= n")
    marg = _as_marginal(prior, draws=draws, seed=seed)
    log_den = _log_moment(marg, ell, n - ell)
    if log_den == -np.inf:
        raise ValueError("degenerate prior: zero weight at this multiplicity")
    value = math.exp(_log_moment(marg, ell + 1, n - ell) - log_den)
    cross = None
    if marg.method == "monte-carlo" and isinstance(prior, FrequencyPrior):
        cross = tau_quadrature(ell, n, prior)
    return TauResult(value=value, ell=ell, n=n, method=marg.method, cross_check=cross)


def tau(ell: int, n: int, prior, draws: int = _MC_DRAWS, seed: int = 0) -> float:
    return tau_report(ell, n, prior, draws=draws, seed=seed).value


def tau_quadrature(ell: int, n: int, prior: FrequencyPrior, step: float = 1e-4) -> float:
    """Independent tau route: exact grid convolution of the pick sum.

    The single-pick law is laid on a uniform grid (each atom split between
    neighbors, preserving its mean); the law of the sum of N-1 picks then
    follows from exact on-grid convolutions (binary powering).  Both
    moments are integrated against that law for every candidate first pick.
    """
    if not 1 <= ell <= n:
        raise ValueError("need 1 <= ell <= n")
    vals = np.asarray(prior.pi)
    if prior.N == 1:
        total = np.zeros(1)
        sum_probs = np.ones(1)
    else:
        grid_len = int(math.ceil(vals.max() / step)) + 2
        single = np.zeros(grid_len)
        pos = vals / step
        lo = np.floor(pos).astype(int)
        frac = pos - lo
        np.add.at(single, lo, (1.0 - frac) / prior.k)
        np.add.at(single, lo + 1, frac / prior.k)
        sum_probs = _convolution_power(single, prior.N - 1)
        total = np.arange(sum_probs.size) * step
    num = den = 0.0
    for v in vals:
        a = v / (v + total)
        base = sum_probs * a**ell
        if n > ell:
            base = base * (1.0 - a) ** (n - ell)
        den += base.sum() / prior.k
        num += (base * a).sum() / prior.k
    return num / den


def _convolution_power(dist: np.ndarray, count: int) -> np.ndarray:
    """Law of the sum of ``count`` iid copies of an on-grid distribution."""
    result = None
    power = dist
    while count:
        if count & 1:
            result = power if result is None else fftconvolve(result, power)
            result = np.clip(result, 0.0, None)
            result /= result.sum()
        count >>= 1
        if count:
            power = np.clip(fftconvolve(power, power), 0.0, None)
            power /= power.sum()
    return result


def weight(prior, interval, draws: int = _MC_DRAWS, seed: int = 0) -> float:
    """Expected mixture mass on components whose weight lies in [a, b].

    weight(bar_pi, [a, b]) = N * E[alpha * 1{a <= alpha <= b}].
    """
    a, b = float(interval[0]), float(interval[1])
    if not 0.0 <= a <= b <= 1.0:
        raise ValueError("interval must satisfy 0 <= a <= b <= 1")
    marg = _as_marginal(prior, draws=draws, seed=seed)
    mask = (marg.atoms >= a) & (marg.atoms <= b)
    return float(marg.N * np.sum(marg.probs[mask] * marg.atoms[mask]))


def heavy_tail_predicate(prior, n: int, c: float, **kw) -> bool:
    """True when weight(bar_pi, [1/(2n), 1/n]) >= c."""
    if c <= 0:
        raise ValueError("c must be positive")
    return weight(prior, (1.0 / (2 * n), 1.0 / n), **kw) >= c


def tau1_bounds_check(prior, n: int, draws: int = _MC_DRAWS, seed: int = 0):
    """tau_1 together with its general lower bound and conditional upper bound.

    Lower: tau_1 >= weight(bar_pi, [1/(3n), 2/n]) / (5n), always valid.
    Upper: 2*theta for a theta <= 1/(2n) whose gap condition
    weight(bar_pi, (theta, t/n]) = 0 with t = ln(1/(theta beta)),
    beta = weight(bar_pi, [0, theta]) can be certified from the atoms;
    None when no candidate certifies.
    """
    marg = _as_marginal(prior, draws=draws, seed=seed)
    t1 = tau(1, n, marg)
    lower = weight(marg, (1.0 / (3 * n), 2.0 / n)) / (5 * n)
    upper = None
    for theta in np.unique(marg.atoms[marg.atoms <= 1.0 / (2 * n)]):
        beta = float(marg.N * np.sum(marg.probs[marg.atoms <= theta] * marg.atoms[marg.atoms <= theta]))
        if beta <= 0.0 or theta * beta >= 1.0:
            continue
        t = math.log(1.0 / (theta * beta))
        hi = min(t / n, 1.0)
        gap_mass = np.sum(marg.probs[(marg.atoms > theta) & (marg.atoms <= hi)])
        if gap_mass == 0.0:
            upper = 2.0 * float(theta)
            break
    return t1, lower, upper


# -- exact error decomposition ------------------------------------------------


@dataclass(frozen=True)
class MixtureInstance:
    """Fully enumerable mixture world: disjoint finite supports, uniform
    components, a fixed dataset and a nonnegative loss table."""

    supports: tuple  # tuple of tuples of hashable point ids, one per component
    prior: FrequencyPrior
    dataset: tuple  # n point ids, multiplicity allowed
    loss: dict  # point id -> loss value

    def __post_init__(self):
        supports = tuple(tuple(s) for s in self.supports)
        object.__setattr__(self, "supports", supports)
        object.__setattr__(self, "dataset", tuple(self.dataset))
        if len(supports) != self.prior.N:
            raise ValueError("number of supports must match prior.N")
        seen = set()
        for sup in supports:
            if not sup:
                raise ValueError("supports must be non-empty")
            if seen & set(sup):
                raise ValueError("component supports must be disjoint")
            seen |= set(sup)
        if not set(self.dataset) <= seen:
            raise ValueError("dataset points must belong to some support")
        if any(self.loss.get(x, 0.0) < 0 for x in seen):
            raise ValueError("losses must be nonnegative")

    def component_of(self, x):
        for i, sup in enumerate(self.supports):
            if x in sup:
                return i
        raise KeyError(x)


def _assignments(prior: FrequencyPrior):
    """All k^N candidate-frequency assignments with posterior-ready weights."""
    vals = np.asarray(prior.pi)
    grids = np.meshgrid(*([vals] * prior.N), indexing="ij")
    picks = np.stack([g.ravel() for g in grids], axis=1)  # (k^N, N)
    return picks / picks.sum(axis=1, keepdims=True)


def _rep_counts(instance: MixtureInstance) -> np.ndarray:
    counts = np.zeros(instance.prior.N, dtype=int)
    for x in instance.dataset:
        counts[instance.component_of(x)] += 1
    return counts


def _posterior(instance: MixtureInstance):
    D = _assignments(instance.prior)  # (M, N), uniform prior over rows
    counts = _rep_counts(instance)
    like = np.prod(D**counts, axis=1)
    return D, like / like.sum()


def posterior_mean_weights(instance: MixtureInstance) -> np.ndarray:
    """E[D_i | dataset] for every component, by full enumeration."""
    D, post = _posterior(instance)
    return post @ D


def error_decomposition_check(instance: MixtureInstance):
    """Both sides of the exact error decomposition and their gap.

    Left: posterior-expected population loss E_{D|Z} sum_x M_D(x) L(x).
    Right: the unseen-domain term plus sum_ell tau_ell * errn(ell).
    The two agree to enumeration precision on every valid instance.
    """
    if not instance.prior.enumerable():
        raise ValueError("instance too large to enumerate")
    D, post = _posterior(instance)
    sizes = np.array([len(s) for s in instance.supports], dtype=float)
    dataset_set = set(instance.dataset)

    loss_all = np.zeros(instance.prior.N)
    loss_unseen = np.zeros(instance.prior.N)
    for i, sup in enumerate(instance.supports):
        for x in sup:
            val = instance.loss.get(x, 0.0) / sizes[i]
            loss_all[i] += val
            if x not in dataset_set:
                loss_unseen[i] += val
    lhs = float(post @ (D @ loss_all))
    unseen = float(post @ (D @ loss_unseen))

    counts = _rep_counts(instance)
    n = len(instance.dataset)
    marg = FrequencyMarginal.from_prior_exact(instance.prior)
    rhs = unseen
    for ell in sorted({c for c in counts if c > 0}):
        errn = sum(
            instance.loss.get(x, 0.0) / sizes[instance.component_of(x)]
            for x in dataset_set
            if counts[instance.component_of(x)] == ell
        )
        rhs += tau(int(ell), n, marg) * errn
    return lhs, rhs, abs(lhs - rhs)
