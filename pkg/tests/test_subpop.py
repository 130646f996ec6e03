import itertools
import math

import numpy as np
import pytest

from scorelab.subpop import (
    FrequencyMarginal,
    FrequencyPrior,
    MixtureInstance,
    error_decomposition_check,
    heavy_tail_predicate,
    posterior_mean_weights,
    sample_mixing_weights,
    tau,
    tau1_bounds_check,
    tau_quadrature,
    tau_report,
    weight,
)


class TestSampleMixingWeights:
    def test_singleton_list_is_uniform(self):
        D = sample_mixing_weights(FrequencyPrior(pi=(0.37,), N=5), seed=0)
        np.testing.assert_allclose(D, 0.2)

    def test_two_equal_candidates(self):
        D = sample_mixing_weights(FrequencyPrior(pi=(1.0, 1.0), N=2), seed=1)
        np.testing.assert_allclose(D, 0.5)

    def test_empirical_marginal_matches_enumeration(self):
        prior = FrequencyPrior(pi=(1.0, 3.0), N=3)
        exact = FrequencyMarginal.from_prior_exact(prior)
        draws = np.array([sample_mixing_weights(prior, seed=s)[0] for s in range(20_000)])
        # total variation between the empirical atom frequencies and the
        # exact marginal, matched by rounding
        tv = 0.0
        for atom, p in zip(exact.atoms, exact.probs):
            emp = np.mean(np.abs(draws - atom) < 1e-9)
            tv += abs(emp - p)
        assert tv / 2 <= 0.01

    def test_invalid_prior(self):
        with pytest.raises(ValueError):
            FrequencyPrior(pi=(), N=2)
        with pytest.raises(ValueError):
            FrequencyPrior(pi=(0.0, 1.0), N=2)


class TestTau:
    def test_point_mass_equals_atom(self):
        marg = FrequencyMarginal.point_mass(0.3, N=5)
        for ell in range(1, 7):
            assert tau(ell, 6, marg) == pytest.approx(0.3, abs=1e-12)

    def test_n1_specialization(self):
        # tau_1 at n=1 is E[a^2]/E[a]
        prior = FrequencyPrior(pi=(1.0, 2.0), N=2)
        marg = FrequencyMarginal.from_prior_exact(prior)
        num = np.sum(marg.probs * marg.atoms**2)
        den = np.sum(marg.probs * marg.atoms)
        assert tau(1, 1, prior) == pytest.approx(num / den, rel=1e-12)

    def test_enumeration_matches_naive_kN_loop(self):
        # oracle: enumerate all k^N assignments directly
        prior = FrequencyPrior(pi=(0.5, 2.0, 3.0), N=3)
        ell, n = 2, 4
        num = den = 0.0
        for picks in itertools.product(prior.pi, repeat=prior.N):
            a = picks[0] / sum(picks)
            den += a**ell * (1 - a) ** (n - ell)
            num += a ** (ell + 1) * (1 - a) ** (n - ell)
        assert tau(ell, n, prior) == pytest.approx(num / den, rel=1e-12)

    def test_quadrature_agrees_with_enumeration(self):
        prior = FrequencyPrior(pi=(1.0, 0.5, 0.25), N=8)
        assert tau_quadrature(1, 5, prior) == pytest.approx(tau(1, 5, prior), rel=1e-8)

    def test_monte_carlo_path_reports_cross_check(self):
        prior = FrequencyPrior(pi=tuple(1.0 / j for j in range(1, 11)), N=30)
        rep = tau_report(1, 10, prior, draws=200_000, seed=0)
        assert rep.method == "monte-carlo"
        assert rep.cross_check is not None
        assert rep.value == pytest.approx(rep.cross_check, rel=0.02)

    def test_bounds_in_unit_interval(self):
        prior = FrequencyPrior(pi=(0.9, 0.1), N=4)
        for ell in range(1, 5):
            assert 0.0 < tau(ell, 4, prior) <= 1.0

    def test_degenerate_denominator(self):
        marg = FrequencyMarginal.point_mass(1.0, N=1)
        with pytest.raises(ValueError):
            tau(1, 3, marg)  # (1-a)^{n-ell} = 0 for every atom

    def test_bad_ell(self):
        with pytest.raises(ValueError):
            tau(0, 3, FrequencyMarginal.point_mass(0.5, N=2))


class TestWeight:
    def test_full_interval_self_normalizing(self):
        # N * E[a] = E[sum_i D_i] = 1 exactly for procedure-derived marginals
        prior = FrequencyPrior(pi=(1.0, 0.25, 0.05), N=4)
        assert weight(prior, (0.0, 1.0)) == pytest.approx(1.0, rel=1e-12)

    def test_full_interval_monte_carlo(self):
        # sampling error of the empirical marginal is ~N*std(a)/sqrt(draws)
        prior = FrequencyPrior(pi=tuple(1.0 / j for j in range(1, 8)), N=40)
        assert weight(prior, (0.0, 1.0), draws=200_000, seed=1) == pytest.approx(1.0, rel=0.01)

    def test_empty_interval(self):
        marg = FrequencyMarginal.point_mass(0.3, N=2)
        assert weight(marg, (0.1, 0.1)) == 0.0

    def test_point_mass_inside(self):
        n, N = 10, 4
        marg = FrequencyMarginal.point_mass(1.0 / (2 * n), N=N)
        assert weight(marg, (1.0 / (3 * n), 2.0 / n)) == pytest.approx(N / (2 * n), rel=1e-12)

    def test_invalid_interval(self):
        with pytest.raises(ValueError):
            weight(FrequencyMarginal.point_mass(0.5, N=1), (0.4, 0.2))


class TestHeavyTail:
    def test_point_mass_inside_band(self):
        n, N = 10, 8
        marg = FrequencyMarginal.point_mass(1.0 / (1.5 * n), N=N)
        c = N / (1.5 * n) / 2
        assert heavy_tail_predicate(marg, n, c)

    def test_point_mass_far_outside(self):
        marg = FrequencyMarginal.point_mass(0.5, N=2)
        assert not heavy_tail_predicate(marg, 4, 1e-6)

    def test_zipf_matches_quadrature_weight(self):
        # weight through the Monte-Carlo marginal vs the same truncated
        # moment computed from the sum-law grid (independent route)
        prior = FrequencyPrior(pi=tuple(1.0 / j for j in range(1, 11)), N=50)
        n = 40
        lo, hi = 1.0 / (2 * n), 1.0 / n
        mc = weight(prior, (lo, hi), draws=1_000_000, seed=3)
        from scorelab.subpop import _convolution_power

        step = 1e-4
        vals = np.asarray(prior.pi)
        grid_len = int(math.ceil(vals.max() / step)) + 2
        single = np.zeros(grid_len)
        pos = vals / step
        lo_i = np.floor(pos).astype(int)
        frac = pos - lo_i
        np.add.at(single, lo_i, (1 - frac) / len(vals))
        np.add.at(single, lo_i + 1, frac / len(vals))
        sum_probs = _convolution_power(single, prior.N - 1)
        T = np.arange(sum_probs.size) * step
        quad = 0.0
        for v in vals:
            a = v / (v + T)
            quad += prior.N * np.sum(sum_probs * a * ((a >= lo) & (a <= hi))) / len(vals)
        assert mc == pytest.approx(quad, rel=0.02)


class TestTau1Bounds:
    def test_point_mass_at_one_over_n(self):
        n = 10
        marg = FrequencyMarginal.point_mass(1.0 / n, N=5)
        t1, lower, _ = tau1_bounds_check(marg, n)
        assert t1 == pytest.approx(1.0 / n, rel=1e-12)
        assert t1 >= lower
        assert lower == pytest.approx((5.0 / n) / (5 * n), rel=1e-12)

    def test_no_mass_in_band_gives_zero_lower_bound(self):
        marg = FrequencyMarginal.point_mass(0.9, N=1)
        t1, lower, _ = tau1_bounds_check(marg, 10)
        assert lower == 0.0
        assert t1 >= lower

    def test_upper_bound_certified_for_tiny_point_mass(self):
        n = 10
        theta = 1.0 / (4 * n * n)
        marg = FrequencyMarginal.point_mass(theta, N=n)
        t1, lower, upper = tau1_bounds_check(marg, n)
        assert upper == pytest.approx(2 * theta, rel=1e-12)
        assert t1 <= upper
        assert t1 >= lower

    def test_lower_bound_on_prior_family(self):
        for pi, N in [((1.0, 0.2), 6), ((1.0, 0.5, 0.1), 5), (tuple(1.0 / j for j in range(1, 7)), 7)]:
            prior = FrequencyPrior(pi=pi, N=N)
            for n in (3, 8, 20):
                t1, lower, upper = tau1_bounds_check(prior, n)
                assert t1 >= lower
                if upper is not None:
                    assert t1 <= upper


class TestErrorDecomposition:
    @staticmethod
    def instance(loss, dataset=(0, 2), pi=(0.2, 1.0)):
        return MixtureInstance(
            supports=((0, 1), (2,), (3, 4)),
            prior=FrequencyPrior(pi=pi, N=3),
            dataset=dataset,
            loss=loss,
        )

    def test_zero_loss(self):
        lhs, rhs, gap = error_decomposition_check(self.instance({i: 0.0 for i in range(5)}))
        assert lhs == rhs == 0.0

    def test_constant_loss_total_mass(self):
        lhs, rhs, gap = error_decomposition_check(self.instance({i: 1.0 for i in range(5)}))
        assert lhs == pytest.approx(1.0, rel=1e-12)
        assert gap <= 1e-12

    def test_randomized_instances(self):
        rng = np.random.default_rng(0)
        for trial in range(20):
            sizes = rng.integers(1, 3, size=3)
            supports, next_id = [], 0
            for s in sizes:
                supports.append(tuple(range(next_id, next_id + s)))
                next_id += s
            points = [p for sup in supports for p in sup]
            dataset = tuple(rng.choice(points, size=2, replace=True))
            pi = tuple(rng.uniform(0.05, 1.0, size=2))
            loss = {p: float(rng.uniform(0, 2)) for p in points}
            inst = MixtureInstance(supports=tuple(supports), prior=FrequencyPrior(pi=pi, N=3), dataset=dataset, loss=loss)
            lhs, rhs, gap = error_decomposition_check(inst)
            assert gap <= 1e-12, (trial, lhs, rhs)

    def test_posterior_means_equal_tau(self):
        inst = self.instance({0: 0.7, 1: 0.3, 2: 1.1, 3: 0.25, 4: 0.5})
        means = posterior_mean_weights(inst)
        marg = FrequencyMarginal.from_prior_exact(inst.prior)
        # components 0 and 1 each hold one dataset point, component 2 none
        t1 = tau(1, 2, marg)
        assert means[0] == pytest.approx(t1, rel=1e-12)
        assert means[1] == pytest.approx(t1, rel=1e-12)

    def test_duplicate_dataset_point_uses_multiplicity(self):
        inst = self.instance({0: 1.0, 1: 0.0, 2: 0.0, 3: 0.0, 4: 0.0}, dataset=(0, 0))
        lhs, rhs, gap = error_decomposition_check(inst)
        assert gap <= 1e-12

    def test_overlapping_supports_rejected(self):
        with pytest.raises(ValueError):
            MixtureInstance(
                supports=((0, 1), (1, 2)),
                prior=FrequencyPrior(pi=(1.0,), N=2),
                dataset=(0,),
                loss={0: 0.0, 1: 0.0, 2: 0.0},
            )
