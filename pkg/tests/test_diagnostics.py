import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy import integrate, stats

from conftest import TRIANGLE_HYPER
from oasampler.cli import make_sampler, run_chain
from oasampler.components import family_for, univariate_preset
from oasampler.diagnostics import (IATEstimate, component_density_estimate, density_estimate, deviance, iat,
                                   label_change_rate, m_posterior, occupancy_posterior, pmf_total_variation)
from oasampler.errors import ParameterDomainError, UnsupportedPriorError
from oasampler.oas_sampler import OrderedAllocationSampler, TraceRecord
from oasampler.oracle import exact_partition_posterior
from oasampler.species_sampling import INF, GnedinMFM, PitmanYor, gnedin_m_posterior
from oasampler.synthetic import generate_synthetic
from oasampler.trace import ChainTrace

FAM = family_for(TRIANGLE_HYPER)


def _rec(mu, scale, weights=None, counts=None, m=INF, it=1):
    mu = np.asarray(mu, dtype=float)
    counts = tuple(counts) if counts is not None else (1,) * len(mu)
    w = np.asarray(weights if weights is not None else np.array(counts) / sum(counts), dtype=float)
    return TraceRecord(it, len(counts), m, 0.0, w, mu, np.asarray(scale, dtype=float), counts)


def _ar1(phi, n, seed):
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(n)
    x = np.empty(n)
    x[0] = e[0] / math.sqrt(1 - phi * phi)
    for t in range(1, n):
        x[t] = phi * x[t - 1] + e[t]
    return x


class TestIAT:
    def test_iid(self):
        tau = iat(np.random.default_rng(0).standard_normal(100_000))
        assert abs(tau - 1.0) < 0.1

    def test_ar1(self):
        # (1 + phi) / (1 - phi) = 3
        tau = iat(_ar1(0.5, 1_000_000, 1))
        assert abs(tau - 3.0) < 0.05 * 3.0

    def test_constant_is_flagged(self):
        tau = iat(np.full(200, 4.0))
        assert isinstance(tau, IATEstimate)
        assert tau == 1.0 and tau.degenerate

    def test_not_flagged_otherwise(self):
        assert not iat(np.arange(200.0)).degenerate

    def test_short_series(self):
        with pytest.raises(ParameterDomainError):
            iat(np.zeros(99))

    def test_antithetic_floor(self):
        # alternating series has negative lag-one correlation
        assert iat(np.tile([1.0, -1.0], 100)) == 1.0

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(-1e6, 1e6), min_size=100, max_size=300))
    def test_lower_bound(self, xs):
        assert iat(xs) >= 1.0 - 1e-9


class TestDeviance:
    def test_single_point(self):
        fam = family_for(TRIANGLE_HYPER)
        assert_allclose(deviance([1], [0.0], [1.0], np.array([0.0]), fam), math.log(2 * math.pi), rtol=1e-14)

    def test_duplicated_data(self):
        Y = np.array([-1.0, 0.3, 2.0])
        args = ([2, 1], [0.0, 2.0], [1.0, 0.5])
        assert_allclose(deviance(*args, np.concatenate([Y, Y]), FAM), 2 * deviance(*args, Y, FAM), rtol=1e-13)

    def test_unoccupied_component(self):
        Y = np.array([-1.0, 0.3, 2.0])
        a = deviance([2, 1], [0.0, 2.0], [1.0, 0.5], Y, FAM)
        b = deviance([2, 0, 1], [0.0, 9.0, 2.0], [1.0, 3.0, 0.5], Y, FAM)
        assert a == b

    def test_permutation_invariance(self):
        Y = np.array([-1.0, 0.3, 2.0, 0.1])
        a = deviance([3, 1], [0.0, 2.0], [1.0, 0.5], Y, FAM)
        b = deviance([1, 3], [2.0, 0.0], [0.5, 1.0], Y, FAM)
        assert_allclose(a, b, rtol=1e-15)

    def test_hand_value(self):
        Y = np.array([0.5, 1.5])
        w = np.array([0.25, 0.75])
        dens = w[0] * stats.norm.pdf(Y, 0, 1) + w[1] * stats.norm.pdf(Y, 1, math.sqrt(2))
        assert_allclose(deviance([1, 3], [0.0, 1.0], [1.0, 2.0], Y, FAM), -2 * np.log(dens).sum(), rtol=1e-13)

    def test_empty(self):
        with pytest.raises(ParameterDomainError):
            deviance([0, 0], [0.0, 1.0], [1.0, 1.0], np.zeros(2), FAM)


class TestDensityEstimate:
    grid = np.linspace(-12, 12, 4001)

    def test_single_component_empirical(self):
        tr = [_rec([0.0], [1.0], counts=[5])]
        assert_allclose(density_estimate(tr, self.grid, FAM, "empirical"), stats.norm.pdf(self.grid), rtol=1e-12)

    def test_full_without_remainder(self):
        r = _rec([-1.0, 2.0], [1.0, 0.5], weights=[0.4, 0.6], counts=[2, 3], m=2)
        want = 0.4 * stats.norm.pdf(self.grid, -1, 1) + 0.6 * stats.norm.pdf(self.grid, 2, math.sqrt(0.5))
        assert_allclose(density_estimate([r], self.grid, FAM, "full"), want, rtol=1e-12, atol=1e-300)

    def test_remainder_uses_prior_predictive(self):
        r = _rec([0.0], [1.0], weights=[0.7], counts=[3])
        h = TRIANGLE_HYPER
        s = math.sqrt(h.b * (h.lam + 1) / (h.a * h.lam))
        pred = stats.t.pdf(self.grid, df=2 * h.a, loc=h.phi, scale=s)
        want = 0.7 * stats.norm.pdf(self.grid) + 0.3 * pred
        assert_allclose(density_estimate([r], self.grid, FAM, "full"), want, rtol=1e-12)

    def test_integrates_to_one(self):
        grid = np.linspace(-400, 400, 400_001)
        recs = [_rec([-1.0, 2.0], [1.0, 0.5], weights=[0.4, 0.5], counts=[2, 3]),
                _rec([0.0], [2.0], weights=[0.9], counts=[5])]
        for mode in ("full", "empirical"):
            f = density_estimate(recs, grid, FAM, mode)
            assert np.all(f >= 0)
            assert abs(integrate.trapezoid(f, grid) - 1.0) < 1e-3

    def test_errors(self):
        with pytest.raises(ParameterDomainError):
            density_estimate([_rec([0.0], [1.0])], np.array([]), FAM)
        with pytest.raises(ParameterDomainError):
            density_estimate([], self.grid, FAM)
        with pytest.raises(ParameterDomainError):
            density_estimate([_rec([0.0], [1.0])], self.grid, FAM, "bogus")

    def test_accepts_chain_trace(self):
        tr = ChainTrace({}, [_rec([0.0], [1.0], counts=[2])])
        assert_allclose(density_estimate(tr, self.grid, FAM, "empirical"), stats.norm.pdf(self.grid), rtol=1e-12)


class TestComponentDensity:
    grid = np.linspace(-6, 6, 101)

    def _trace(self):
        return [_rec([-1.0, 2.0], [1.0, 0.5], weights=[0.4, 0.5, 0.05], counts=[2, 3]),
                _rec([0.0, 1.0, 3.0], [2.0, 1.0, 1.0], weights=[0.3, 0.3, 0.2], counts=[1, 2, 2]),
                _rec([0.5], [1.0], weights=[1.0], counts=[5], m=1)]

    def test_unrealized_is_zero(self):
        assert np.all(component_density_estimate(self._trace(), self.grid, 9, FAM) == 0.0)

    def test_empirical_sum(self):
        tr = self._trace()
        total = sum(component_density_estimate(tr, self.grid, j, FAM, "empirical") for j in range(1, 4))
        assert_allclose(total, density_estimate(tr, self.grid, FAM, "empirical"), rtol=1e-12, atol=1e-15)

    def test_weight_mode_single_component(self):
        f = component_density_estimate([_rec([0.5], [1.0], weights=[1.0], counts=[5], m=1)], self.grid, 1, FAM)
        assert_allclose(f, stats.norm.pdf(self.grid, 0.5, 1.0), rtol=1e-12)

    def test_weight_mode_respects_m(self):
        # component 2 exists as a weight only while j <= m
        tr = [_rec([0.0, 1.0], [1.0, 1.0], weights=[0.5, 0.5], counts=[2], m=1),
              _rec([0.0, 1.0], [1.0, 1.0], weights=[0.5, 0.5], counts=[2], m=2)]
        f = component_density_estimate(tr, self.grid, 2, FAM, "weight")
        assert_allclose(f, 0.25 * stats.norm.pdf(self.grid, 1.0, 1.0), rtol=1e-12)

    def test_errors(self):
        with pytest.raises(ParameterDomainError):
            component_density_estimate(self._trace(), self.grid, 0, FAM)
        with pytest.raises(ParameterDomainError):
            component_density_estimate(self._trace(), self.grid, 1, FAM, "bogus")


class TestOccupancyAndM:
    def test_constant_k(self):
        tr = [_rec([0, 1, 2], [1, 1, 1]) for _ in range(4)]
        assert occupancy_posterior(tr) == {3: 1.0}

    def test_pmf_sums_to_one(self):
        tr = [_rec([0] * k, [1] * k, m=k + 2) for k in (1, 2, 2, 3, 1, 1, 2)]
        assert math.fsum(occupancy_posterior(tr).values()) == 1.0
        assert math.fsum(m_posterior(tr).values()) == 1.0
        assert m_posterior(tr) == {3: 3 / 7, 4: 3 / 7, 5: 1 / 7}

    def test_fixed_m_rejected(self):
        with pytest.raises(UnsupportedPriorError):
            m_posterior([_rec([0.0], [1.0], m=INF)])
        with pytest.raises(UnsupportedPriorError):
            m_posterior([_rec([0.0], [1.0], m=None)])
        with pytest.raises(UnsupportedPriorError):
            m_posterior(ChainTrace({"random_m": "false"}, [_rec([0.0], [1.0], m=3)]))

    def test_empty(self):
        with pytest.raises(ParameterDomainError):
            occupancy_posterior([])
        with pytest.raises(ParameterDomainError):
            m_posterior([])

    @pytest.mark.slow
    def test_gnedin_m_posterior_against_oracle(self, triangle_data):
        # P(m | y) = sum_k P(k_n = k | y) P(m | k_n = k, n)
        Y = triangle_data[:2]
        prior = GnedinMFM(0.5)
        kpmf = exact_partition_posterior(Y, prior, TRIANGLE_HYPER).k_pmf()
        recs = run_chain(OrderedAllocationSampler(Y, prior, FAM, np.random.default_rng(300)), 100_000, 1000)
        # the m tail is heavy, so values above R are pooled into one cell
        R = 200
        emp = {}
        for r, q in m_posterior(recs).items():
            emp[min(r, R)] = emp.get(min(r, R), 0.0) + q
        exact = {r: sum(q * gnedin_m_posterior(k, 2, 0.5).pmf(r) for k, q in kpmf.items()) for r in range(1, R)}
        exact[R] = 1.0 - math.fsum(exact.values())
        assert pmf_total_variation(emp, exact) < 0.02


class TestLabelChangeRate:
    def test_constant_atoms(self):
        tr = [_rec([0.0, 3.0], [1.0, 1.0]) for _ in range(5)]
        assert label_change_rate(tr) == 0.0

    def test_swapped_atoms(self):
        tr = [_rec([0.0, 3.0] if t % 2 == 0 else [3.0, 0.0], [1.0, 1.0]) for t in range(6)]
        assert label_change_rate(tr) == 1.0

    def test_short_trace(self):
        assert label_change_rate([_rec([0.0], [1.0])]) == 0.0

    def test_bivariate(self):
        a = _rec(np.array([[0.0, 0.0], [5.0, 5.0]]), np.tile(np.eye(2), (2, 1, 1)))
        b = _rec(np.array([[5.0, 5.0], [0.0, 0.0]]), np.tile(np.eye(2), (2, 1, 1)))
        assert label_change_rate([a, a, b]) == 0.5

    @pytest.mark.slow
    def test_ordered_below_slice(self):
        # seeded regression on univ4_like under PY(0.5, 0.2): 0.682 (ordered) vs 0.784 (slice)
        Y = generate_synthetic("univ4_like", 1)
        fam = family_for(univariate_preset(Y))
        rates = {}
        for name in ("ordered", "slice"):
            s = make_sampler(name, Y, PitmanYor(0.5, 0.2), fam, np.random.default_rng(5), max_sticks=10**9)
            rates[name] = label_change_rate(run_chain(s, 2000, 3000))
        assert rates["ordered"] < rates["slice"]


class TestPmfTotalVariation:
    def test_values(self):
        assert pmf_total_variation({1: 0.5, 2: 0.5}, {1: 0.5, 2: 0.5}) == 0.0
        assert pmf_total_variation({1: 1.0}, {2: 1.0}) == 1.0
        assert_allclose(pmf_total_variation({1: 0.2, 2: 0.8}, {1: 0.5, 3: 0.5}), 0.8)
