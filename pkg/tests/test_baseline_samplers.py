import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from _chains import partition_tv
from conftest import FOUR_PRIORS, TRIANGLE_HYPER
from oasampler.baseline_samplers import (MarginalSampler, MarginalState, SliceSampler, SliceState,
                                         marginal_sweep, slice_sweep)
from oasampler.components import NIGHyper, family_for, log_marginal_likelihood
from oasampler.errors import TruncationOverflowError, UnsupportedPriorError
from oasampler.oracle import exact_partition_posterior
from oasampler.species_sampling import INF, FiniteDirichlet, GnedinMFM, PitmanYor, ThetaOverM


class TestMarginalSampler:
    def test_single_observation(self):
        s = MarginalSampler(np.array([0.4]), PitmanYor(0.0, 1.0), family_for(TRIANGLE_HYPER),
                            np.random.default_rng(0), check=True)
        for _ in range(100):
            assert s.step().labels.tolist() == [1]

    def test_pair_odds(self):
        # P(together after one sweep) = p^2 + (1 - p) E[g(y|x') / (g(y|x') + q)] with
        # p = g(y|x) / (g(y|x) + q), q the prior predictive and x' the new-block atom
        fam = family_for(TRIANGLE_HYPER)
        y = 0.6
        Y = np.array([y, y])
        x_mu, x_s2 = 0.0, 1.0
        g = lambda mu, s2: np.exp(-0.5 * (y - mu) ** 2 / s2) / np.sqrt(2 * np.pi * s2)
        q = math.exp(log_marginal_likelihood(TRIANGLE_HYPER, y))
        p = g(x_mu, x_s2) / (g(x_mu, x_s2) + q)
        aux = np.random.default_rng(1)
        M = 200000
        # M independent single-observation posteriors in one batched call
        x_new = fam.posterior_draw(np.full(M, y), np.arange(M), M, aux)
        gx = g(x_new[0], x_new[1])
        expect = p * p + (1 - p) * float(np.mean(gx / (gx + q)))

        rng = np.random.default_rng(2)
        N = 60000
        together = 0
        for _ in range(N):
            st = MarginalState([0, 0], np.array([x_mu]), np.array([x_s2]))
            marginal_sweep(st, Y, fam, PitmanYor(0.0, 1.0), rng)
            together += st.k == 1
        assert abs(together / N - expect) < 3 * math.sqrt(expect * (1 - expect) / N) + 1e-3

    def test_unsupported_priors(self):
        fam = family_for(TRIANGLE_HYPER)
        with pytest.raises(UnsupportedPriorError):
            MarginalSampler(np.zeros(3), GnedinMFM(0.5, ThetaOverM(1.0)), fam, np.random.default_rng(0))

    def test_record_fields(self):
        s = MarginalSampler(np.array([-1.0, -0.8, 2.0, 2.2]), PitmanYor(0.0, 1.0),
                            family_for(TRIANGLE_HYPER), np.random.default_rng(3), check=True)
        for _ in range(50):
            rec = s.step()
            assert rec.m is None
            assert rec.labels[0] == 1 and sum(rec.counts) == 4
            # E[p_j | partition] = n_j / (n + theta) for the Dirichlet process
            assert_allclose(rec.weights, np.array(rec.counts) / 5.0, rtol=1e-12)

    @pytest.mark.parametrize("name", list(FOUR_PRIORS))
    def test_invariants(self, name):
        rng = np.random.default_rng(4)
        Y = np.concatenate([rng.normal(-2, 0.5, 10), rng.normal(2, 0.5, 10)])
        s = MarginalSampler(Y, FOUR_PRIORS[name], family_for(NIGHyper(0.0, 0.1, 1.0, 1.0)), rng, check=True)
        for _ in range(500):
            rec = s.step()
            assert 1 <= rec.k_n <= len(Y)
            assert len(rec.mu) == rec.k_n
            first = [list(rec.labels).index(j) for j in range(1, rec.k_n + 1)]
            assert first == sorted(first)
            if name == "FD(1,3)":
                assert rec.k_n <= 3


class TestSliceSampler:
    def test_rejects_finite_priors(self):
        fam = family_for(TRIANGLE_HYPER)
        for prior in (FiniteDirichlet(1.0, 3), GnedinMFM(0.5)):
            with pytest.raises(UnsupportedPriorError):
                SliceSampler(np.zeros(3), prior, fam, np.random.default_rng(0))

    def test_truncation_overflow(self):
        s = SliceSampler(np.linspace(-3, 3, 20), PitmanYor(0.5, 0.2), family_for(TRIANGLE_HYPER),
                         np.random.default_rng(1), max_sticks=2)
        with pytest.raises(TruncationOverflowError):
            for _ in range(200):
                s.advance()

    def test_slice_sets_and_records(self):
        rng = np.random.default_rng(2)
        Y = np.concatenate([rng.normal(-2, 0.5, 10), rng.normal(2, 0.5, 10)])
        s = SliceSampler(Y, PitmanYor(0.3, 1.0), family_for(NIGHyper(0.0, 0.1, 1.0, 1.0)), rng, check=True)
        for _ in range(500):
            rec = s.step()
            st = s.state
            assert st.last_candidates >= 1
            # u_i < p_{c_i}, so c_i itself is in A_i
            assert np.all(np.log(st.u) < np.array([st.log_p[int(j)] for j in st.c]))
            assert rec.m is INF and rec.labels[0] == 1
            assert rec.weights.sum() <= 1.0 + 1e-12
            assert sum(rec.counts) == len(Y) and len(rec.counts) == rec.k_n
        assert s.max_J >= 1 and len(s.J_history) == 500

    def test_single_component_stays_put(self):
        # identical points and a near-degenerate atom prior: one component holds all mass
        fam = family_for(NIGHyper(0.0, 1e6, 1e6, 1e6))
        Y = np.zeros(30)
        st = SliceState(np.zeros(30, dtype=np.int64), {0: (np.array(0.0), np.array(1.0))})
        rng = np.random.default_rng(3)
        slice_sweep(st, Y, fam, PitmanYor(0.0, 0.01), rng)
        assert len(np.unique(st.c)) == 1


@pytest.mark.slow
class TestPosteriorCorrectness:
    @pytest.mark.parametrize("name", ["PY(0.5,0.2)", "FD(1,3)"])
    def test_marginal_four_points(self, name, triangle_data, triangle_family):
        Y = triangle_data[:4]
        prior = FOUR_PRIORS[name]
        table = exact_partition_posterior(Y, prior, TRIANGLE_HYPER)
        tv, _ = partition_tv(MarginalSampler(Y, prior, triangle_family, np.random.default_rng(200)),
                             table, 200_000)
        assert tv < 0.02

    def test_slice_four_points(self, triangle_data, triangle_family):
        Y = triangle_data[:4]
        prior = PitmanYor(0.0, 1.0)
        table = exact_partition_posterior(Y, prior, TRIANGLE_HYPER)
        tv, _ = partition_tv(SliceSampler(Y, prior, triangle_family, np.random.default_rng(201)),
                             table, 200_000)
        assert tv < 0.02
