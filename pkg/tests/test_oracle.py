import csv
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy import stats
from scipy.special import logsumexp

import _oracles
from conftest import FOUR_PRIORS, TRIANGLE_HYPER
from oasampler.errors import ParameterDomainError, ResourceLimitError, UnsupportedPriorError
from oasampler.oracle import (PartitionTable, canonical_labels, enumerate_partitions, eppf_monte_carlo,
                              exact_partition_posterior, prior_partition_table, total_variation)
from oasampler.species_sampling import FiniteDirichlet, GnedinMFM, MixingPrior, PitmanYor

BELL = [1, 1, 2, 5, 15, 52, 203, 877, 4140]


def _block_evidence_mvt(hyper, y):
    # the block vector is multivariate t: df 2a, loc phi, shape (b / a)(I + 11' / lam)
    y = np.asarray(y, dtype=float)
    m = len(y)
    shape = hyper.b / hyper.a * (np.eye(m) + np.ones((m, m)) / hyper.lam)
    return stats.multivariate_t(loc=np.full(m, hyper.phi), shape=shape, df=2 * hyper.a).logpdf(y)


def _brute_posterior(Y, eppf, hyper):
    """Unnormalized posterior from an explicit block loop, normalized at the end."""
    out = {}
    for p in enumerate_partitions(len(Y)):
        lab = np.asarray(p)
        counts = np.bincount(lab)[1:]
        w = eppf(tuple(counts))
        if w == 0.0:
            out[p] = -math.inf
            continue
        lp = math.log(w)
        for j in range(1, lab.max() + 1):
            lp += _block_evidence_mvt(hyper, Y[lab == j])
        out[p] = lp
    z = logsumexp(list(out.values()))
    return {p: math.exp(v - z) for p, v in out.items()}


class TestEnumeratePartitions:
    def test_single(self):
        assert enumerate_partitions(1) == [(1,)]

    @pytest.mark.parametrize("n", range(1, 9))
    def test_bell_numbers(self, n):
        parts = enumerate_partitions(n)
        assert len(parts) == BELL[n]
        assert len(set(parts)) == BELL[n]

    @pytest.mark.parametrize("n", [3, 5, 7])
    def test_restricted_growth(self, n):
        for p in enumerate_partitions(n):
            assert p[0] == 1
            assert all(p[i] <= max(p[:i]) + 1 for i in range(1, n))
            assert canonical_labels(p) == p

    def test_matches_set_partition_count_by_brute_force(self):
        # every labelling of [5] with labels 1..5 collapses to exactly the enumerated set
        seen = {canonical_labels(lab) for lab in itertools.product(range(5), repeat=5)}
        assert seen == set(enumerate_partitions(5))

    def test_deterministic_order(self):
        assert enumerate_partitions(3) == [(1, 1, 1), (1, 1, 2), (1, 2, 1), (1, 2, 2), (1, 2, 3)]

    def test_guards(self):
        with pytest.raises(ResourceLimitError):
            enumerate_partitions(13)
        with pytest.raises(ParameterDomainError):
            enumerate_partitions(0)


class TestCanonicalLabels:
    def test_relabels_in_order_of_appearance(self):
        assert canonical_labels([7, 7, 3, 9, 3]) == (1, 1, 2, 3, 2)


class TestExactPartitionPosterior:
    def test_single_observation(self):
        t = exact_partition_posterior([0.3], PitmanYor(0.0, 1.0), TRIANGLE_HYPER)
        assert t.partitions == [(1,)]
        assert_allclose(t.probabilities, [1.0], atol=1e-15)

    def test_two_equal_points(self):
        # P(together) = 0.5 L2 / (0.5 L2 + 0.5 L1^2) under the Dirichlet process with theta = 1
        phi = 0.7
        L2 = math.exp(_block_evidence_mvt(TRIANGLE_HYPER, [phi, phi]))
        L1 = math.exp(_block_evidence_mvt(TRIANGLE_HYPER, [phi]))
        t = exact_partition_posterior([phi, phi], PitmanYor(0.0, 1.0), TRIANGLE_HYPER).as_dict()
        assert_allclose(t[(1, 1)], 0.5 * L2 / (0.5 * L2 + 0.5 * L1 ** 2), rtol=1e-10)

    @pytest.mark.parametrize("name", list(FOUR_PRIORS))
    def test_matches_independent_assembly(self, name, triangle_data):
        prior = FOUR_PRIORS[name]
        t = exact_partition_posterior(triangle_data, prior, TRIANGLE_HYPER).as_dict()
        ref = _brute_posterior(triangle_data, prior.eppf, TRIANGLE_HYPER)
        for p in ref:
            assert_allclose(t[p], ref[p], rtol=1e-9, atol=1e-300)

    def test_gnedin_against_mixture_over_m(self, triangle_data):
        # sum_m p(m) V_m(n, k) prod_j n_j! from the defining series, head plus Euler-Maclaurin tail
        def eppf(counts):
            w = _oracles.gnedin_normalizer(sum(counts), len(counts), 0.5)
            return float(w * math.prod(math.factorial(c) for c in counts))
        Y = triangle_data[:4]
        t = exact_partition_posterior(Y, GnedinMFM(0.5), TRIANGLE_HYPER).as_dict()
        ref = _brute_posterior(Y, eppf, TRIANGLE_HYPER)
        for p in ref:
            assert_allclose(t[p], ref[p], rtol=1e-10)

    @pytest.mark.parametrize("name", list(FOUR_PRIORS))
    def test_normalized(self, name, triangle_data):
        t = exact_partition_posterior(triangle_data, FOUR_PRIORS[name], TRIANGLE_HYPER)
        assert len(t.partitions) == 52
        assert abs(logsumexp(t.log_posterior)) < 1e-12

    def test_permutation_invariance(self, triangle_data):
        perm = np.array([3, 0, 4, 2, 1])
        prior = PitmanYor(0.5, 0.2)
        a = exact_partition_posterior(triangle_data, prior, TRIANGLE_HYPER).as_dict()
        b = exact_partition_posterior(triangle_data[perm], prior, TRIANGLE_HYPER).as_dict()
        for p, q in a.items():
            # partition p of the original indices, expressed on the permuted positions
            moved = canonical_labels([p[i] for i in perm])
            assert_allclose(b[moved], q, rtol=1e-10)

    def test_guards(self):
        with pytest.raises(ResourceLimitError):
            exact_partition_posterior(np.zeros(9), PitmanYor(0.0, 1.0), TRIANGLE_HYPER)
        with pytest.raises(UnsupportedPriorError):
            exact_partition_posterior(np.zeros(3), MixingPrior(), TRIANGLE_HYPER)


class TestPriorPartitionTable:
    @pytest.mark.parametrize("name", list(FOUR_PRIORS))
    @pytest.mark.parametrize("n", [1, 3, 6])
    def test_sums_to_one(self, name, n):
        t = prior_partition_table(FOUR_PRIORS[name], n)
        assert abs(logsumexp(t.log_posterior)) < 1e-12

    @pytest.mark.parametrize("name", list(FOUR_PRIORS))
    def test_addition_rule(self, name):
        # the law on [n] is the marginal of the law on [n + 1]
        prior = FOUR_PRIORS[name]
        for n in range(1, 6):
            small = prior_partition_table(prior, n).as_dict()
            big = prior_partition_table(prior, n + 1).as_dict()
            marg = {}
            for p, q in big.items():
                marg[p[:n]] = marg.get(p[:n], 0.0) + q
            for p in small:
                assert_allclose(marg[p], small[p], rtol=1e-10)


class TestPartitionTable:
    def test_csv_round_trip(self, tmp_path, triangle_data):
        t = exact_partition_posterior(triangle_data, PitmanYor(0.0, 1.0), TRIANGLE_HYPER)
        path = tmp_path / "oracle.csv"
        t.to_csv(path)
        with open(path) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["partition", "probability"]
        back = {tuple(int(x) for x in r[0].split()): float(r[1]) for r in rows[1:]}
        assert back == {p: float(q) for p, q in t.as_dict().items()}

    def test_k_pmf(self):
        t = prior_partition_table(PitmanYor(0.0, 1.0), 3)
        pmf = t.k_pmf()
        # unsigned Stirling numbers over the rising factorial 1 * 2 * 3
        assert_allclose([pmf[1], pmf[2], pmf[3]], [2 / 6, 3 / 6, 1 / 6], rtol=1e-12)


class TestTotalVariation:
    def test_identical_and_disjoint(self):
        t = PartitionTable([(1, 1), (1, 2)], np.log([0.25, 0.75]))
        assert total_variation({(1, 1): 1, (1, 2): 3}, t) == pytest.approx(0.0, abs=1e-15)
        assert total_variation({(1, 2, 3): 5}, t) == pytest.approx(1.0)


class TestEPPFMonteCarlo:
    @pytest.mark.parametrize("prior", [PitmanYor(0.3, 1.0), FiniteDirichlet(2.0, 4), GnedinMFM(0.5)])
    def test_single_block_is_one(self, prior):
        est, se = eppf_monte_carlo(prior, (1,), 100, np.random.default_rng(0))
        assert est == 1.0 and se == 0.0

    @pytest.mark.parametrize("prior, counts, target", [
        (PitmanYor(0.0, 1.0), (2,), 0.5),
        (FiniteDirichlet(1.0, 2), (1, 1), 1.0 / 3.0),
    ])
    def test_known_values(self, prior, counts, target):
        est, se = eppf_monte_carlo(prior, counts, 100_000, np.random.default_rng(1))
        assert abs(est - target) < 3 * se

    @settings(max_examples=15, deadline=None)
    @given(counts=st.lists(st.integers(1, 3), min_size=1, max_size=3),
           idx=st.integers(0, 3), seed=st.integers(0, 2 ** 31))
    def test_covers_closed_form(self, counts, idx, seed):
        prior = list(FOUR_PRIORS.values())[idx]
        target = prior.eppf(counts)
        est, se = eppf_monte_carlo(prior, counts, 20_000, np.random.default_rng(seed))
        # five standard errors keeps the false-alarm rate negligible over the examples
        assert abs(est - target) <= 5 * se + 1e-15

    def test_unsupported(self):
        with pytest.raises(UnsupportedPriorError):
            eppf_monte_carlo(MixingPrior(), (1, 1), 10, np.random.default_rng(0))
