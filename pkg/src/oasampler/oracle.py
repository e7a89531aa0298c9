"""Exact partition posteriors for small samples.

Set partitions of [n] are enumerated as restricted growth strings, which list
blocks in least-element order by construction. With conjugate components the
atoms integrate out, so the posterior of a partition is proportional to the
EPPF of its block sizes times the product of block evidences.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .components import log_evidence
from .errors import ParameterDomainError, ResourceLimitError, UnsupportedPriorError
from .species_sampling import (BlockCounts, FiniteDirichlet, GnedinMFM, MixingPrior, PitmanYor,
                               sample_gnedin_prior_array)

__all__ = [
    "enumerate_partitions",
    "PartitionTable",
    "exact_partition_posterior",
    "prior_partition_table",
    "eppf_monte_carlo",
    "canonical_labels",
    "total_variation",
]


def enumerate_partitions(n: int, max_n: int = 12) -> list:
    """All set partitions of [n] as restricted growth strings (1-based labels)."""
    if n < 1:
        raise ParameterDomainError("n must be positive")
    if n > max_n:
        raise ResourceLimitError(f"n={n} exceeds the enumeration cap {max_n}")
    out = []
    a = [1] * n
    top = [1] * n  # top[i] = max(a[:i+1])

    def rec(i):
        if i == n:
            out.append(tuple(a))
            return
        for lab in range(1, top[i - 1] + 2):
            a[i] = lab
            top[i] = max(top[i - 1], lab)
            rec(i + 1)

    rec(1)
    return out


def canonical_labels(labels) -> tuple:
    """Relabel an allocation vector so blocks are numbered in order of appearance."""
    seen = {}
    return tuple(seen.setdefault(int(x), len(seen) + 1) for x in labels)


def _counts(rgs) -> BlockCounts:
    return BlockCounts(np.bincount(rgs)[1:])


@dataclass
class PartitionTable:
    """Normalized log probabilities of every partition of [n]."""

    partitions: list
    log_posterior: np.ndarray

    @property
    def probabilities(self) -> np.ndarray:
        return np.exp(self.log_posterior)

    def as_dict(self) -> dict:
        return dict(zip(self.partitions, self.probabilities))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["partition", "probability"])
            for p, q in zip(self.partitions, self.probabilities):
                w.writerow([" ".join(map(str, p)), repr(float(q))])

    def k_pmf(self) -> dict:
        out = {}
        for p, q in zip(self.partitions, self.probabilities):
            out[max(p)] = out.get(max(p), 0.0) + float(q)
        return out


def _log_eppf(prior: MixingPrior, counts) -> float:
    if not isinstance(prior, (PitmanYor, FiniteDirichlet, GnedinMFM)):
        raise UnsupportedPriorError(f"no EPPF available for {prior!r}")
    return prior.log_eppf(counts)


def exact_partition_posterior(Y, prior: MixingPrior, hyper, max_n: int = 8) -> PartitionTable:
    """Posterior over all partitions of the data with atoms integrated out."""
    Y = np.asarray(Y, dtype=float)
    n = len(Y)
    if n > max_n:
        raise ResourceLimitError(f"n={n} exceeds the oracle cap {max_n}")
    parts = enumerate_partitions(n)
    cache = {}
    logp = np.empty(len(parts))
    for t, rgs in enumerate(parts):
        lab = np.asarray(rgs)
        lp = _log_eppf(prior, _counts(rgs))
        for j in range(1, max(rgs) + 1):
            idx = tuple(np.flatnonzero(lab == j))
            if idx not in cache:
                cache[idx] = log_evidence(hyper, Y[list(idx)])
            lp += cache[idx]
        logp[t] = lp
    return PartitionTable(parts, logp - logsumexp(logp))


def prior_partition_table(prior: MixingPrior, n: int) -> PartitionTable:
    """Prior law of the random partition of [n] (likelihood set to one)."""
    parts = enumerate_partitions(n)
    logp = np.array([_log_eppf(prior, _counts(p)) for p in parts])
    return PartitionTable(parts, logp)


def _stick_matrix(prior: MixingPrior, k: int, samples: int, rng) -> np.ndarray:
    """samples x k matrix of prior stick variables v_1..v_k (v_j = 1 for j >= m)."""
    j = np.arange(1, k + 1, dtype=float)[None, :]
    if isinstance(prior, PitmanYor):
        a = np.full((samples, k), 1.0 - prior.sigma)
        b = np.broadcast_to(prior.theta + j * prior.sigma, (samples, k))
        return rng.beta(a, b)
    if isinstance(prior, FiniteDirichlet):
        m = np.full((samples, 1), prior.m)
        g = np.full((samples, 1), prior.gamma)
    elif isinstance(prior, GnedinMFM):
        m = sample_gnedin_prior_array(rng, prior.gamma_hat, samples)[:, None]
        g = np.asarray(prior.gamma_rule.real(m), dtype=float) * np.ones_like(m)
    else:
        raise UnsupportedPriorError(f"no stick-breaking law for {prior!r}")
    b = (m - j) * g
    live = b > 0
    v = rng.beta(np.broadcast_to(1.0 + g, (samples, k)), np.where(live, b, 1.0))
    return np.where(live, v, 1.0)


def eppf_monte_carlo(prior: MixingPrior, counts, samples: int, rng):
    """Monte Carlo EPPF from size-biased sticks; returns (estimate, standard error).

    Averages prod_j p_j^(n_j - 1) prod_{j<k} (1 - sum_{l<=j} p_l) over prior
    draws of the size-biased weights.
    """
    counts = BlockCounts(counts)
    k = counts.k
    v = _stick_matrix(prior, k, samples, rng)
    rem = np.cumprod(1.0 - v, axis=1)                      # 1 - sum_{l<=j} p_l
    left = np.concatenate([np.ones((samples, 1)), rem[:, :-1]], axis=1)
    p = v * left
    x = np.prod(p ** (np.asarray(counts, dtype=float) - 1.0), axis=1) * np.prod(rem[:, :-1], axis=1)
    est = float(x.mean())
    se = float(x.std(ddof=1) / math.sqrt(samples)) if samples > 1 else math.inf
    return est, se


def total_variation(freq: dict, table: PartitionTable) -> float:
    """TV distance between empirical partition counts (keyed by RGS) and a table."""
    total = sum(freq.values())
    exact = table.as_dict()
    keys = set(exact) | set(freq)
    return 0.5 * sum(abs(freq.get(p, 0) / total - exact.get(p, 0.0)) for p in keys)
