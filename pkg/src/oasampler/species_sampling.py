"""Prior-side machinery for species sampling mixing measures.

Covers the two-parameter (Pitman-Yor / finite symmetric Dirichlet) family and
the mixture of finite mixtures with the Gnedin prior on the number of
components: exchangeable partition probability functions (EPPFs), the
stick-breaking law of the size-biased weights, size-biased picks, the
prediction rule of the ordered allocation variables and the conditional law
of ``m`` given an observed partition.

All EPPFs are evaluated in log space from log-gamma increments so that they
stay finite for large samples.
"""
from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ParameterDomainError, ResourceLimitError, UnsupportedPriorError

__all__ = [
    "INF",
    "Infinite",
    "MixingPrior",
    "PitmanYor",
    "FiniteDirichlet",
    "GnedinMFM",
    "ConstantGamma",
    "ThetaOverM",
    "BlockCounts",
    "StickWeights",
    "MPosterior",
    "log_poch",
    "eppf_two_param",
    "log_eppf_two_param",
    "eppf_mfm_given_m",
    "log_eppf_mfm_given_m",
    "eppf_bruteforce_finite_dirichlet",
    "eppf_gnedin_marginal",
    "log_eppf_gnedin_marginal",
    "gnedin_prior_pmf",
    "gnedin_prior_sf",
    "sample_gnedin_prior",
    "sample_gnedin_prior_array",
    "gnedin_m_posterior",
    "sticks_prior_draw",
    "beta_draw",
    "size_biased_pick",
    "prediction_rule_simulate",
]


class Infinite:
    """Marker for an infinite number of mixture components.

    Compares greater than every integer but refuses arithmetic, so a sentinel
    can never leak into a formula by accident.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INF"

    def __str__(self):
        return "inf"

    def __reduce__(self):
        return (Infinite, ())

    def __eq__(self, other):
        return other is self

    def __hash__(self):
        return hash("oasampler.INF")

    def __lt__(self, other):
        return False

    def __le__(self, other):
        return other is self

    def __gt__(self, other):
        return other is not self

    def __ge__(self, other):
        return True


INF = Infinite()


def log_poch(z: float, r: int) -> float:
    """Log of the rising factorial (z)_r for z > 0."""
    if r == 0:
        return 0.0
    return math.lgamma(z + r) - math.lgamma(z)


def _lgamma_diff(x: float, a: float, b: float) -> float:
    """lgamma(x + a) - lgamma(x + b), stable for very large x."""
    if x < 1e7:
        return math.lgamma(x + a) - math.lgamma(x + b)
    # Asymptotic expansion of the log-gamma ratio.
    d = a - b
    return d * math.log(x) + d * (a + b - 1.0) / (2.0 * x)


class BlockCounts(tuple):
    """Block sizes (n_1, ..., n_k) of a partition; every size is positive."""

    def __new__(cls, counts):
        counts = tuple(int(c) for c in counts)
        if not counts:
            raise ParameterDomainError("a partition needs at least one block")
        if any(c < 1 for c in counts):
            raise ParameterDomainError(f"block sizes must be positive, got {counts}")
        return super().__new__(cls, counts)

    @property
    def n(self) -> int:
        return sum(self)

    @property
    def k(self) -> int:
        return len(self)


def _canonical(counts) -> BlockCounts:
    # Sorting makes every EPPF exactly symmetric in floating point.
    return BlockCounts(sorted(BlockCounts(counts)))


# --------------------------------------------------------------------------
# EPPFs
# --------------------------------------------------------------------------

def _two_param_support(sigma: float, theta: float):
    """Return m (int or INF) for a valid (sigma, theta) pair."""
    if 0.0 <= sigma < 1.0:
        if not theta > -sigma:
            raise ParameterDomainError(f"need theta > -sigma, got sigma={sigma}, theta={theta}")
        return INF
    if sigma < 0.0:
        m_real = theta / -sigma
        m = int(round(m_real))
        if m < 1 or abs(m_real - m) > 1e-9 * max(1.0, m_real):
            raise ParameterDomainError(
                f"sigma < 0 requires theta = m * (-sigma) for an integer m >= 1, got {m_real}")
        return m
    raise ParameterDomainError(f"sigma must be < 1, got {sigma}")


def _log_prod_theta_plus_jsigma(k: int, sigma: float, theta: float, m) -> float:
    # log prod_{j=1}^{k-1} (theta + j sigma)
    if k == 1:
        return 0.0
    if sigma > 0.0:
        return (k - 1) * math.log(sigma) + math.lgamma(theta / sigma + k) - math.lgamma(theta / sigma + 1.0)
    if sigma == 0.0:
        return (k - 1) * math.log(theta)
    if k > m:
        return -math.inf
    return (k - 1) * math.log(-sigma) + math.lgamma(m) - math.lgamma(m - k + 1)


def log_eppf_two_param(counts, sigma: float, theta: float) -> float:
    counts = _canonical(counts)
    m = _two_param_support(sigma, theta)
    n, k = counts.n, counts.k
    head = _log_prod_theta_plus_jsigma(k, sigma, theta, m)
    if head == -math.inf:
        return -math.inf
    out = head - (math.lgamma(theta + n) - math.lgamma(theta + 1.0))
    base = math.lgamma(1.0 - sigma)
    for c in counts:
        out += math.lgamma(c - sigma) - base
    return out


def eppf_two_param(counts, sigma: float, theta: float) -> float:
    """EPPF of the (sigma, theta) stick-breaking model.

    Regime (a) is the Pitman-Yor process (0 <= sigma < 1, theta > -sigma);
    regime (b) is the finite symmetric Dirichlet with sigma = -gamma and
    theta = m * gamma, where more than ``m`` blocks have probability zero.
    """
    return math.exp(log_eppf_two_param(counts, sigma, theta))


def _check_gamma(gamma: float):
    if not gamma > 0.0:
        raise ParameterDomainError(f"Dirichlet parameter must be positive, got {gamma}")


def _log_v_given_m(n: int, k: int, gamma: float, m: int) -> float:
    if k > m:
        return -math.inf
    return ((k - 1) * math.log(gamma) + math.lgamma(m) - math.lgamma(m - k + 1)
            - log_poch(m * gamma + 1.0, n - 1))


def log_eppf_mfm_given_m(counts, gamma: float, m: int) -> float:
    _check_gamma(gamma)
    if m < 1:
        raise ParameterDomainError(f"m must be a positive integer, got {m}")
    counts = _canonical(counts)
    out = _log_v_given_m(counts.n, counts.k, gamma, m)
    if out == -math.inf:
        return out
    for c in counts:
        out += log_poch(1.0 + gamma, c - 1)
    return out


def eppf_mfm_given_m(counts, gamma: float, m: int) -> float:
    """EPPF of a finite mixture with ``m`` components and Dir(gamma, ..., gamma) weights."""
    return math.exp(log_eppf_mfm_given_m(counts, gamma, m))


def eppf_bruteforce_finite_dirichlet(counts, gamma: float, m: int, max_terms: int = 10**6) -> float:
    """Sum of Dirichlet moments over all ordered k-tuples of distinct indices.

    Evaluates ``sum_{(j_1..j_k)} E[prod_i p_{j_i}^{n_i}]`` literally, using the
    general Dirichlet moment for every tuple. Independent of the closed-form
    EPPF and meant only for small ``m``.
    """
    _check_gamma(gamma)
    counts = BlockCounts(counts)
    k, n = counts.k, counts.n
    if k > m:
        return 0.0
    n_terms = math.perm(m, k)
    if n_terms > max_terms:
        raise ResourceLimitError(f"{n_terms} tuples exceed the enumeration cap {max_terms}")
    alpha = [gamma] * m
    log_norm = math.lgamma(sum(alpha)) - math.lgamma(sum(alpha) + n)
    total = 0.0
    for tup in itertools.permutations(range(m), k):
        expo = [0] * m
        for j, c in zip(tup, counts):
            expo[j] = c
        log_term = log_norm
        for a, e in zip(alpha, expo):
            if e:
                log_term += math.lgamma(a + e) - math.lgamma(a)
        total += math.exp(log_term)
    return total


def _check_gamma_hat(gamma_hat: float):
    if not 0.0 < gamma_hat < 1.0:
        raise ParameterDomainError(f"gamma_hat must lie in (0, 1), got {gamma_hat}")


def _log_v_gnedin(n: int, k: int, gamma_hat: float) -> float:
    return (math.lgamma(k) + log_poch(1.0 - gamma_hat, k - 1) + log_poch(gamma_hat, n - k)
            - math.lgamma(n) - log_poch(1.0 + gamma_hat, n - 1))


def log_eppf_gnedin_marginal(counts, gamma_hat: float) -> float:
    _check_gamma_hat(gamma_hat)
    counts = _canonical(counts)
    out = _log_v_gnedin(counts.n, counts.k, gamma_hat)
    for c in counts:
        out += math.lgamma(c + 1.0)  # (2)_{c-1} = c!
    return out


def eppf_gnedin_marginal(counts, gamma_hat: float) -> float:
    """EPPF of the Dir(1, ..., 1) mixture of finite mixtures with ``m`` marginalized
    under the Gnedin prior."""
    return math.exp(log_eppf_gnedin_marginal(counts, gamma_hat))


# --------------------------------------------------------------------------
# Gnedin prior on m and the conditional law of m
# --------------------------------------------------------------------------

def gnedin_prior_pmf(m: int, gamma_hat: float) -> float:
    """p(m) = gamma_hat (1 - gamma_hat)_{m-1} / m!"""
    _check_gamma_hat(gamma_hat)
    if m < 1:
        raise ParameterDomainError(f"m must be >= 1, got {m}")
    return math.exp(math.log(gamma_hat) + log_poch(1.0 - gamma_hat, m - 1) - math.lgamma(m + 1.0))


def _log_gnedin_sf(M, gamma_hat: float) -> float:
    # P(m > M) = (1 - gamma_hat)_M / M!
    return _lgamma_diff(float(M), 1.0 - gamma_hat, 1.0) - math.lgamma(1.0 - gamma_hat)


def gnedin_prior_sf(M: int, gamma_hat: float) -> float:
    """Survival function P(m > M) of the Gnedin prior."""
    _check_gamma_hat(gamma_hat)
    if M < 0:
        return 1.0
    return math.exp(_log_gnedin_sf(M, gamma_hat))


def _gnedin_inverse_sf(log_target: float, gamma_hat: float, lower: int) -> int:
    """Smallest M >= lower with log P(m > M) <= log_target."""
    if _log_gnedin_sf(lower, gamma_hat) <= log_target:
        return lower
    lo, hi = lower, max(2 * lower, 2)
    while _log_gnedin_sf(hi, gamma_hat) > log_target:
        lo, hi = hi, hi * 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _log_gnedin_sf(mid, gamma_hat) > log_target:
            lo = mid
        else:
            hi = mid
    return hi


def sample_gnedin_prior(rng: np.random.Generator, gamma_hat: float, lower: int = 1) -> int:
    """Draw m from the Gnedin prior conditioned on m >= lower."""
    _check_gamma_hat(gamma_hat)
    u = rng.random()
    log_target = _log_gnedin_sf(lower - 1, gamma_hat) + math.log1p(-u) if lower > 1 else math.log1p(-u)
    return _gnedin_inverse_sf(log_target, gamma_hat, lower)


def _log_gnedin_sf_vec(M: np.ndarray, gamma_hat: float) -> np.ndarray:
    from scipy.special import gammaln

    M = np.asarray(M, dtype=float)
    big = M > 1e7
    Ms = np.where(big, 1.0, M)
    direct = gammaln(Ms + 1.0 - gamma_hat) - gammaln(Ms + 1.0)
    Mb = np.where(big, M, 1e7)
    asym = -gamma_hat * np.log(Mb) - gamma_hat * (1.0 - gamma_hat) / (2.0 * Mb)
    return np.where(big, asym, direct) - math.lgamma(1.0 - gamma_hat)


def sample_gnedin_prior_array(rng: np.random.Generator, gamma_hat: float, size: int) -> np.ndarray:
    """Vectorized inverse-cdf draws of m from the Gnedin prior (float array of integers)."""
    _check_gamma_hat(gamma_hat)
    target = np.log1p(-rng.random(size))
    lo = np.zeros(size)            # sf(lo) > target
    hi = np.full(size, 2.0 ** 60)  # sf(hi) <= target, up to float range
    for _ in range(64):
        mid = np.floor(0.5 * (lo + hi))
        done = hi - lo <= 1
        if done.all():
            break
        above = _log_gnedin_sf_vec(mid, gamma_hat) > target
        lo = np.where(~done & above, mid, lo)
        hi = np.where(~done & ~above, mid, hi)
    return hi


class MPosterior:
    """Discrete law of m on {k, k+1, ...} proportional to pi(counts | m) p(m).

    Probabilities are tabulated for an initial stretch of the support (the
    "head"), which is extended until it holds all but 1e-12 of the mass or
    reaches ``cap`` terms. Draws falling beyond the head are made exactly by
    rejection from the prior tail, using ``log_h(r) = log pi(counts | r)`` up
    to a constant and an envelope ``log_h_sup(R)`` over r >= R.
    """

    mass_tol = 1e-12

    def __init__(self, k: int, gamma_hat: float, cap: int = 10**6):
        self.k = k
        self.gamma_hat = gamma_hat
        self.cap = cap
        self.head = np.empty(0)
        self.cdf = np.empty(0)
        self.tail_mass = 1.0

    # subclasses provide _build_head, log_h, log_h_sup

    @property
    def support_start(self) -> int:
        return self.k

    @property
    def head_end(self) -> int:
        """First value of m not covered by the tabulated head."""
        return self.k + len(self.head)

    def pmf(self, r: int) -> float:
        if r < self.k:
            return 0.0
        if r < self.head_end:
            return float(self.head[r - self.k])
        return math.exp(self.log_pmf(r))

    def sample(self, rng: np.random.Generator) -> int:
        u = rng.random()
        if u < self.cdf[-1]:
            return self.k + int(np.searchsorted(self.cdf, u, side="right"))
        return self._sample_tail(rng)

    def _sample_tail(self, rng: np.random.Generator) -> int:
        R = self.head_end
        log_sup = self.log_h_sup(R)
        log_sf_start = _log_gnedin_sf(R - 1, self.gamma_hat)
        while True:
            r = _gnedin_inverse_sf(log_sf_start + math.log1p(-rng.random()), self.gamma_hat, R)
            if math.log(rng.random()) <= self.log_h(r) - log_sup:
                return r


class _GnedinClosedForm(MPosterior):
    """Gnedin prior with Dir(1, ..., 1) weights: closed form and recursion."""

    def __init__(self, n: int, k: int, gamma_hat: float, cap: int = 10**6):
        super().__init__(k, gamma_hat, cap)
        self.n = n
        g = gamma_hat
        j = np.arange(1, k + 1)
        self.log_q_first = float(np.sum(np.log(g + n - j)) - np.sum(np.log(n - 1.0 + j)))
        chunks, log_q, total, r0, size = [], self.log_q_first, 0.0, k, 256
        while True:
            size = min(size, cap - (r0 - k))
            r = np.arange(r0, r0 + size, dtype=float)
            # q_{r+1} = q_r r (r - g) / ((r - k + 1)(r + n))
            step = np.log(r) + np.log(r - g) - np.log(r - k + 1.0) - np.log(r + n)
            logs = log_q + np.concatenate(([0.0], np.cumsum(step[:-1])))
            q = np.exp(logs)
            chunks.append(q)
            total += q.sum()
            log_q = logs[-1] + step[-1]
            r0 += size
            if total >= 1.0 - self.mass_tol or r0 - k >= cap:
                break
            size *= 2
        self.head = np.concatenate(chunks)
        self.cdf = np.cumsum(self.head)
        self.tail_mass = max(0.0, 1.0 - float(self.cdf[-1]))

    def log_pmf(self, r: int) -> float:
        n, k, g = self.n, self.k, self.gamma_hat
        if r < k:
            return -math.inf
        return (math.log(g) + log_poch(1.0 - g, r - 1) + math.lgamma(r) - math.lgamma(r - k + 1)
                - math.lgamma(r + n) + math.lgamma(n) + log_poch(1.0 + g, n - 1)
                - math.lgamma(k) - log_poch(1.0 - g, k - 1) - log_poch(g, n - k))

    def log_h(self, r) -> float:
        # log of prod_{j<k}(r - j) / prod_{i<n}(r + i), stable for huge r
        r = float(r)
        j = np.arange(1, self.k)
        i = np.arange(1, self.n)
        return float((self.k - self.n) * math.log(r) + np.sum(np.log1p(-j / r)) - np.sum(np.log1p(i / r)))

    def log_h_sup(self, R: int) -> float:
        n, k = self.n, self.k
        if n == k:
            return 0.0  # increasing towards its limit 1
        r_star = (k - 1) * n / (n - k)
        top = max(R, int(math.ceil(r_star)) + 1)
        return max(self.log_h(r) for r in range(R, top + 1))


class _GeneralRule(MPosterior):
    """Gnedin prior on m with a per-m Dirichlet parameter gamma(m).

    The head is summed directly; the remaining tail of the normalizing
    series is added by Euler-Maclaurin summation of the continued summand.
    """

    def __init__(self, counts: BlockCounts, gamma_hat: float, rule, head_len: int = 4000):
        super().__init__(counts.k, gamma_hat, head_len)
        self.counts = counts
        self.rule = rule
        r = np.arange(self.k, self.k + max(head_len, 20 * self.k), dtype=float)
        lw = self._log_weight_vec(r)
        peak = float(lw.max())
        w = np.exp(lw - peak)
        z_tail = self._tail_sum(float(r[-1] + 1.0), peak)
        z = float(w.sum()) + z_tail
        self.log_norm = peak + math.log(z)
        self.head = w / z
        self.cdf = np.cumsum(self.head)
        self.tail_mass = z_tail / z

    def _log_weight_vec(self, r: np.ndarray) -> np.ndarray:
        from scipy.special import gammaln

        g, k, n = self.gamma_hat, self.k, self.counts.n
        gam = np.asarray(self.rule.real(r), dtype=float) * np.ones_like(r)
        out = (math.log(g) + gammaln(r - g) - math.lgamma(1.0 - g) - gammaln(r + 1.0)
               + (k - 1) * np.log(gam) + gammaln(r) - gammaln(r - k + 1.0)
               - (gammaln(r * gam + n) - gammaln(r * gam + 1.0)))
        for c in self.counts:
            out = out + gammaln(gam + c) - gammaln(1.0 + gam)
        return out

    def _tail_sum(self, start: float, shift: float) -> float:
        import mpmath

        g, k, n = self.gamma_hat, self.k, self.counts.n

        def f(r):
            gam = self.rule.real(r)
            out = (mpmath.log(g) + mpmath.loggamma(r - g) - mpmath.loggamma(1 - g)
                   - mpmath.loggamma(r + 1) + (k - 1) * mpmath.log(gam)
                   + mpmath.loggamma(r) - mpmath.loggamma(r - k + 1)
                   - mpmath.loggamma(r * gam + n) + mpmath.loggamma(r * gam + 1))
            for c in self.counts:
                out += mpmath.loggamma(gam + c) - mpmath.loggamma(1 + gam)
            return mpmath.exp(out - shift)

        return float(mpmath.sumem(f, [start, mpmath.inf]))

    def log_pmf(self, r: int) -> float:
        if r < self.k:
            return -math.inf
        return float(self._log_weight_vec(np.array([float(r)]))[0]) - self.log_norm

    def log_h(self, r) -> float:
        return log_eppf_mfm_given_m(self.counts, self.rule(int(r)), int(r))

    def log_h_sup(self, R: int) -> float:
        # Envelope read off a geometric grid; the conditional EPPF is monotone
        # this far out for both supported rules.
        return max(self.log_h(R * 2 ** i) for i in range(24)) + 1e-9


@functools.lru_cache(maxsize=128)
def _gnedin_closed_form(n: int, k: int, gamma_hat: float) -> _GnedinClosedForm:
    return _GnedinClosedForm(n, k, gamma_hat)


def gnedin_m_posterior(k_n: int, n: int, gamma_hat: float) -> MPosterior:
    """Conditional law of m given a partition of n items into k_n blocks.

    Uses Dir(1, ..., 1) weights and the Gnedin prior, for which the law has
    a closed form and a first-order recursion in m.
    """
    _check_gamma_hat(gamma_hat)
    if not 1 <= k_n <= n:
        raise ParameterDomainError(f"need 1 <= k_n <= n, got k_n={k_n}, n={n}")
    return _gnedin_closed_form(int(n), int(k_n), float(gamma_hat))


# --------------------------------------------------------------------------
# Mixing priors
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantGamma:
    """Dirichlet parameter that does not depend on m."""

    gamma: float = 1.0

    def __post_init__(self):
        _check_gamma(self.gamma)

    def __call__(self, m: int) -> float:
        return self.gamma

    def real(self, m):
        return self.gamma


@dataclass(frozen=True)
class ThetaOverM:
    """Sparse finite mixture rule gamma(m) = theta / m."""

    theta: float

    def __post_init__(self):
        _check_gamma(self.theta)

    def __call__(self, m: int) -> float:
        return self.theta / m

    def real(self, m):
        return self.theta / m


class MixingPrior:
    """Common interface of the supported mixing priors.

    Given ``m``, every prior is a (sigma, theta) stick-breaking model, so the
    samplers only need :meth:`stick_params`, :meth:`stick_posterior_params`
    and, for random ``m``, :meth:`m_posterior`.
    """

    random_m = False

    def initial_m(self, rng, lower: int = 1):
        """Starting number of components (a prior draw given m >= lower when m is random)."""
        raise NotImplementedError

    def sigma_theta(self, m):
        raise NotImplementedError

    def stick_params(self, j: int, m):
        """Beta parameters of v_j under the prior, given m."""
        sigma, theta = self.sigma_theta(m)
        return 1.0 - sigma, theta + j * sigma

    def stick_posterior_params(self, j: int, m, n_j: int, n_after: int):
        """Beta parameters of v_j given n_j items in block j and n_after in later blocks."""
        sigma, theta = self.sigma_theta(m)
        return n_j - sigma, theta + j * sigma + n_after

    def log_eppf(self, counts) -> float:
        raise NotImplementedError

    def eppf(self, counts) -> float:
        return math.exp(self.log_eppf(counts))

    # Gibbs-type product form pi = V(n, k) prod_j w(n_j), used by the marginal sampler.
    def log_v(self, n: int, k: int) -> float:
        raise UnsupportedPriorError(f"{self!r} has no Gibbs-type marginal EPPF")

    def log_block(self, size: int) -> float:
        raise UnsupportedPriorError(f"{self!r} has no Gibbs-type marginal EPPF")

    def m_posterior(self, counts) -> MPosterior:
        raise UnsupportedPriorError(f"{self!r} has a deterministic number of components")


@dataclass(frozen=True)
class PitmanYor(MixingPrior):
    sigma: float
    theta: float

    def __post_init__(self):
        if not 0.0 <= self.sigma < 1.0:
            raise ParameterDomainError(f"Pitman-Yor needs 0 <= sigma < 1, got {self.sigma}")
        _two_param_support(self.sigma, self.theta)

    def initial_m(self, rng=None, lower: int = 1):
        return INF

    def sigma_theta(self, m=INF):
        return self.sigma, self.theta

    def log_eppf(self, counts) -> float:
        return log_eppf_two_param(counts, self.sigma, self.theta)

    def log_v(self, n, k):
        return (_log_prod_theta_plus_jsigma(k, self.sigma, self.theta, INF)
                - (math.lgamma(self.theta + n) - math.lgamma(self.theta + 1.0)))

    def log_block(self, size):
        return log_poch(1.0 - self.sigma, size - 1)


@dataclass(frozen=True)
class FiniteDirichlet(MixingPrior):
    gamma: float
    m: int

    def __post_init__(self):
        _check_gamma(self.gamma)
        if int(self.m) != self.m or self.m < 1:
            raise ParameterDomainError(f"m must be a positive integer, got {self.m}")

    def initial_m(self, rng=None, lower: int = 1):
        return self.m

    def sigma_theta(self, m=None):
        return -self.gamma, self.m * self.gamma

    def log_eppf(self, counts) -> float:
        return log_eppf_mfm_given_m(counts, self.gamma, self.m)

    def log_v(self, n, k):
        return _log_v_given_m(n, k, self.gamma, self.m)

    def log_block(self, size):
        return log_poch(1.0 + self.gamma, size - 1)


@dataclass(frozen=True)
class GnedinMFM(MixingPrior):
    """Mixture of finite mixtures: m ~ Gnedin(gamma_hat), weights ~ Dir(gamma(m))."""

    gamma_hat: float
    gamma_rule: object = ConstantGamma(1.0)

    random_m = True

    def __post_init__(self):
        _check_gamma_hat(self.gamma_hat)

    @property
    def closed_form(self) -> bool:
        return isinstance(self.gamma_rule, ConstantGamma) and self.gamma_rule.gamma == 1.0

    def initial_m(self, rng, lower: int = 1):
        return sample_gnedin_prior(rng, self.gamma_hat, lower=lower)

    def sigma_theta(self, m):
        g = self.gamma_rule(m)
        return -g, m * g

    def log_eppf(self, counts) -> float:
        if self.closed_form:
            return log_eppf_gnedin_marginal(counts, self.gamma_hat)
        return _general_m_posterior(_canonical(counts), self.gamma_hat, self.gamma_rule).log_norm

    def log_v(self, n, k):
        if not self.closed_form:
            return super().log_v(n, k)
        return _log_v_gnedin(n, k, self.gamma_hat)

    def log_block(self, size):
        if not self.closed_form:
            return super().log_block(size)
        return math.lgamma(size + 1.0)

    def m_posterior(self, counts) -> MPosterior:
        counts = BlockCounts(counts)
        if self.closed_form:
            return gnedin_m_posterior(counts.k, counts.n, self.gamma_hat)
        if isinstance(self.gamma_rule, ConstantGamma):
            # the block factor does not involve m, so only (n, k) matters
            key = BlockCounts([counts.n - counts.k + 1] + [1] * (counts.k - 1))
        else:
            key = _canonical(counts)
        return _general_m_posterior(key, self.gamma_hat, self.gamma_rule)


@functools.lru_cache(maxsize=128)
def _general_m_posterior(counts: BlockCounts, gamma_hat: float, rule) -> _GeneralRule:
    return _GeneralRule(counts, gamma_hat, rule)


# --------------------------------------------------------------------------
# Sticks, size-biased picks, prediction rule
# --------------------------------------------------------------------------

def beta_draw(rng: np.random.Generator, a: float, b: float) -> float:
    """Beta draw honouring the convention Be(a, 0) = delta_1."""
    if b == 0.0:
        return 1.0
    return float(rng.beta(a, b))


@dataclass
class StickWeights:
    """Realized stick variables v_1..v_J and the size-biased weights they induce."""

    v: list
    m: object = INF

    @property
    def realized_len(self) -> int:
        return len(self.v)

    @property
    def p_tilde(self) -> np.ndarray:
        v = np.asarray(self.v, dtype=float)
        left = np.concatenate(([1.0], np.cumprod(1.0 - v)[:-1]))
        return v * left

    @property
    def remaining(self) -> np.ndarray:
        """1 - sum_{l <= j} p_l for every realized j, as a product of (1 - v_l)."""
        return np.cumprod(1.0 - np.asarray(self.v, dtype=float))


def sticks_prior_draw(prior: MixingPrior, j: int, rng: np.random.Generator, m=None) -> float:
    """Draw v_j from its prior Beta law (``m`` defaults to the prior's own m)."""
    if m is None:
        if prior.random_m:
            raise ParameterDomainError("a random-m prior needs an explicit m")
        m = prior.initial_m()
    if j < 1 or (m is not INF and j > m):
        raise ParameterDomainError(f"stick index {j} outside 1..{m}")
    a, b = prior.stick_params(j, m)
    return beta_draw(rng, a, b)


def size_biased_pick(weights: Sequence[float], rng: np.random.Generator) -> list:
    """Successive weighted sampling without replacement; returns 1-based indices."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or len(w) == 0 or np.any(w <= 0.0) or abs(w.sum() - 1.0) > 1e-9:
        raise ParameterDomainError("weights must be positive and sum to one")
    left = list(range(len(w)))
    out = []
    while left:
        sub = w[left]
        cdf = np.cumsum(sub)
        idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
        idx = min(idx, len(left) - 1)
        out.append(left.pop(idx) + 1)
    return out


def prediction_rule_simulate(prior: MixingPrior, n: int, rng: np.random.Generator) -> list:
    """Simulate ordered allocation variables d_1..d_n from the prior.

    m is drawn first (when random), then sticks are realized only as new
    components are discovered.
    """
    if n < 1:
        raise ParameterDomainError("n must be positive")
    m = prior.initial_m(rng)
    a, b = prior.stick_params(1, m)
    p = [beta_draw(rng, a, b)]
    rem = 1.0 - p[0]
    d = [1]
    for _ in range(n - 1):
        u = rng.random()
        if u >= 1.0 - rem:
            k = len(p) + 1
            a, b = prior.stick_params(k, m)
            v = beta_draw(rng, a, b)
            p.append(v * rem)
            rem *= 1.0 - v
            d.append(k)
        else:
            acc = 0.0
            for j, pj in enumerate(p, start=1):
                acc += pj
                if u < acc:
                    break
            d.append(j)
    return d
