"""Ordered allocation Gibbs sampler.

Components are indexed in order of appearance. The state holds the ordered
allocation variables ``d`` (1-based labels with ``d[0] == 1`` and blocks in
least-element order), the stick variables ``v`` and atoms realized up to some
length ``J >= k_n``, and the number of components ``m``.

One sweep updates, in turn, occupied atoms, ``m`` (random-m priors only),
sticks together with fresh atoms for unoccupied components, and then each
``d_i`` over its admissible moves. Sticks and atoms beyond ``k_n`` are only
realized when a move to a new component becomes admissible.

Positions are 0-based internally; the public ``admissible_moves`` takes a
1-based position to match the usual notation.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterDomainError, StateInvariantError
from .species_sampling import INF, MixingPrior, beta_draw, prediction_rule_simulate

__all__ = [
    "OrderedState",
    "OrderedPartition",
    "TraceRecord",
    "admissible_moves",
    "init_state",
    "update_atoms",
    "update_m",
    "update_sticks",
    "refresh_unoccupied_atoms",
    "update_allocations",
    "sweep",
    "deviance_from_loglik",
    "OrderedAllocationSampler",
]


@dataclass
class TraceRecord:
    """Per-iteration summary shared by all samplers.

    ``weights``, ``mu`` and ``scale`` cover the realized components (at least
    the k_n occupied ones) in order of appearance; ``counts`` cover the
    occupied ones. ``labels`` are 1-based block labels in order of appearance.
    ``m`` is an int, ``INF``, or None when m is integrated out.
    """

    iteration: int
    k_n: int
    m: object
    deviance: float
    weights: np.ndarray
    mu: np.ndarray
    scale: np.ndarray
    counts: tuple
    labels: np.ndarray = field(default=None, repr=False)


@dataclass
class OrderedPartition:
    """Blocks of positions (0-based) in least-element order."""

    blocks: list

    @classmethod
    def from_labels(cls, d) -> "OrderedPartition":
        blocks = {}
        for i, lab in enumerate(d):
            blocks.setdefault(int(lab), []).append(i)
        out = [blocks[j] for j in sorted(blocks)]
        part = cls(out)
        part.validate()
        return part

    @property
    def counts(self) -> tuple:
        return tuple(len(b) for b in self.blocks)

    def labels(self) -> list:
        n = sum(self.counts)
        d = [0] * n
        for j, b in enumerate(self.blocks, start=1):
            for i in b:
                d[i] = j
        return d

    def validate(self):
        mins = [min(b) for b in self.blocks if b]
        if len(mins) != len(self.blocks):
            raise StateInvariantError("empty block")
        if any(a >= b for a, b in zip(mins, mins[1:])):
            raise StateInvariantError("blocks not in least-element order")


class OrderedState:
    """Mutable state of the ordered allocation sampler."""

    def __init__(self, d, m, v, mu, scale):
        self.d = [int(x) for x in d]
        self.n = len(self.d)
        self.m = m
        self.v = np.asarray(v, dtype=float)
        self.mu = mu
        self.scale = scale
        self._rebuild_blocks()

    def _rebuild_blocks(self):
        k = max(self.d)
        counts = [0] * k
        mins = [-1] * k
        for i, lab in enumerate(self.d):
            if lab < 1 or lab > k:
                raise StateInvariantError(f"label {lab} outside 1..{k}")
            if counts[lab - 1] == 0:
                mins[lab - 1] = i
            counts[lab - 1] += 1
        self.counts = counts
        self.mins = mins

    @property
    def k_n(self) -> int:
        return len(self.counts)

    @property
    def J(self) -> int:
        return len(self.v)

    @property
    def p_tilde(self) -> np.ndarray:
        left = np.concatenate(([1.0], np.cumprod(1.0 - self.v)[:-1]))
        return self.v * left

    def check_invariants(self):
        d, counts, mins = self.d, self.counts, self.mins
        if d[0] != 1:
            raise StateInvariantError("d_1 must equal 1")
        k = self.k_n
        if max(d) != k or any(c <= 0 for c in counts):
            raise StateInvariantError("k_n inconsistent with block counts")
        if any(a >= b for a, b in zip(mins, mins[1:])):
            raise StateInvariantError("blocks not in least-element order")
        fresh = OrderedState.__new__(OrderedState)
        fresh.d = d
        fresh._rebuild_blocks()
        if fresh.counts != counts or fresh.mins != mins:
            raise StateInvariantError("cached block statistics out of date")
        if k > self.n or (self.m is not INF and k > self.m):
            raise StateInvariantError("k_n exceeds min(n, m)")
        if self.J < k or (self.m is not INF and self.J > self.m):
            raise StateInvariantError("realized length out of range")
        if float(np.sum(self.p_tilde)) > 1.0 + 1e-12:
            raise StateInvariantError("realized weights exceed one")


def _admissible(d, counts, mins, i, m):
    """Admissible labels for position ``i`` (0-based).

    Returns ``(top, new, kstar)``: labels 1..top are admissible among existing
    components, ``new`` tells whether the new component kstar + 1 is also
    admissible, and a negative ``top`` encodes the single frozen label -top.
    """
    c = d[i]
    k = len(counts)
    if i == 0:
        return -1, False, k
    alone = counts[c - 1] == 1
    if alone and c < k:
        return -c, False, k
    kstar = k - 1 if (alone and c == k) else k
    is_min = mins[c - 1] == i
    if is_min and not alone and c < kstar:
        nxt = d.index(c, i + 1)
        if nxt > mins[c]:
            return -c, False, kstar
    r = bisect.bisect_left(mins, i)
    if alone and c == k:
        r = k - 1
    top = min(r + 1, kstar)
    new = r == kstar and (m is INF or kstar < m)
    return top, new, kstar


def admissible_moves(d, i: int, m=INF) -> set:
    """Set of labels that d_i (1-based position ``i``) may take.

    A label is admissible when relabelling d_i keeps every block non-empty and
    the blocks in least-element order. ``m`` bounds the number of components.
    """
    d = [int(x) for x in d]
    if not 1 <= i <= len(d):
        raise StateInvariantError(f"position {i} outside 1..{len(d)}")
    state = OrderedState.__new__(OrderedState)
    state.d = d
    state._rebuild_blocks()
    if d[0] != 1 or any(a >= b for a, b in zip(state.mins, state.mins[1:])):
        raise StateInvariantError("d is not in least-element order")
    top, new, kstar = _admissible(d, state.counts, state.mins, i - 1, m)
    if top < 0:
        return {-top}
    out = set(range(1, top + 1))
    if new:
        out.add(kstar + 1)
    return out


# --------------------------------------------------------------------------
# conditional updates
# --------------------------------------------------------------------------

def _realize(state: OrderedState, J: int, prior: MixingPrior, family, rng):
    """Extend sticks and atoms with prior draws up to length J."""
    start = state.J
    if J <= start:
        return
    v = [beta_draw(rng, *prior.stick_params(j, state.m)) for j in range(start + 1, J + 1)]
    mu, scale = family.prior_draw(J - start, rng)
    state.v = np.concatenate([state.v, v])
    state.mu, state.scale = family.append((state.mu, state.scale), (mu, scale))


def update_atoms(state: OrderedState, Y, family, rng) -> OrderedState:
    """Redraw every occupied atom from its conjugate posterior."""
    labels = np.asarray(state.d) - 1
    mu, scale = family.posterior_draw(Y, labels, state.k_n, rng)
    state.mu = state.mu.copy()
    state.scale = state.scale.copy()
    state.mu[: state.k_n] = mu
    state.scale[: state.k_n] = scale
    return state


def update_m(state: OrderedState, prior: MixingPrior, rng) -> OrderedState:
    """Redraw m given the block counts; identity for deterministic m."""
    if not prior.random_m:
        return state
    state.m = prior.m_posterior(state.counts).sample(rng)
    if state.J > state.m:
        state.v = state.v[: state.m]
        state.mu = state.mu[: state.m]
        state.scale = state.scale[: state.m]
    return state


def update_sticks(state: OrderedState, prior: MixingPrior, rng) -> OrderedState:
    """Posterior Beta draws for occupied sticks and prior draws for the rest."""
    k, m = state.k_n, state.m
    counts = state.counts
    after = np.concatenate([np.cumsum(counts[::-1])[::-1][1:], [0]]).tolist()
    v = np.empty(state.J)
    for j in range(1, state.J + 1):
        if m is not INF and j == m:
            v[j - 1] = 1.0
        elif j <= k:
            v[j - 1] = beta_draw(rng, *prior.stick_posterior_params(j, m, counts[j - 1], after[j - 1]))
        else:
            v[j - 1] = beta_draw(rng, *prior.stick_params(j, m))
    state.v = v
    return state


def refresh_unoccupied_atoms(state: OrderedState, family, rng) -> OrderedState:
    """Replace realized atoms beyond k_n with fresh prior draws."""
    extra = state.J - state.k_n
    if extra > 0:
        mu, scale = family.prior_draw(extra, rng)
        state.mu = state.mu.copy()
        state.scale = state.scale.copy()
        state.mu[state.k_n:] = mu
        state.scale[state.k_n:] = scale
    return state


def _scan_tables(state: OrderedState, ll: np.ndarray):
    """Per-row rescaled weights p_j g(y_i | x_j) and the remainders 1 - sum_{l<=j} p_l."""
    with np.errstate(divide="ignore", under="ignore"):
        lik = np.exp(ll - ll.max(axis=1, keepdims=True))
    rem = np.cumprod(1.0 - state.v)
    p = state.v * np.concatenate(([1.0], rem[:-1]))
    return (lik * p).tolist(), lik.tolist(), rem.tolist()


def _log_space_weights(state: OrderedState, row, top, new, kstar):
    with np.errstate(divide="ignore"):
        log_rem = np.cumsum(np.log1p(-state.v))
        log_p = np.log(state.v) + np.concatenate(([0.0], log_rem[:-1]))
    lw = list(log_p[:top] + row[:top])
    if new:
        lw.append(log_rem[kstar - 1] + row[kstar])
    lw = np.asarray(lw)
    peak = lw.max()
    if not np.isfinite(peak):
        return None
    return np.exp(lw - peak).tolist()


def update_allocations(state: OrderedState, Y, family, prior: MixingPrior, rng) -> np.ndarray:
    """Scan i = 1..n, redrawing each d_i over its admissible moves.

    Returns the log-likelihood matrix of all data against the realized atoms,
    which the caller can reuse (e.g. for the deviance).
    """
    d, counts, mins, m = state.d, state.counts, state.mins, state.m
    ll = family.loglik(Y, state.mu, state.scale)
    W, lik, rem = _scan_tables(state, ll)
    U = rng.random(state.n).tolist()
    for i in range(state.n):
        top, new, kstar = _admissible(d, counts, mins, i, m)
        if top < 0:
            continue
        if new and state.J < kstar + 1:
            _realize(state, kstar + 1, prior, family, rng)
            ll = np.concatenate([ll, family.loglik(Y, state.mu[state.J - 1:], state.scale[state.J - 1:])],
                                axis=1)
            W, lik, rem = _scan_tables(state, ll)
        w = W[i][:top]
        if new:
            w.append(rem[kstar - 1] * lik[i][kstar])
        total = math.fsum(w)
        if not total > 0.0 or not math.isfinite(total):
            w = _log_space_weights(state, ll[i], top, new, kstar)
            if w is None:
                raise StateInvariantError(f"no admissible move with positive weight at position {i + 1}")
            total = math.fsum(w)
        target = U[i] * total
        acc = 0.0
        pick = len(w) - 1
        for t, x in enumerate(w):
            acc += x
            if target < acc:
                pick = t
                break
        e = pick + 1
        if new and e == top + 1:
            e = kstar + 1
        c = d[i]
        if e == c:
            continue
        # remove i from block c
        counts[c - 1] -= 1
        if counts[c - 1] == 0:
            counts.pop()
            mins.pop()
        elif mins[c - 1] == i:
            mins[c - 1] = d.index(c, i + 1)
        # add i to block e
        d[i] = e
        if e > len(counts):
            counts.append(1)
            mins.append(i)
        else:
            counts[e - 1] += 1
            if i < mins[e - 1]:
                mins[e - 1] = i
    return ll


def deviance_from_loglik(ll: np.ndarray, counts) -> float:
    """-2 sum_i log sum_j (n_j / n) g(y_i | x_j) over occupied components."""
    counts = np.asarray(counts, dtype=float)
    k = len(counts)
    a = ll[:, :k] + np.log(counts / counts.sum())[None, :]
    peak = a.max(axis=1)
    return float(-2.0 * np.sum(peak + np.log(np.exp(a - peak[:, None]).sum(axis=1))))


def sweep(state: OrderedState, Y, family, prior: MixingPrior, rng):
    """One full Gibbs iteration; returns (state, deviance)."""
    update_atoms(state, Y, family, rng)
    update_m(state, prior, rng)
    update_sticks(state, prior, rng)
    refresh_unoccupied_atoms(state, family, rng)
    ll = update_allocations(state, Y, family, prior, rng)
    return state, deviance_from_loglik(ll, state.counts)


def init_state(Y, prior: MixingPrior, family, rng, init_mode="single_block", k=None) -> OrderedState:
    """Initial state: one block (default), a prediction-rule draw, or exactly k blocks.

    Starting with all observations in distinct blocks is refused because the
    sampler then tends to stall.
    """
    n = len(Y)
    if n < 1:
        raise ParameterDomainError("need at least one observation")
    if init_mode == "single_block":
        d = [1] * n
    elif init_mode == "prediction_rule":
        d = prediction_rule_simulate(prior, n, rng)
    elif init_mode == "k_blocks":
        if k is None or not 1 <= k <= n:
            raise ParameterDomainError(f"k_blocks needs 1 <= k <= n, got k={k}")
        if k == n and n > 1:
            raise ParameterDomainError("initializing every observation in its own block is not allowed")
        m0 = prior.initial_m(rng, lower=k)
        if m0 is not INF and k > m0:
            raise ParameterDomainError(f"k={k} exceeds the number of components")
        # the first k items open blocks 1..k; the rest follow the prediction
        # rule restricted to those blocks
        v = np.array([beta_draw(rng, *prior.stick_params(j, m0)) for j in range(1, k + 1)])
        w = v * np.concatenate(([1.0], np.cumprod(1.0 - v)[:-1]))
        cdf = np.cumsum(w)
        picks = np.searchsorted(cdf, rng.random(n - k) * cdf[-1], side="right")
        d = list(range(1, k + 1)) + [int(x) + 1 for x in np.minimum(picks, k - 1)]
    else:
        raise ParameterDomainError(f"unknown init mode {init_mode!r}")
    k_n = max(d)
    if prior.random_m:
        counts = np.bincount(d)[1:]
        m = prior.m_posterior(tuple(int(c) for c in counts)).sample(rng)
    else:
        m = prior.initial_m(rng)
        if m is not INF and k_n > m:
            raise ParameterDomainError(f"initial partition has {k_n} blocks but m={m}")
    state = OrderedState(d, m, np.empty(0), *family.empty_atoms())
    _realize(state, k_n, prior, family, rng)
    return state


class OrderedAllocationSampler:
    """Driver holding data, prior, family and RNG for the ordered sampler."""

    name = "ordered"

    def __init__(self, Y, prior: MixingPrior, family, rng, init_mode="single_block", k=None,
                 check=False):
        self.Y = family.as_data(Y)
        self.prior = prior
        self.family = family
        self.rng = rng
        self.check = check
        self.state = init_state(self.Y, prior, family, rng, init_mode, k)
        self.iteration = 0

    def advance(self):
        """One sweep without building a record; returns the deviance."""
        state, dev = sweep(self.state, self.Y, self.family, self.prior, self.rng)
        if self.check:
            state.check_invariants()
        self.iteration += 1
        return dev

    @property
    def labels(self) -> np.ndarray:
        return np.asarray(self.state.d)

    def step(self) -> TraceRecord:
        dev = self.advance()
        state = self.state
        k = state.k_n
        return TraceRecord(
            iteration=self.iteration,
            k_n=k,
            m=state.m,
            deviance=dev,
            weights=state.p_tilde,
            mu=state.mu.copy(),
            scale=state.scale.copy(),
            counts=tuple(state.counts),
            labels=np.asarray(state.d),
        )
