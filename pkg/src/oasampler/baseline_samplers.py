"""Reference samplers: a collapsed (marginal) sampler and a slice sampler.

Both emit the same :class:`~oasampler.oas_sampler.TraceRecord` as the ordered
sampler, with components relabelled in order of appearance for the record.

The marginal sampler works with any prior whose EPPF factorizes as
``V(n, k) prod_j w(n_j)``: Pitman-Yor, the finite symmetric Dirichlet and the
Gnedin mixture of finite mixtures with unit Dirichlet parameter.

The slice sampler is restricted to Pitman-Yor priors. Component indices in
its state are stick indices in the original (non size-biased) ordering; the
stick stream beyond the occupied range is generated in chunks and only the
components that can receive an observation are kept.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import StateInvariantError, TruncationOverflowError, UnsupportedPriorError
from .oas_sampler import TraceRecord, deviance_from_loglik
from .species_sampling import INF, MixingPrior, PitmanYor

__all__ = ["MarginalSampler", "SliceSampler", "marginal_sweep", "slice_sweep"]


def _order_of_appearance(labels):
    """Map arbitrary labels to 0-based block ids in order of appearance."""
    uniq, first, inv = np.unique(labels, return_index=True, return_inverse=True)
    perm = np.argsort(first)
    rank = np.empty_like(perm)
    rank[perm] = np.arange(len(perm))
    return rank[inv], uniq[perm]


# --------------------------------------------------------------------------
# marginal sampler
# --------------------------------------------------------------------------

class MarginalState:
    """Partition as 0-based block ids plus one atom per block."""

    def __init__(self, z, mu, scale):
        self.z = np.asarray(z, dtype=int)
        self.mu = mu
        self.scale = scale
        self.counts = np.bincount(self.z).tolist()

    @property
    def k(self) -> int:
        return len(self.counts)

    def check_invariants(self):
        if self.k < 1 or self.k > len(self.z) or min(self.counts) < 1:
            raise StateInvariantError("invalid block counts")
        if len(self.mu) != self.k or len(self.scale) != self.k:
            raise StateInvariantError("atoms do not match blocks")
        if np.bincount(self.z).tolist() != self.counts:
            raise StateInvariantError("cached counts out of date")


def _check_gibbs_type(prior: MixingPrior):
    try:
        prior.log_v(2, 1)
        prior.log_block(1)
    except UnsupportedPriorError:
        raise
    except NotImplementedError as exc:  # pragma: no cover - defensive
        raise UnsupportedPriorError(str(exc)) from exc


def marginal_sweep(state: MarginalState, Y, family, prior: MixingPrior, rng, cache=None) -> MarginalState:
    """Reallocate each observation with atoms kept for occupied blocks only.

    Existing block j gets weight V(n, k) w(n_j + 1) / w(n_j) g(y_i | x_j) and a
    new block V(n, k + 1) w(1) times the prior predictive of y_i; a new block
    receives an atom drawn from the posterior given y_i alone. All atoms are
    redrawn at the end and blocks relabelled in order of appearance.
    """
    n = len(Y)
    cache = _marginal_cache(prior, family, Y) if cache is None else cache
    lpred = cache["lpred"]
    grow = cache["grow"]        # grow[k] = V(n, k + 1) w(1) / V(n, k)
    gain = cache["gain"]        # gain[s] = w(s + 1) / w(s)
    # atoms live in slots; likelihoods are kept relative to the prior predictive
    mu, scale = state.mu, state.scale
    rel = np.exp(family.loglik(Y, mu, scale) - lpred[:, None]).tolist()
    z = state.z.tolist()
    counts = list(state.counts)
    occ = list(range(len(counts)))
    draws = rng.random(n).tolist()
    new_atoms = []
    for i in range(n):
        c = z[i]
        counts[c] -= 1
        if counts[c] == 0:
            occ.remove(c)
        k = len(occ)
        row = rel[i]
        w = [gain[counts[j]] * row[j] for j in occ]
        w.append(grow[k])
        target = draws[i] * math.fsum(w)
        acc = 0.0
        pick = k
        for t, x in enumerate(w):
            acc += x
            if target < acc:
                pick = t
                break
        if pick == k:
            atom = family.single_posterior_draw(Y[i], rng)
            col = np.exp(family.loglik(Y, atom[0], atom[1])[:, 0] - lpred).tolist()
            for r, x in zip(rel, col):
                r.append(x)
            new_atoms.append(atom)
            e = len(counts)
            counts.append(1)
            occ.append(e)
        else:
            e = occ[pick]
            counts[e] += 1
        z[i] = e
    z, _ = _order_of_appearance(np.asarray(z))
    state.z = z
    state.counts = np.bincount(z).tolist()
    state.mu, state.scale = family.posterior_draw(Y, z, len(state.counts), rng)
    return state


def _marginal_cache(prior, family, Y):
    _check_gibbs_type(prior)
    n = len(Y)
    table = {}

    def log_v(nn, kk):
        key = (nn, kk)
        if key not in table:
            table[key] = prior.log_v(nn, kk) if kk <= nn else -math.inf
        return table[key]

    log_block = np.array([0.0] + [prior.log_block(s) for s in range(1, n + 2)])
    gain = [0.0] + np.exp(np.diff(log_block[1:])).tolist()
    with np.errstate(invalid="ignore"):
        grow = [1.0] + [math.exp(log_v(n, k + 1) - log_v(n, k) + log_block[1]) for k in range(1, n)]
    return {"log_v": log_v, "log_block": log_block, "gain": gain, "grow": grow,
            "lpred": family.log_predictive(Y)}


class MarginalSampler:
    name = "marginal"

    def __init__(self, Y, prior: MixingPrior, family, rng, check=False):
        self.Y = family.as_data(Y)
        self.prior = prior
        self.family = family
        self.rng = rng
        self.check = check
        self.cache = _marginal_cache(prior, family, self.Y)
        z = np.zeros(len(self.Y), dtype=int)
        mu, scale = family.posterior_draw(self.Y, z, 1, rng)
        self.state = MarginalState(z, mu, scale)
        self.iteration = 0

    def advance(self):
        """One sweep without building a record."""
        st = marginal_sweep(self.state, self.Y, self.family, self.prior, self.rng, self.cache)
        if self.check:
            st.check_invariants()
        self.iteration += 1
        return st

    @property
    def labels(self) -> np.ndarray:
        return self.state.z + 1

    def step(self) -> TraceRecord:
        st = self.advance()
        n = len(self.Y)
        k = st.k
        cnt = np.asarray(st.counts)
        lb = self.cache["log_block"]
        # expected weights of the occupied components given the partition
        w = np.exp(self.cache["log_v"](n + 1, k) - self.cache["log_v"](n, k) + lb[cnt + 1] - lb[cnt])
        ll = self.family.loglik(self.Y, st.mu, st.scale)
        return TraceRecord(
            iteration=self.iteration,
            k_n=k,
            m=None,
            deviance=deviance_from_loglik(ll, st.counts),
            weights=w,
            mu=st.mu.copy(),
            scale=st.scale.copy(),
            counts=tuple(st.counts),
            labels=st.z + 1,
        )


# --------------------------------------------------------------------------
# slice sampler
# --------------------------------------------------------------------------

class SliceState:
    """Stick-index allocations and the atoms of occupied components."""

    def __init__(self, c, atoms: dict):
        self.c = np.asarray(c, dtype=np.int64)
        self.atoms = atoms  # stick index -> (mu, scale)
        self.u = None
        self.last_J = 0
        self.last_candidates = 0


_MAX_CHUNK = 1 << 20  # sticks generated per batch; bounds memory during long streams


def slice_sweep(state: SliceState, Y, family, prior: PitmanYor, rng, max_sticks: int = 10**6,
                chunk: int = 32) -> SliceState:
    """One sweep of the slice sampler.

    Sticks are updated with the slice variables integrated out, then
    u_i ~ U(0, p_{c_i}); the stick stream is extended until the unallocated
    mass drops below min u_i; each c_i is redrawn over {j : p_j > u_i} with
    weights g(y_i | x_j); finally occupied atoms are redrawn.
    """
    if not isinstance(prior, PitmanYor):
        raise UnsupportedPriorError("the slice sampler supports Pitman-Yor priors only")
    sigma, theta = prior.sigma, prior.theta
    n = len(Y)
    c = state.c
    L = int(c.max()) + 1
    cnt = np.bincount(c, minlength=L).astype(float)
    after = np.concatenate([np.cumsum(cnt[::-1])[::-1][1:], [0.0]])
    j1 = np.arange(1, L + 1, dtype=float)
    v = rng.beta(1.0 - sigma + cnt, theta + j1 * sigma + after)
    log1m = np.log1p(-v)
    log_rem = np.cumsum(log1m)
    log_p = np.log(v) + np.concatenate(([0.0], log_rem[:-1]))

    u = rng.random(n) * np.exp(log_p[c])
    log_umin = math.log(u.min()) if u.min() > 0 else -math.inf

    cand_idx = [np.flatnonzero(log_p > log_umin)]
    cand_lp = [log_p[cand_idx[0]]]
    rem, J = float(log_rem[-1]), L
    size = chunk
    while rem >= log_umin:
        if J + size > max_sticks:
            size = max_sticks - J
            if size <= 0:
                raise TruncationOverflowError(
                    f"slice sampler needs more than {max_sticks} sticks (min u = {u.min():.3e})")
        jj = np.arange(J + 1, J + size + 1, dtype=float)
        vv = rng.beta(1.0 - sigma, theta + jj * sigma)
        lr = rem + np.cumsum(np.log1p(-vv))
        lp = np.log(vv) + np.concatenate(([rem], lr[:-1]))
        hit = np.flatnonzero(lp > log_umin)
        cand_idx.append(J + hit)
        cand_lp.append(lp[hit])
        rem = float(lr[-1])
        J += size
        size = min(2 * size, _MAX_CHUNK)
    idx = np.concatenate(cand_idx)
    lp = np.concatenate(cand_lp)
    state.last_J = J
    state.last_candidates = len(idx)

    # atoms: occupied keep theirs, every other candidate is a prior draw
    occupied = np.array([state.atoms.get(int(j)) is not None for j in idx])
    fresh_mu, fresh_scale = family.prior_draw(int((~occupied).sum()), rng)
    mu = np.empty((len(idx),) + fresh_mu.shape[1:])
    scale = np.empty((len(idx),) + fresh_scale.shape[1:])
    mu[~occupied], scale[~occupied] = fresh_mu, fresh_scale
    for t in np.flatnonzero(occupied):
        mu[t], scale[t] = state.atoms[int(idx[t])]

    # A_i is a prefix of the candidates sorted by decreasing weight
    order = np.argsort(-lp, kind="stable")
    idx, lp, mu, scale = idx[order], lp[order], mu[order], scale[order]
    with np.errstate(divide="ignore"):
        width = np.searchsorted(-lp, -np.log(u), side="left")
    if np.any(width < 1):
        raise StateInvariantError("empty slice set")
    new_c = np.empty(n, dtype=np.int64)
    rows = np.argsort(width, kind="stable")
    budget = 4_000_000
    start = 0
    draws = rng.random(n)
    while start < n:
        w_max = int(width[rows[start]])
        stop = start + 1
        while stop < n and (stop - start + 1) * int(width[rows[stop]]) <= budget:
            stop += 1
        w_max = int(width[rows[stop - 1]])
        sel = rows[start:stop]
        ll = family.loglik(Y[sel], mu[:w_max], scale[:w_max])
        ll[np.arange(w_max)[None, :] >= width[sel][:, None]] = -np.inf
        ll -= ll.max(axis=1, keepdims=True)
        cdf = np.cumsum(np.exp(ll), axis=1)
        pick = (cdf < (draws[sel] * cdf[:, -1])[:, None]).sum(axis=1)
        new_c[sel] = idx[np.minimum(pick, width[sel] - 1)]
        start = stop
    state.c = new_c
    state.u = u

    # conjugate redraw of occupied atoms
    occ, z = np.unique(new_c, return_inverse=True)
    a_mu, a_scale = family.posterior_draw(Y, z, len(occ), rng)
    state.atoms = {int(j): (a_mu[t], a_scale[t]) for t, j in enumerate(occ)}
    state.log_p = dict(zip(idx.tolist(), lp.tolist()))
    return state


class SliceSampler:
    name = "slice"

    def __init__(self, Y, prior: MixingPrior, family, rng, max_sticks: int = 10**6, check=False):
        if not isinstance(prior, PitmanYor):
            raise UnsupportedPriorError("the slice sampler supports Pitman-Yor priors only")
        self.Y = family.as_data(Y)
        self.prior = prior
        self.family = family
        self.rng = rng
        self.max_sticks = max_sticks
        self.check = check
        z = np.zeros(len(self.Y), dtype=int)
        mu, scale = family.posterior_draw(self.Y, z, 1, rng)
        self.state = SliceState(z, {0: (mu[0], scale[0])})
        self.iteration = 0
        self.max_J = 0
        self.J_history = []

    def advance(self):
        """One sweep without building a record."""
        st = slice_sweep(self.state, self.Y, self.family, self.prior, self.rng, self.max_sticks)
        self.max_J = max(self.max_J, st.last_J)
        self.J_history.append(st.last_J)
        if self.check:
            logp_c = np.array([st.log_p[int(j)] for j in st.c])
            if not np.all(np.log(st.u) < logp_c):
                raise StateInvariantError("slice variable above its component weight")
        self.iteration += 1
        return st

    @property
    def labels(self) -> np.ndarray:
        return _order_of_appearance(self.state.c)[0] + 1

    def step(self) -> TraceRecord:
        st = self.advance()
        z, order = _order_of_appearance(st.c)
        counts = np.bincount(z)
        mu, scale = self.family.stack_atoms([st.atoms[int(j)] for j in order])
        weights = np.exp([st.log_p[int(j)] for j in order])
        ll = self.family.loglik(self.Y, mu, scale)
        return TraceRecord(
            iteration=self.iteration,
            k_n=len(order),
            m=INF,
            deviance=deviance_from_loglik(ll, counts),
            weights=weights,
            mu=mu,
            scale=scale,
            counts=tuple(int(x) for x in counts),
            labels=z + 1,
        )
