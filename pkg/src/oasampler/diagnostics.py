"""MCMC diagnostics and posterior estimators computed from chain traces."""
from __future__ import annotations

import math

import numpy as np
from scipy.special import logsumexp

from .errors import ParameterDomainError, UnsupportedPriorError
from .species_sampling import INF

__all__ = [
    "IATEstimate",
    "iat",
    "deviance",
    "density_estimate",
    "component_density_estimate",
    "occupancy_posterior",
    "m_posterior",
    "label_change_rate",
    "pmf_total_variation",
]


class IATEstimate(float):
    """Integrated autocorrelation time; ``degenerate`` flags a constant series."""

    degenerate: bool
    lags: int

    def __new__(cls, value, degenerate=False, lags=0):
        obj = super().__new__(cls, value)
        obj.degenerate = degenerate
        obj.lags = lags
        return obj


def iat(series) -> IATEstimate:
    """Geyer initial positive sequence estimate of tau = 1 + 2 sum_l rho_l.

    Pairs Gamma_k = rho_2k + rho_2k+1 are summed until the first negative pair.
    Autocorrelations are direct sums; the estimate is floored at 1.
    """
    x = np.asarray(series, dtype=float)
    n = len(x)
    if x.ndim != 1 or n < 100:
        raise ParameterDomainError("iat needs a 1-d series of length >= 100")
    x = x - x.mean()
    c0 = float(np.dot(x, x)) / n
    if c0 <= 1e-300 * max(1.0, float(np.max(np.abs(series)))):
        return IATEstimate(1.0, degenerate=True)

    def rho(lag):
        return float(np.dot(x[: n - lag], x[lag:])) / (n * c0)

    total = 0.0
    k = 0
    while 2 * k + 1 < n:
        pair = (1.0 if k == 0 else rho(2 * k)) + rho(2 * k + 1)
        if pair < 0.0:
            break
        total += pair
        k += 1
    return IATEstimate(max(1.0, -1.0 + 2.0 * total), lags=2 * k)


def deviance(counts, mu, scale, Y, family) -> float:
    """-2 sum_i log sum_j (n_j / n) g(y_i | x_j); zero-count components drop out."""
    counts = np.asarray(counts, dtype=float)
    if counts.sum() <= 0:
        raise ParameterDomainError("deviance needs at least one occupied component")
    occ = counts > 0
    ll = family.loglik(family.as_data(Y), np.asarray(mu)[occ], np.asarray(scale)[occ])
    lw = np.log(counts[occ] / counts.sum())
    return float(-2.0 * np.sum(logsumexp(ll + lw[None, :], axis=1)))


def _records(trace):
    return trace.records if hasattr(trace, "records") else list(trace)


def density_estimate(trace, grid, family, mode: str = "full") -> np.ndarray:
    """Posterior mean density on a grid.

    ``full`` averages sum_j p_j g(y | x_j) plus the unrealized mass times the
    prior predictive; ``empirical`` averages sum_j (n_j / n) g(y | x_j).
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ParameterDomainError("empty grid")
    recs = _records(trace)
    if not recs:
        raise ParameterDomainError("empty trace")
    if mode not in ("full", "empirical"):
        raise ParameterDomainError(f"unknown mode {mode!r}")
    pred = np.exp(family.log_predictive(grid)) if mode == "full" else None
    out = np.zeros(len(grid))
    for r in recs:
        if mode == "full":
            w = np.asarray(r.weights, dtype=float)
            J = len(w)
            out += family.density(grid, w, r.mu[:J], r.scale[:J])
            out += max(0.0, 1.0 - float(w.sum())) * pred
        else:
            cnt = np.asarray(r.counts, dtype=float)
            k = len(cnt)
            out += family.density(grid, cnt / cnt.sum(), r.mu[:k], r.scale[:k])
    return out / len(recs)


def component_density_estimate(trace, grid, j: int, family, mode: str = "weight") -> np.ndarray:
    """Posterior mean weighted density of the j-th component (1-based, order of appearance).

    ``weight`` uses the component weight p_j, ``empirical`` uses n_j / n.
    Iterations at which component j is not realized contribute zero.
    """
    if j < 1:
        raise ParameterDomainError("component index starts at 1")
    if mode not in ("weight", "empirical"):
        raise ParameterDomainError(f"unknown mode {mode!r}")
    grid = np.asarray(grid, dtype=float)
    recs = _records(trace)
    out = np.zeros(len(grid))
    for r in recs:
        if mode == "weight":
            if j > len(r.weights) or (r.m is not None and r.m is not INF and j > r.m):
                continue
            w = float(r.weights[j - 1])
        else:
            if j > len(r.counts):
                continue
            w = r.counts[j - 1] / sum(r.counts)
        out += family.density(grid, np.array([w]), r.mu[j - 1:j], r.scale[j - 1:j])
    return out / max(len(recs), 1)


def occupancy_posterior(trace) -> dict:
    """Empirical pmf of k_n."""
    recs = _records(trace)
    if not recs:
        raise ParameterDomainError("empty trace")
    vals, freq = np.unique([r.k_n for r in recs], return_counts=True)
    return {int(v): f / len(recs) for v, f in zip(vals, freq)}


def m_posterior(trace) -> dict:
    """Empirical pmf of m; only defined for chains with a random number of components."""
    recs = _records(trace)
    if not recs:
        raise ParameterDomainError("empty trace")
    ms = [r.m for r in recs]
    if _fixed_m(trace) or any(m is None or m is INF for m in ms):
        raise UnsupportedPriorError("m is not random in this chain")
    vals, freq = np.unique(ms, return_counts=True)
    return {int(v): f / len(recs) for v, f in zip(vals, freq)}


def _fixed_m(trace) -> bool:
    header = getattr(trace, "header", {})
    return header.get("random_m", "true") == "false"


def label_change_rate(trace) -> float:
    """Fraction of consecutive iterations where the nearest-atom matching is not the identity.

    For each j <= min(k_n^t, k_n^t+1) the atom mean x_j^t is matched to the
    closest atom mean at t+1 among the first k_n^t+1; a pair of iterations
    counts as a change when any j is matched to an index other than itself.
    """
    recs = _records(trace)
    if len(recs) < 2:
        return 0.0
    changes = 0
    for a, b in zip(recs, recs[1:]):
        k = min(a.k_n, b.k_n)
        ma = np.asarray(a.mu[:k], dtype=float).reshape(k, -1)
        mb = np.asarray(b.mu[: b.k_n], dtype=float).reshape(b.k_n, -1)
        dist = ((ma[:, None, :] - mb[None, :, :]) ** 2).sum(axis=2)
        if np.any(np.argmin(dist, axis=1) != np.arange(k)):
            changes += 1
    return changes / (len(recs) - 1)


def pmf_total_variation(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)
