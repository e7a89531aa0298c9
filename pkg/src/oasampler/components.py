"""Conjugate Gaussian component families.

Two kernel/base-measure pairs are provided:

* univariate Gaussian kernel with a normal-inverse-gamma (NIG) base measure,
  ``mu | s2 ~ N(phi, s2 / lam)``, ``s2 ~ IG(a, b)``;
* bivariate Gaussian kernel with a normal-inverse-Wishart (NIW) base measure,
  ``mu | S ~ N2(phi, S / lam)``, ``S ~ IW(Psi, tau_df)``.

Single-item functions (``posterior_hyper``, ``sample_params``,
``log_marginal_likelihood``, ``log_kernel``) dispatch on the hyperparameter
or parameter type. The family classes add the vectorized operations used by
the samplers, where atoms are held as arrays: means of shape ``(J,)`` or
``(J, 2)`` and scales of shape ``(J,)`` or ``(J, 2, 2)``.

All 2x2 linear algebra is written out explicitly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import singledispatch

import numpy as np
from scipy.special import gammaln

from .errors import ParameterDomainError

__all__ = [
    "NIGHyper",
    "NIWHyper",
    "ComponentParams",
    "posterior_hyper",
    "sample_params",
    "log_marginal_likelihood",
    "log_evidence",
    "log_kernel",
    "UnivariateGaussian",
    "BivariateGaussian",
    "family_for",
    "univariate_preset",
    "bivariate_preset",
]

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class NIGHyper:
    phi: float
    lam: float
    a: float
    b: float

    def __post_init__(self):
        if not (self.lam > 0 and self.a > 0 and self.b > 0):
            raise ParameterDomainError(f"NIG needs lam, a, b > 0, got {self}")
        if not math.isfinite(self.phi):
            raise ParameterDomainError("phi must be finite")


@dataclass(frozen=True, eq=False)
class NIWHyper:
    phi: np.ndarray
    lam: float
    Psi: np.ndarray
    tau_df: float

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float).reshape(2)
        Psi = np.asarray(self.Psi, dtype=float).reshape(2, 2)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "Psi", Psi)
        if not self.lam > 0:
            raise ParameterDomainError(f"lam must be positive, got {self.lam}")
        if not self.tau_df > 1:
            raise ParameterDomainError(f"tau_df must exceed 1, got {self.tau_df}")
        if Psi[0, 1] != Psi[1, 0] or not _is_spd(Psi):
            raise ParameterDomainError("Psi must be symmetric positive definite")

    def __eq__(self, other):
        return (isinstance(other, NIWHyper) and np.array_equal(self.phi, other.phi)
                and self.lam == other.lam and np.array_equal(self.Psi, other.Psi)
                and self.tau_df == other.tau_df)


@dataclass(frozen=True, eq=False)
class ComponentParams:
    """Atom x = (mu, scale); scale is a variance or a 2x2 covariance."""

    mu: object
    scale: object

    def __post_init__(self):
        scale = np.asarray(self.scale, dtype=float)
        if scale.ndim == 0:
            if not scale > 0:
                raise ParameterDomainError("variance must be positive")
        elif scale.shape != (2, 2) or not _is_spd(scale):
            raise ParameterDomainError("covariance must be 2x2 symmetric positive definite")


def _is_spd(S) -> bool:
    return bool(S[0, 0] > 0 and S[0, 0] * S[1, 1] - S[0, 1] * S[1, 0] > 0
                and abs(S[0, 1] - S[1, 0]) <= 1e-12 * (abs(S[0, 0]) + abs(S[1, 1])))


# --------------------------------------------------------------------------
# batched 2x2 helpers (last two axes are the matrix)
# --------------------------------------------------------------------------

def _det2(S):
    return S[..., 0, 0] * S[..., 1, 1] - S[..., 0, 1] * S[..., 1, 0]


def _inv2(S):
    det = _det2(S)
    out = np.empty_like(S)
    out[..., 0, 0] = S[..., 1, 1] / det
    out[..., 1, 1] = S[..., 0, 0] / det
    out[..., 0, 1] = -S[..., 0, 1] / det
    out[..., 1, 0] = -S[..., 1, 0] / det
    return out


def _chol2(S):
    L = np.zeros_like(S)
    L[..., 0, 0] = np.sqrt(S[..., 0, 0])
    L[..., 1, 0] = S[..., 1, 0] / L[..., 0, 0]
    L[..., 1, 1] = np.sqrt(S[..., 1, 1] - L[..., 1, 0] ** 2)
    return L


def _symmetrize(S):
    off = 0.5 * (S[..., 0, 1] + S[..., 1, 0])
    S[..., 0, 1] = off
    S[..., 1, 0] = off
    return S


def _quad2(P, d):
    """d^T P d for batched precision P and vectors d (broadcast over leading axes)."""
    return (P[..., 0, 0] * d[..., 0] ** 2 + 2.0 * P[..., 0, 1] * d[..., 0] * d[..., 1]
            + P[..., 1, 1] * d[..., 1] ** 2)


def _lmvgamma2(x):
    return 0.5 * math.log(math.pi) + gammaln(x) + gammaln(x - 0.5)


# --------------------------------------------------------------------------
# single-item API
# --------------------------------------------------------------------------

@singledispatch
def posterior_hyper(hyper, observations):
    """Conjugate posterior hyperparameters given a data subset."""
    raise TypeError(f"unsupported hyperparameter type {type(hyper).__name__}")


@posterior_hyper.register
def _(hyper: NIGHyper, observations):
    y = np.asarray(observations, dtype=float)
    if y.ndim > 1 and y.shape[-1] != 1:
        raise ParameterDomainError(f"univariate family got data of shape {y.shape}")
    y = y.reshape(-1)
    m = len(y)
    if m == 0:
        return hyper
    ybar = float(np.mean(y))
    ss = float(np.sum((y - ybar) ** 2))
    lam1 = hyper.lam + m
    return NIGHyper(
        phi=(hyper.lam * hyper.phi + m * ybar) / lam1,
        lam=lam1,
        a=hyper.a + 0.5 * m,
        b=hyper.b + 0.5 * ss + hyper.lam * m * (ybar - hyper.phi) ** 2 / (2.0 * lam1),
    )


@posterior_hyper.register
def _(hyper: NIWHyper, observations):
    Y = np.asarray(observations, dtype=float)
    if Y.size == 0:
        return hyper
    if Y.ndim == 1:
        Y = Y[None, :]
    if Y.ndim != 2 or Y.shape[1] != 2:
        raise ParameterDomainError(f"bivariate family got data of shape {Y.shape}")
    m = len(Y)
    ybar = Y.mean(axis=0)
    C = Y - ybar
    S = C.T @ C
    lam1 = hyper.lam + m
    dev = ybar - hyper.phi
    Psi1 = hyper.Psi + S + (hyper.lam * m / lam1) * np.outer(dev, dev)
    return NIWHyper(
        phi=(hyper.lam * hyper.phi + m * ybar) / lam1,
        lam=lam1,
        Psi=_symmetrize(Psi1),
        tau_df=hyper.tau_df + m,
    )


@singledispatch
def sample_params(hyper, rng):
    """Draw an atom from the NIG or NIW law described by ``hyper``."""
    raise TypeError(f"unsupported hyperparameter type {type(hyper).__name__}")


@sample_params.register
def _(hyper: NIGHyper, rng):
    mu, s2 = _nig_draw(hyper.phi, hyper.lam, hyper.a, hyper.b, 1, rng)
    return ComponentParams(float(mu[0]), float(s2[0]))


@sample_params.register
def _(hyper: NIWHyper, rng):
    mu, S = _niw_draw(hyper.phi, hyper.lam, hyper.Psi, hyper.tau_df, 1, rng)
    return ComponentParams(mu[0], S[0])


def _nig_draw(phi, lam, a, b, size, rng):
    s2 = np.asarray(b) / rng.gamma(np.asarray(a), 1.0, size=size)
    mu = phi + np.sqrt(s2 / lam) * rng.standard_normal(size)
    return mu, s2


def _niw_draw(phi, lam, Psi, tau_df, size, rng):
    """Batched NIW draws; phi (..,2), Psi (..,2,2), lam and tau_df broadcastable to (size,)."""
    Psi = np.broadcast_to(Psi, (size, 2, 2))
    phi = np.broadcast_to(phi, (size, 2))
    nu = np.broadcast_to(np.asarray(tau_df, dtype=float), (size,))
    # Bartlett factor of W ~ Wishart(Psi^{-1}, nu); then S = W^{-1}
    L = _chol2(_inv2(np.array(Psi)))
    A = np.zeros((size, 2, 2))
    A[:, 0, 0] = np.sqrt(rng.chisquare(nu))
    A[:, 1, 1] = np.sqrt(rng.chisquare(nu - 1.0))
    A[:, 1, 0] = rng.standard_normal(size)
    LA = L @ A
    W = LA @ np.swapaxes(LA, -1, -2)
    S = _symmetrize(_inv2(W))
    z = rng.standard_normal((size, 2))
    C = _chol2(S / np.broadcast_to(np.asarray(lam, dtype=float), (size,))[:, None, None])
    mu = phi + np.einsum("kij,kj->ki", C, z)
    return mu, S


@singledispatch
def log_marginal_likelihood(hyper, y):
    """log of the prior predictive density int g(y | x) nu(dx) at one observation."""
    raise TypeError(f"unsupported hyperparameter type {type(hyper).__name__}")


@log_marginal_likelihood.register
def _(hyper: NIGHyper, y):
    return float(_nig_predictive(hyper.phi, hyper.lam, hyper.a, hyper.b, np.asarray(y, dtype=float)))


@log_marginal_likelihood.register
def _(hyper: NIWHyper, y):
    y = np.asarray(y, dtype=float).reshape(2)
    return float(_niw_predictive(hyper.phi, hyper.lam, hyper.Psi, hyper.tau_df, y))


def _nig_predictive(phi, lam, a, b, y):
    # Student-t, 2a degrees of freedom, scale^2 = b (lam + 1) / (a lam)
    s2 = b * (lam + 1.0) / (a * lam)
    nu = 2.0 * a
    return (gammaln(a + 0.5) - gammaln(a) - 0.5 * np.log(nu * math.pi * s2)
            - (a + 0.5) * np.log1p((y - phi) ** 2 / (nu * s2)))


def _niw_predictive(phi, lam, Psi, tau_df, y):
    # bivariate t with tau_df - 1 degrees of freedom
    nu = tau_df - 1.0
    S = Psi * (lam + 1.0) / (lam * nu)
    quad = _quad2(_inv2(S), y - phi)
    return (gammaln(0.5 * (nu + 2.0)) - gammaln(0.5 * nu) - math.log(nu * math.pi)
            - 0.5 * math.log(_det2(S)) - 0.5 * (nu + 2.0) * np.log1p(quad / nu))


@singledispatch
def log_evidence(hyper, observations):
    """log of int prod_i g(y_i | x) nu(dx) over a block of observations."""
    raise TypeError(f"unsupported hyperparameter type {type(hyper).__name__}")


@log_evidence.register
def _(hyper: NIGHyper, observations):
    y = np.asarray(observations, dtype=float).reshape(-1)
    post = posterior_hyper(hyper, y)
    m = len(y)
    return (math.lgamma(post.a) - math.lgamma(hyper.a) + hyper.a * math.log(hyper.b)
            - post.a * math.log(post.b) + 0.5 * (math.log(hyper.lam) - math.log(post.lam))
            - 0.5 * m * LOG_2PI)


@log_evidence.register
def _(hyper: NIWHyper, observations):
    Y = np.asarray(observations, dtype=float).reshape(-1, 2)
    post = posterior_hyper(hyper, Y)
    m = len(Y)
    return float(-m * math.log(math.pi)
                 + _lmvgamma2(0.5 * post.tau_df) - _lmvgamma2(0.5 * hyper.tau_df)
                 + 0.5 * hyper.tau_df * math.log(_det2(hyper.Psi))
                 - 0.5 * post.tau_df * math.log(_det2(post.Psi))
                 + math.log(hyper.lam) - math.log(post.lam))


def log_kernel(params: ComponentParams, y) -> float:
    """Gaussian log density g(y | x)."""
    scale = np.asarray(params.scale, dtype=float)
    if scale.ndim == 0:
        s2 = float(scale)
        if not s2 > 0:
            raise ParameterDomainError("variance must be positive")
        return -0.5 * (LOG_2PI + math.log(s2)) - 0.5 * (float(y) - float(params.mu)) ** 2 / s2
    if scale.shape != (2, 2) or not _is_spd(scale):
        raise ParameterDomainError("covariance must be 2x2 symmetric positive definite")
    d = np.asarray(y, dtype=float) - np.asarray(params.mu, dtype=float)
    return float(-LOG_2PI - 0.5 * math.log(_det2(scale)) - 0.5 * _quad2(_inv2(scale), d))


# --------------------------------------------------------------------------
# vectorized families
# --------------------------------------------------------------------------

class UnivariateGaussian:
    """Gaussian kernel with NIG base measure, vectorized over atoms."""

    dim = 1

    def __init__(self, hyper: NIGHyper):
        self.hyper = hyper

    def as_data(self, Y) -> np.ndarray:
        Y = np.asarray(Y, dtype=float)
        if Y.ndim == 2 and Y.shape[1] == 1:
            Y = Y[:, 0]
        if Y.ndim != 1:
            raise ParameterDomainError(f"univariate family got data of shape {Y.shape}")
        return Y

    def empty_atoms(self):
        return np.empty(0), np.empty(0)

    def loglik(self, Y, mu, scale) -> np.ndarray:
        """Matrix of log g(y_i | x_j), shape (n, J)."""
        d = Y[:, None] - mu[None, :]
        return -0.5 * (LOG_2PI + np.log(scale))[None, :] - 0.5 * d * d / scale[None, :]

    def prior_draw(self, size, rng):
        h = self.hyper
        return _nig_draw(h.phi, h.lam, h.a, h.b, size, rng)

    def posterior_draw(self, Y, labels, K, rng):
        """One conjugate draw per block 0..K-1 (empty blocks fall back to the prior)."""
        h = self.hyper
        m = np.bincount(labels, minlength=K).astype(float)
        s = np.bincount(labels, weights=Y, minlength=K)
        ybar = np.divide(s, m, out=np.zeros(K), where=m > 0)
        ss = np.bincount(labels, weights=(Y - ybar[labels]) ** 2, minlength=K)
        lam1 = h.lam + m
        phi1 = (h.lam * h.phi + m * ybar) / lam1
        a1 = h.a + 0.5 * m
        b1 = h.b + 0.5 * ss + h.lam * m * (ybar - h.phi) ** 2 / (2.0 * lam1)
        return _nig_draw(phi1, lam1, a1, b1, K, rng)

    def single_posterior_draw(self, y, rng):
        mu, s2 = self.posterior_draw(np.array([y], dtype=float), np.zeros(1, dtype=int), 1, rng)
        return mu, s2

    def log_predictive(self, Y) -> np.ndarray:
        h = self.hyper
        return _nig_predictive(h.phi, h.lam, h.a, h.b, Y)

    def append(self, atoms, new):
        return np.concatenate([atoms[0], new[0]]), np.concatenate([atoms[1], new[1]])

    def format_atom(self, mu, scale) -> str:
        return f"{float(mu)!r}|{float(scale)!r}"

    def parse_atom(self, text):
        mu, s2 = text.split("|")
        return float(mu), float(s2)

    def stack_atoms(self, pairs):
        if not pairs:
            return self.empty_atoms()
        return np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs])

    def density(self, grid, weights, mu, scale) -> np.ndarray:
        """Mixture density at grid points (n_grid,)."""
        return np.exp(self.loglik(np.asarray(grid, dtype=float), mu, scale)) @ weights


class BivariateGaussian:
    """Bivariate Gaussian kernel with NIW base measure, vectorized over atoms."""

    dim = 2

    def __init__(self, hyper: NIWHyper):
        self.hyper = hyper

    def as_data(self, Y) -> np.ndarray:
        Y = np.asarray(Y, dtype=float)
        if Y.ndim != 2 or Y.shape[1] != 2:
            raise ParameterDomainError(f"bivariate family got data of shape {Y.shape}")
        return Y

    def empty_atoms(self):
        return np.empty((0, 2)), np.empty((0, 2, 2))

    def loglik(self, Y, mu, scale) -> np.ndarray:
        d = Y[:, None, :] - mu[None, :, :]
        P = _inv2(scale)
        return -LOG_2PI - 0.5 * np.log(_det2(scale))[None, :] - 0.5 * _quad2(P[None], d)

    def prior_draw(self, size, rng):
        h = self.hyper
        return _niw_draw(h.phi, h.lam, h.Psi, h.tau_df, size, rng)

    def posterior_draw(self, Y, labels, K, rng):
        h = self.hyper
        m = np.bincount(labels, minlength=K).astype(float)
        s = np.stack([np.bincount(labels, weights=Y[:, c], minlength=K) for c in range(2)], axis=1)
        ybar = np.divide(s, m[:, None], out=np.zeros((K, 2)), where=m[:, None] > 0)
        C = Y - ybar[labels]
        S = np.zeros((K, 2, 2))
        for r in range(2):
            for c in range(r, 2):
                S[:, r, c] = np.bincount(labels, weights=C[:, r] * C[:, c], minlength=K)
                S[:, c, r] = S[:, r, c]
        lam1 = h.lam + m
        dev = ybar - h.phi
        Psi1 = h.Psi + S + (h.lam * m / lam1)[:, None, None] * dev[:, :, None] * dev[:, None, :]
        phi1 = (h.lam * h.phi + m[:, None] * ybar) / lam1[:, None]
        return _niw_draw(phi1, lam1, _symmetrize(Psi1), h.tau_df + m, K, rng)

    def single_posterior_draw(self, y, rng):
        return self.posterior_draw(np.asarray(y, dtype=float)[None, :], np.zeros(1, dtype=int), 1, rng)

    def log_predictive(self, Y) -> np.ndarray:
        h = self.hyper
        return _niw_predictive(h.phi, h.lam, h.Psi, h.tau_df, Y)

    def append(self, atoms, new):
        return np.concatenate([atoms[0], new[0]]), np.concatenate([atoms[1], new[1]])

    def format_atom(self, mu, scale) -> str:
        vals = (mu[0], mu[1], scale[0, 0], scale[0, 1], scale[1, 1])
        return "|".join(repr(float(v)) for v in vals)

    def parse_atom(self, text):
        m1, m2, s11, s12, s22 = (float(t) for t in text.split("|"))
        return np.array([m1, m2]), np.array([[s11, s12], [s12, s22]])

    def stack_atoms(self, pairs):
        if not pairs:
            return self.empty_atoms()
        return np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs])

    def density(self, grid, weights, mu, scale) -> np.ndarray:
        return np.exp(self.loglik(np.asarray(grid, dtype=float), mu, scale)) @ weights


def family_for(hyper):
    if isinstance(hyper, NIGHyper):
        return UnivariateGaussian(hyper)
    if isinstance(hyper, NIWHyper):
        return BivariateGaussian(hyper)
    raise TypeError(f"unsupported hyperparameter type {type(hyper).__name__}")


def univariate_preset(Y) -> NIGHyper:
    """Default NIG hyperparameters: phi at the data mean, lam = 1/100, a = b = 0.5."""
    return NIGHyper(phi=float(np.mean(Y)), lam=0.01, a=0.5, b=0.5)


def bivariate_preset(Y) -> NIWHyper:
    """Default NIW hyperparameters: phi at the data mean, lam = 1/100, tau_df = 2, Psi = I."""
    return NIWHyper(phi=np.mean(np.asarray(Y, dtype=float), axis=0), lam=0.01,
                    Psi=np.eye(2), tau_df=2.0)
