"""Experiment configuration.

Configuration files hold one ``key = value`` pair per line; keys may be
dotted (``prior.sigma``) and ``#`` starts a comment. Example::

    sampler = ordered            # ordered | marginal | slice
    prior.type = pitman_yor      # pitman_yor | finite_dirichlet | gnedin
    prior.sigma = 0.5
    prior.theta = 0.2
    family.type = bivariate      # univariate | bivariate
    data.synthetic = paw_like    # or data.path = observations.csv
    data.seed = 1
    iterations = 7000            # kept records
    burn_in = 3500
    thin = 1
    seed = 11
    output = runs/paw_ordered

Relative ``data.path`` and ``output`` values are resolved against the
configuration file's directory.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .components import (NIGHyper, NIWHyper, bivariate_preset, family_for,
                         univariate_preset)
from .errors import ConfigError, ParameterDomainError
from .species_sampling import (ConstantGamma, FiniteDirichlet, GnedinMFM, PitmanYor,
                               ThetaOverM)
from .synthetic import generate_synthetic, load_data, permute_data

__all__ = ["ExperimentConfig", "parse_config", "load_config"]

KNOWN_KEYS = {
    "sampler", "iterations", "burn_in", "thin", "seed", "output",
    "prior.type", "prior.sigma", "prior.theta", "prior.gamma", "prior.m",
    "prior.gamma_hat", "prior.gamma_rule",
    "family.type", "family.preset", "family.phi", "family.lambda", "family.a", "family.b",
    "family.tau_df", "family.psi",
    "data.path", "data.synthetic", "data.seed", "data.permute_seed",
    "init", "init.k", "slice.max_sticks", "trace.labels", "grid.points",
}


def parse_config(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = val
    return out


def _num(raw: dict, key, cast=float, default=None):
    if key not in raw:
        if default is None:
            raise ConfigError(f"missing key {key!r}")
        return default
    try:
        return cast(raw[key])
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw[key]!r}") from None


@dataclass
class ExperimentConfig:
    sampler: str
    prior: object
    family_type: str
    family_values: dict
    data_path: str = None
    data_synthetic: str = None
    data_seed: int = 1
    permute_seed: int = 0
    iterations: int = 7000
    burn_in: int = 3500
    thin: int = 1
    seed: int = None
    output: str = "out"
    init: str = "single_block"
    init_k: int = None
    max_sticks: int = 10**6
    trace_labels: bool = True
    grid_points: int = 200
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, raw: dict, base_dir: str = ".") -> "ExperimentConfig":
        sampler = raw.get("sampler", "ordered")
        if sampler not in ("ordered", "marginal", "slice"):
            raise ConfigError(f"unknown sampler {sampler!r}")
        if "seed" not in raw:
            raise ConfigError("a seed is required")
        try:
            prior = _build_prior(raw)
        except ParameterDomainError as exc:
            raise ConfigError(f"prior: {exc}") from None
        family_type = raw.get("family.type", "univariate")
        if family_type not in ("univariate", "bivariate"):
            raise ConfigError(f"unknown family {family_type!r}")
        if ("data.path" in raw) == ("data.synthetic" in raw):
            raise ConfigError("give exactly one of data.path and data.synthetic")
        cfg = cls(
            sampler=sampler,
            prior=prior,
            family_type=family_type,
            family_values={k[7:]: v for k, v in raw.items() if k.startswith("family.") and k != "family.type"},
            data_path=os.path.join(base_dir, raw["data.path"]) if "data.path" in raw else None,
            data_synthetic=raw.get("data.synthetic"),
            data_seed=_num(raw, "data.seed", int, 1),
            permute_seed=_num(raw, "data.permute_seed", int, 0),
            iterations=_num(raw, "iterations", int, 7000),
            burn_in=_num(raw, "burn_in", int, 3500),
            thin=_num(raw, "thin", int, 1),
            seed=_num(raw, "seed", int),
            output=os.path.join(base_dir, raw.get("output", "out")),
            init=raw.get("init", "single_block"),
            init_k=_num(raw, "init.k", int, 0) or None,
            max_sticks=_num(raw, "slice.max_sticks", lambda s: int(float(s)), 10**6),
            trace_labels=raw.get("trace.labels", "true").lower() in ("true", "1", "yes"),
            grid_points=_num(raw, "grid.points", int, 200),
            raw=raw,
        )
        if not cfg.iterations > cfg.burn_in >= 0:
            raise ConfigError("need iterations > burn_in >= 0")
        if cfg.thin < 1:
            raise ConfigError("thin must be at least 1")
        if cfg.init not in ("single_block", "prediction_rule", "k_blocks"):
            raise ConfigError(f"unknown init {cfg.init!r}")
        if cfg.sampler == "slice" and not isinstance(prior, PitmanYor):
            raise ConfigError("the slice sampler needs a Pitman-Yor prior")
        return cfg

    def load_data(self) -> np.ndarray:
        if self.data_path is not None:
            Y = load_data(self.data_path)
        else:
            Y = generate_synthetic(self.data_synthetic, self.data_seed)
        Y = permute_data(Y, self.permute_seed)
        want = 1 if self.family_type == "univariate" else 2
        if Y.shape[1] != want:
            raise ConfigError(f"{self.family_type} family needs {want} data column(s), got {Y.shape[1]}")
        return Y

    def build_family(self, Y):
        vals = self.family_values
        try:
            if self.family_type == "univariate":
                base = univariate_preset(Y)
                hyper = NIGHyper(
                    phi=float(vals.get("phi", base.phi)),
                    lam=float(vals.get("lambda", base.lam)),
                    a=float(vals.get("a", base.a)),
                    b=float(vals.get("b", base.b)),
                )
            else:
                base = bivariate_preset(Y)
                phi = np.array(vals["phi"].split(), dtype=float) if "phi" in vals else base.phi
                psi = np.array(vals["psi"].split(), dtype=float).reshape(2, 2) if "psi" in vals else base.Psi
                hyper = NIWHyper(phi=phi, lam=float(vals.get("lambda", base.lam)), Psi=psi,
                                 tau_df=float(vals.get("tau_df", base.tau_df)))
        except (ValueError, ParameterDomainError) as exc:
            raise ConfigError(f"family: {exc}") from None
        return family_for(hyper)


def _build_prior(raw: dict):
    kind = raw.get("prior.type", "pitman_yor")
    if kind == "pitman_yor":
        return PitmanYor(_num(raw, "prior.sigma", float, 0.0), _num(raw, "prior.theta", float, 1.0))
    if kind == "finite_dirichlet":
        return FiniteDirichlet(_num(raw, "prior.gamma", float, 1.0), _num(raw, "prior.m", int))
    if kind == "gnedin":
        rule = raw.get("prior.gamma_rule", "constant")
        if rule == "constant":
            gamma_rule = ConstantGamma(_num(raw, "prior.gamma", float, 1.0))
        elif rule == "theta_over_m":
            gamma_rule = ThetaOverM(_num(raw, "prior.theta", float))
        else:
            raise ConfigError(f"unknown gamma rule {rule!r}")
        return GnedinMFM(_num(raw, "prior.gamma_hat", float, 0.5), gamma_rule)
    raise ConfigError(f"unknown prior type {kind!r}")


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return ExperimentConfig.from_dict(parse_config(text), os.path.dirname(os.path.abspath(path)))
