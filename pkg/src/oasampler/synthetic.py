"""Observation files and synthetic look-alike data sets.

The generator constants below are versioned: changing them changes every
seeded baseline that depends on them.

``paw_like`` (465 bivariate points, 6 components): two broad "pad"
components side by side at the bottom and four compact "toe" components on an
arc above them.

``univ4_like`` (144 univariate points, 4 components): three well separated
components of similar size plus one small component on the right.

Points are generated with fixed per-component counts, then shuffled.
"""
from __future__ import annotations

import csv
import math

import numpy as np

from .errors import ConfigError, IngestionError

__all__ = ["load_data", "save_data", "generate_synthetic", "permute_data", "SYNTHETIC_SPECS"]

GENERATOR_VERSION = 1

SYNTHETIC_SPECS = {
    "paw_like": {
        "counts": (120, 110, 60, 60, 60, 55),
        "means": ((-1.6, 0.0), (1.6, 0.0), (-3.4, 3.2), (-1.2, 4.6), (1.2, 4.6), (3.4, 3.2)),
        "covs": (
            ((0.9, 0.25), (0.25, 0.6)),
            ((0.9, -0.25), (-0.25, 0.6)),
            ((0.25, 0.05), (0.05, 0.25)),
            ((0.2, 0.0), (0.0, 0.3)),
            ((0.2, 0.0), (0.0, 0.3)),
            ((0.25, -0.05), (-0.05, 0.25)),
        ),
    },
    "univ4_like": {
        "counts": (48, 46, 38, 12),
        "means": (-6.0, -2.0, 2.0, 7.0),
        "sds": (0.7, 0.9, 0.7, 0.5),
    },
}


def generate_synthetic(name: str, seed: int) -> np.ndarray:
    """Seeded draw from one of the shipped look-alike mixtures (n x d matrix)."""
    if name not in SYNTHETIC_SPECS:
        raise ConfigError(f"unknown synthetic data set {name!r}; choose from {sorted(SYNTHETIC_SPECS)}")
    spec = SYNTHETIC_SPECS[name]
    rng = np.random.default_rng(seed)
    parts = []
    if "covs" in spec:
        for cnt, mean, cov in zip(spec["counts"], spec["means"], spec["covs"]):
            L = np.linalg.cholesky(np.asarray(cov))
            parts.append(np.asarray(mean) + rng.standard_normal((cnt, 2)) @ L.T)
    else:
        for cnt, mean, sd in zip(spec["counts"], spec["means"], spec["sds"]):
            parts.append((mean + sd * rng.standard_normal(cnt))[:, None])
    Y = np.concatenate(parts)
    return Y[rng.permutation(len(Y))]


def permute_data(Y, seed: int) -> np.ndarray:
    """Seeded row permutation; seed 0 is the identity."""
    Y = np.asarray(Y)
    if seed == 0:
        return Y.copy()
    return Y[np.random.default_rng(seed).permutation(len(Y))]


def _is_number(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


def load_data(path) -> np.ndarray:
    """Read a CSV of 1 or 2 numeric columns (optional header) into an n x d matrix."""
    rows = []
    width = None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            cells = [c.strip() for c in row]
            if not cells or all(c == "" for c in cells):
                continue
            if not rows and width is None and not any(_is_number(c) for c in cells):
                width = len(cells)  # header
                continue
            vals = []
            for c in cells:
                try:
                    x = float(c)
                except ValueError:
                    raise IngestionError(f"{path}: line {lineno}: non-numeric cell {c!r}") from None
                if not math.isfinite(x):
                    raise IngestionError(f"{path}: line {lineno}: non-finite value {c!r}")
                vals.append(x)
            if width is None:
                width = len(vals)
            if len(vals) != width:
                raise IngestionError(f"{path}: line {lineno}: expected {width} columns, got {len(vals)}")
            rows.append(vals)
    if not rows:
        raise IngestionError(f"{path}: no observations")
    if width not in (1, 2):
        raise IngestionError(f"{path}: need 1 or 2 columns, got {width}")
    return np.array(rows, dtype=float)


def save_data(Y, path):
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y"] if Y.shape[1] == 1 else ["y1", "y2"])
        for row in Y:
            w.writerow([repr(float(x)) for x in row])
