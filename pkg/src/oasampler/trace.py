"""Chain traces and their CSV encoding.

A trace file starts with ``# key=value`` header lines (sampler, prior, seed,
...) followed by a CSV table with one row per kept iteration::

    iteration,k_n,m,deviance,weights,atoms,counts[,labels]

``m`` is an integer, ``inf`` or ``NA`` (integrated out). Variable-length
fields use sparse ``j:value`` pairs joined by ``;``; an atom value is
``mu|variance`` (univariate) or ``mu1|mu2|s11|s12|s22`` (bivariate). Labels
are space-separated. Floats are written with ``repr`` so a trace round-trips
exactly.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import IngestionError
from .oas_sampler import TraceRecord
from .species_sampling import INF

__all__ = ["ChainTrace", "write_trace", "read_trace"]


@dataclass
class ChainTrace:
    """Header metadata plus the list of kept iteration records."""

    header: dict
    records: list = field(default_factory=list)
    dim: int = 1

    def __len__(self):
        return len(self.records)

    def column(self, name) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def __eq__(self, other):
        if not isinstance(other, ChainTrace) or self.header != other.header or len(self) != len(other):
            return False
        return all(_record_equal(a, b) for a, b in zip(self.records, other.records))


def _record_equal(a: TraceRecord, b: TraceRecord) -> bool:
    same = (a.iteration == b.iteration and a.k_n == b.k_n and a.m == b.m
            and a.deviance == b.deviance and tuple(a.counts) == tuple(b.counts)
            and np.array_equal(a.weights, b.weights) and np.array_equal(a.mu, b.mu)
            and np.array_equal(a.scale, b.scale))
    if a.labels is None or b.labels is None:
        return same and a.labels is None and b.labels is None
    return same and np.array_equal(a.labels, b.labels)


def _fmt_m(m) -> str:
    if m is None:
        return "NA"
    if m is INF:
        return "inf"
    return str(int(m))


def _parse_m(text):
    if text == "NA":
        return None
    if text == "inf":
        return INF
    return int(text)


def _fmt_atom(mu, scale, dim) -> str:
    if dim == 1:
        return f"{float(mu)!r}|{float(scale)!r}"
    vals = (mu[0], mu[1], scale[0, 0], scale[0, 1], scale[1, 1])
    return "|".join(repr(float(v)) for v in vals)


def _pairs(values) -> str:
    return ";".join(f"{j}:{v}" for j, v in enumerate(values, start=1))


def _unpairs(text) -> list:
    if not text:
        return []
    out = []
    for j, item in enumerate(text.split(";"), start=1):
        key, _, val = item.partition(":")
        if int(key) != j:
            raise IngestionError(f"sparse field out of order: {text[:40]}")
        out.append(val)
    return out


def write_trace(trace: ChainTrace, path_or_buffer, with_labels: bool = True):
    own = isinstance(path_or_buffer, (str, bytes)) or hasattr(path_or_buffer, "__fspath__")
    fh = open(path_or_buffer, "w", newline="") if own else path_or_buffer
    try:
        for key in sorted(trace.header):
            fh.write(f"# {key}={trace.header[key]}\n")
        fh.write(f"# dim={trace.dim}\n")
        w = csv.writer(fh, lineterminator="\n")
        cols = ["iteration", "k_n", "m", "deviance", "weights", "atoms", "counts"]
        if with_labels:
            cols.append("labels")
        w.writerow(cols)
        for r in trace.records:
            row = [r.iteration, r.k_n, _fmt_m(r.m), repr(float(r.deviance)),
                   _pairs(repr(float(x)) for x in r.weights),
                   _pairs(_fmt_atom(r.mu[j], r.scale[j], trace.dim) for j in range(len(r.mu))),
                   _pairs(int(c) for c in r.counts)]
            if with_labels:
                row.append("" if r.labels is None else " ".join(str(int(x)) for x in r.labels))
            w.writerow(row)
    finally:
        if own:
            fh.close()


def read_trace(path_or_text) -> ChainTrace:
    if isinstance(path_or_text, str) and "\n" in path_or_text:
        lines = path_or_text.splitlines()
    else:
        with open(path_or_text) as fh:
            lines = fh.read().splitlines()
    header = {}
    body_start = 0
    for body_start, line in enumerate(lines):
        if not line.startswith("#"):
            break
        key, _, val = line[1:].strip().partition("=")
        header[key] = val
    dim = int(header.pop("dim", "1"))
    reader = csv.DictReader(io.StringIO("\n".join(lines[body_start:])))
    trace = ChainTrace(header, [], dim)
    for row in reader:
        atoms = [list(map(float, a.split("|"))) for a in _unpairs(row["atoms"])]
        if dim == 1:
            mu = np.array([a[0] for a in atoms])
            scale = np.array([a[1] for a in atoms])
        else:
            mu = np.array([a[:2] for a in atoms]).reshape(-1, 2)
            scale = np.array([[[a[2], a[3]], [a[3], a[4]]] for a in atoms]).reshape(-1, 2, 2)
        labels = row.get("labels")
        trace.records.append(TraceRecord(
            iteration=int(row["iteration"]),
            k_n=int(row["k_n"]),
            m=_parse_m(row["m"]),
            deviance=float(row["deviance"]),
            weights=np.array([float(x) for x in _unpairs(row["weights"])]),
            mu=mu,
            scale=scale,
            counts=tuple(int(x) for x in _unpairs(row["counts"])),
            labels=np.array([int(x) for x in labels.split()]) if labels else None,
        ))
    return trace
