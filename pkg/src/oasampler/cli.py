"""Command line harness.

Verbs::

    oasampler run CONFIG [CONFIG ...]     run chains, write trace/summary/density files
    oasampler synth NAME SEED OUT.csv     write a synthetic data set
    oasampler oracle CONFIG [--out F]     exact partition posterior for small n
    oasampler report TRACE [TRACE ...]    IAT table for saved traces

Exit codes: 0 success, 2 configuration error, 3 data ingestion error,
4 sampler failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time

import numpy as np

from .baseline_samplers import MarginalSampler, SliceSampler
from .config import ExperimentConfig, load_config
from .diagnostics import (component_density_estimate, density_estimate, iat, label_change_rate,
                          m_posterior, occupancy_posterior)
from .errors import (ConfigError, IngestionError, ParameterDomainError, ResourceLimitError,
                     StateInvariantError, TruncationOverflowError, UnsupportedPriorError)
from .oas_sampler import OrderedAllocationSampler
from .oracle import exact_partition_posterior
from .synthetic import generate_synthetic, save_data
from .trace import ChainTrace, read_trace, write_trace

__all__ = ["main", "run_experiment", "make_sampler", "run_chain", "EXIT_OK", "EXIT_CONFIG",
           "EXIT_INGEST", "EXIT_SAMPLER"]

EXIT_OK, EXIT_CONFIG, EXIT_INGEST, EXIT_SAMPLER = 0, 2, 3, 4
MAX_COMPONENT_GRIDS = 8


def make_sampler(name, Y, prior, family, rng, init="single_block", init_k=None,
                 max_sticks=10**6, check=False):
    if name == "ordered":
        return OrderedAllocationSampler(Y, prior, family, rng, init, init_k, check=check)
    if name == "marginal":
        return MarginalSampler(Y, prior, family, rng, check=check)
    if name == "slice":
        return SliceSampler(Y, prior, family, rng, max_sticks=max_sticks, check=check)
    raise ConfigError(f"unknown sampler {name!r}")


def run_chain(sampler, iterations: int, burn_in: int, thin: int = 1) -> list:
    """Run burn_in sweeps, then keep every thin-th of iterations * thin sweeps."""
    for _ in range(burn_in):
        sampler.advance()
    kept = []
    for t in range(iterations * thin):
        if (t + 1) % thin:
            sampler.advance()
        else:
            rec = sampler.step()
            rec.iteration = len(kept) + 1
            kept.append(rec)
    return kept


def _grid(Y, points):
    lo, hi = Y.min(axis=0), Y.max(axis=0)
    pad = 0.25 * (hi - lo) + 1.0
    if Y.shape[1] == 1:
        return np.linspace(lo[0] - pad[0], hi[0] + pad[0], points)
    side = max(int(round(np.sqrt(points))), 10)
    gx = np.linspace(lo[0] - pad[0], hi[0] + pad[0], side)
    gy = np.linspace(lo[1] - pad[1], hi[1] + pad[1], side)
    xx, yy = np.meshgrid(gx, gy, indexing="ij")
    return np.column_stack([xx.ravel(), yy.ravel()])


def _write_grid(path, grid, columns: dict):
    grid = np.asarray(grid)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        head = ["y"] if grid.ndim == 1 else ["y1", "y2"]
        w.writerow(head + list(columns))
        for t in range(len(grid)):
            pt = [grid[t]] if grid.ndim == 1 else list(grid[t])
            w.writerow([repr(float(x)) for x in pt] + [repr(float(columns[c][t])) for c in columns])


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Run one configured chain and write its artifacts; returns the summary."""
    Y = cfg.load_data()
    family = cfg.build_family(Y)
    rng = np.random.default_rng(cfg.seed)
    sampler = make_sampler(cfg.sampler, Y, cfg.prior, family, rng, cfg.init, cfg.init_k, cfg.max_sticks)
    started = time.perf_counter()
    records = run_chain(sampler, cfg.iterations, cfg.burn_in, cfg.thin)
    runtime = time.perf_counter() - started

    header = {
        "sampler": cfg.sampler,
        "prior": repr(cfg.prior),
        "family": cfg.family_type,
        "seed": cfg.seed,
        "n": len(Y),
        "random_m": "true" if cfg.prior.random_m and cfg.sampler == "ordered" else "false",
    }
    trace = ChainTrace(header, records, dim=Y.shape[1])
    os.makedirs(cfg.output, exist_ok=True)
    write_trace(trace, os.path.join(cfg.output, "trace.csv"), with_labels=cfg.trace_labels)

    grid = _grid(Y, cfg.grid_points)
    _write_grid(os.path.join(cfg.output, "density.csv"), grid, {
        "full": density_estimate(trace, grid, family, "full"),
        "empirical": density_estimate(trace, grid, family, "empirical"),
    })
    top = min(MAX_COMPONENT_GRIDS, max(r.k_n for r in records))
    comp = {}
    for j in range(1, top + 1):
        comp[f"weight_{j}"] = component_density_estimate(trace, grid, j, family, "weight")
        comp[f"empirical_{j}"] = component_density_estimate(trace, grid, j, family, "empirical")
    _write_grid(os.path.join(cfg.output, "component_density.csv"), grid, comp)

    k_series = trace.column("k_n")
    summary = {
        "sampler": cfg.sampler,
        "prior": repr(cfg.prior),
        "seed": cfg.seed,
        "n": len(Y),
        "iterations": cfg.iterations,
        "burn_in": cfg.burn_in,
        "thin": cfg.thin,
        "iat_k": float(iat(k_series)) if len(records) >= 100 else None,
        "iat_dv": float(iat(trace.column("deviance"))) if len(records) >= 100 else None,
        "k_pmf": {str(k): v for k, v in occupancy_posterior(trace).items()},
        "label_change_rate": label_change_rate(trace),
        "runtime_seconds": runtime,
    }
    if header["random_m"] == "true":
        summary["m_pmf"] = {str(k): v for k, v in m_posterior(trace).items()}
    if cfg.sampler == "slice":
        summary["max_sticks_used"] = int(sampler.max_J)
    with open(os.path.join(cfg.output, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def _cmd_run(args) -> int:
    for path in args.configs:
        cfg = load_config(path)
        summary = run_experiment(cfg)
        print(f"{path}: k_n IAT {summary['iat_k']}, deviance IAT {summary['iat_dv']}, "
              f"{summary['runtime_seconds']:.1f}s -> {cfg.output}")
    return EXIT_OK


def _cmd_synth(args) -> int:
    save_data(generate_synthetic(args.name, args.seed), args.out)
    return EXIT_OK


def _cmd_oracle(args) -> int:
    cfg = load_config(args.config)
    Y = cfg.load_data()
    family = cfg.build_family(Y)
    table = exact_partition_posterior(Y, cfg.prior, family.hyper)
    out = args.out or os.path.join(cfg.output, "oracle.csv")
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    table.to_csv(out)
    print(f"{len(table.partitions)} partitions -> {out}")
    return EXIT_OK


def _cmd_report(args) -> int:
    rows = []
    for path in args.traces:
        try:
            tr = read_trace(path)
        except (OSError, KeyError, ValueError) as exc:
            raise IngestionError(f"{path}: {exc}") from None
        rows.append({
            "trace": path,
            "sampler": tr.header.get("sampler"),
            "prior": tr.header.get("prior"),
            "seed": tr.header.get("seed"),
            "iat_k": float(iat(tr.column("k_n"))),
            "iat_dv": float(iat(tr.column("deviance"))),
            "mean_k": float(tr.column("k_n").mean()),
            "mean_dv": float(tr.column("deviance").mean()),
        })
    if args.json:
        json.dump(rows, sys.stdout, indent=2)
        print()
    else:
        print(f"{'sampler':<10}{'seed':>8}{'iat_k':>12}{'iat_dv':>12}{'mean_k':>10}  prior")
        for r in rows:
            print(f"{r['sampler']:<10}{r['seed']:>8}{r['iat_k']:>12.4f}{r['iat_dv']:>12.4f}"
                  f"{r['mean_k']:>10.3f}  {r['prior']}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="oasampler", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="verb", required=True)
    r = sub.add_parser("run", help="run configured chains")
    r.add_argument("configs", nargs="+")
    r.set_defaults(func=_cmd_run)
    s = sub.add_parser("synth", help="write a synthetic data set")
    s.add_argument("name")
    s.add_argument("seed", type=int)
    s.add_argument("out")
    s.set_defaults(func=_cmd_synth)
    o = sub.add_parser("oracle", help="exact partition posterior for small n")
    o.add_argument("config")
    o.add_argument("--out")
    o.set_defaults(func=_cmd_oracle)
    t = sub.add_parser("report", help="IAT/deviance table for traces")
    t.add_argument("traces", nargs="+")
    t.add_argument("--json", action="store_true")
    t.set_defaults(func=_cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IngestionError as exc:
        print(f"ingestion error: {exc}", file=sys.stderr)
        return EXIT_INGEST
    except (TruncationOverflowError, StateInvariantError, ResourceLimitError,
            UnsupportedPriorError, ParameterDomainError) as exc:
        print(f"sampler failure: {exc}", file=sys.stderr)
        return EXIT_SAMPLER


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
