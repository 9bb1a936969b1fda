"""Experiment runner.

Runs every (algorithm, seed) pair on one problem and writes

* ``<outdir>/<algo>_seed<k>.csv``  per-iteration traces
* ``summary.csv``, ``final.csv``, ``rates.csv``  seed statistics
* ``manifest.json``  resolved config, data digests, revision, reference optimum
* ``run.cfg``  the resolved config in ``--config`` format, for re-running
* ``metrics.svg`` with ``--plot``; ``bounds.json`` with ``--bounds``
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import platform
import subprocess
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .core import DMFW, DivergenceError
from .experiment import Config, build_problem, run, summarize, write_rows, write_trace
from .metrics import bound_constants
from .objectives import estimate_constants

log = logging.getLogger("dmfw")

_FIELD_TYPES = {f.name: f.type for f in fields(Config)}
_BOOL_KEYS = {"plot", "bounds", "scale", "shuffle"}
_INT_KEYS = {"agents", "iters", "batch_size", "subsample", "data_seed", "graph_seed", "dim", "samples",
             "ref_budget"}
_FLOAT_KEYS = {"batch_frac", "lambda1", "ref_tol"}


def read_config_file(path) -> dict:
    """``key = value`` lines, ``#`` comments. Keys may use dashes or dots
    (``constraint.q``, ``constraint.radius``)."""
    out = {}
    q = r = None
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            key, _, value = line.partition(" ")
        key = key.strip().replace("-", "_")
        value = value.strip()
        if key == "constraint.q":
            q = value
        elif key == "constraint.radius":
            r = value
        elif key == "seed":
            out["seeds"] = value
        elif key in _FIELD_TYPES:
            out[key] = value
        else:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
    if q is not None or r is not None:
        cq, _, cr = out.get("constraint", "2:5").partition(":")
        out["constraint"] = f"{q or cq}:{r or cr}"
    return out


def _coerce(key, value):
    if value is None or not isinstance(value, str):
        return value
    if value.lower() in ("none", ""):
        return None
    if key in _BOOL_KEYS:
        return value.lower() in ("1", "true", "yes", "on")
    if key in _INT_KEYS:
        return int(value)
    if key in _FLOAT_KEYS:
        return float(value)
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dmfw", description="Distributed momentum Frank-Wolfe experiments.")
    p.add_argument("--algorithm", help="comma list of dmfw, mshfw, sfw, defw")
    p.add_argument("--topology", help="ring, complete, random[:p] or an edge-list file")
    p.add_argument("--agents", type=int)
    p.add_argument("--dataset", help="LIBSVM file (optionally gzipped) or synthetic-a9a:N")
    p.add_argument("--objective", choices=["logistic", "sigmoid-nc", "sigmoid", "ridge"])
    p.add_argument("--constraint", help="<q>:<r>, e.g. 2:5, 1:5, 5/4:5")
    p.add_argument("--iters", type=int)
    p.add_argument("--batch-frac", type=float)
    p.add_argument("--batch-size", type=int, help="absolute minibatch size (overrides --batch-frac)")
    seeds = p.add_mutually_exclusive_group()
    seeds.add_argument("--seed", help="single seed")
    seeds.add_argument("--seeds", help="list such as 1..20 or 1,3,5")
    p.add_argument("--outdir")
    p.add_argument("--metric-cadence", help="record every N iterations, or 'auto'")
    p.add_argument("--plot", action="store_true", default=None)
    p.add_argument("--bounds", action="store_true", default=None, help="estimate L, delta, G and bound constants")
    p.add_argument("--subsample", type=int, help="use a seeded subset of this many rows")
    p.add_argument("--lambda1", type=float)
    p.add_argument("--label-map", choices=["auto", "covtype"])
    p.add_argument("--scale", action="store_true", default=None, help="per-feature max-abs scaling")
    p.add_argument("--shuffle", action="store_true", default=None, help="shuffle rows before partitioning")
    p.add_argument("--data-seed", type=int)
    p.add_argument("--graph-seed", type=int)
    p.add_argument("--dim", type=int, help="ridge: feature dimension")
    p.add_argument("--samples", type=int, help="ridge: samples per agent")
    p.add_argument("--ref-budget", type=int, help="iterations for the reference optimum")
    p.add_argument("--config", help="key = value config file; flags override it")
    p.add_argument("--dry-run", action="store_true", help="print the resolved config and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def resolve_config(args) -> Config:
    values = read_config_file(args.config) if args.config else {}
    for name in _FIELD_TYPES:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    if getattr(args, "seed", None) is not None:
        values["seeds"] = args.seed
    if values.get("objective") == "sigmoid-nc":
        values["objective"] = "sigmoid"
    return Config(**{k: _coerce(k, v) for k, v in values.items()})


def git_revision() -> str:
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"], cwd=here, capture_output=True, text=True, timeout=10)
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() if out.returncode == 0 else "unknown"


def write_config_file(cfg: Config, path) -> None:
    lines = [f"{k} = {'none' if v is None else v}" for k, v in cfg.as_dict().items()]
    Path(path).write_text("\n".join(lines) + "\n")


_WORKER = {}


def _init_worker(problem, cfg):
    _WORKER["problem"], _WORKER["cfg"] = problem, cfg


def _run_task(task):
    algo, seed = task
    return task, run(_WORKER["problem"], _WORKER["cfg"], algo, seed)


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("DMFW_THREADS", "1")))
    except ValueError:
        return 1


def execute(cfg: Config, problem=None, workers=None) -> dict:
    """Run all (algorithm, seed) pairs; returns ``{(algo, seed): trace}``."""
    problem = problem or build_problem(cfg)
    tasks = [(a, s) for a in cfg.algorithm for s in cfg.seeds]
    workers = worker_count() if workers is None else workers
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks)), initializer=_init_worker,
                                 initargs=(problem, cfg)) as pool:
            results = dict(pool.map(_run_task, tasks))
    else:
        _init_worker(problem, cfg)
        results = dict(_run_task(t) for t in tasks)
    return {t: results[t] for t in tasks}


def manifest(cfg: Config, problem) -> dict:
    return {
        "config": cfg.as_dict(),
        "dataset_sha256": problem.file_digest,
        "dataset_digest": problem.dataset_digest,
        "git_revision": git_revision(),
        "package_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "agents": problem.mixing.n,
        "edges": sorted([i + 1, j + 1] for i, j in problem.graph.edges),
        "lambda": problem.mixing.lam,
        "k0": problem.mixing.k0,
        "diameter": problem.cs.diameter,
        "f_star": problem.f_star,
        "f_star_gap": problem.f_star_gap,
        **problem.extra,
    }


def bounds_report(cfg: Config, problem) -> dict:
    est = estimate_constants(problem.aggregate, problem.cs, seed=cfg.data_seed,
                             batch=DMFW(problem.locals, problem.cs, problem.mixing,
                                        batch_frac=cfg.batch_frac, batch=cfg.batch_size).batches[0])
    probe = DMFW(problem.locals, problem.cs, problem.mixing, batch_frac=cfg.batch_frac,
                 batch=cfg.batch_size, seed=cfg.seeds[0])
    y1 = float(np.linalg.norm(probe.Y, axis=1).max())
    x_bar1 = probe.X.mean(axis=0)
    gap1 = problem.aggregate.value(x_bar1) - problem.f_star if problem.f_star is not None else 0.0
    bc = bound_constants(problem.mixing.n, problem.mixing.k0, problem.cs.diameter, est["L"], est["delta"],
                         est["G"], y1, gap1, max(cfg.iters, 1))
    return {"estimates": est, "constants": bc.as_dict()}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = resolve_config(args)
    except (ValueError, OSError) as exc:
        print(f"dmfw: error: {exc}", file=sys.stderr)
        return 2
    if args.dry_run:
        print(json.dumps(cfg.as_dict(), indent=2))
        return 0
    try:
        problem = build_problem(cfg)
        log.info("problem ready: n=%d |lambda|=%.4g k0=%d F*=%s", problem.mixing.n, problem.mixing.lam,
                 problem.mixing.k0, problem.f_star)
        traces = execute(cfg, problem)
    except DivergenceError as exc:
        print(f"dmfw: aborted: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"dmfw: error: {exc}", file=sys.stderr)
        return 2

    out = Path(cfg.outdir)
    out.mkdir(parents=True, exist_ok=True)
    for (algo, seed), trace in traces.items():
        write_trace(trace, out / f"{algo}_seed{seed}.csv")
    by_algo = {a: [traces[(a, s)] for s in cfg.seeds] for a in cfg.algorithm}
    summary = summarize(by_algo)
    write_rows(summary["per_k"], out / "summary.csv")
    write_rows(summary["final"], out / "final.csv")
    write_rows(summary["rates"], out / "rates.csv")
    write_config_file(cfg, out / "run.cfg")
    (out / "manifest.json").write_text(json.dumps(manifest(cfg, problem), indent=2) + "\n")
    if cfg.bounds:
        (out / "bounds.json").write_text(json.dumps(bounds_report(cfg, problem), indent=2) + "\n")
    if cfg.plot:
        from .plotting import plot_summary

        plot_summary(summary["per_k"], out)
    for row in summary["final"]:
        print(f"{row['algorithm']:>6}  k={row['k']}  fw_gap={row['fw_gap']:.4e}  subopt={row['subopt']:.4e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
