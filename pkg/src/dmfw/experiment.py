"""Problem assembly, single runs and multi-seed summaries."""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import baselines, data, objectives, topology
from .core import DMFW, iterate
from .lmo import ConstraintSet
from .metrics import CSV_COLUMNS, Recorder, TraceRecord, fit_inverse_log, fit_rate, reference_optimum
from .schedules import StepSchedule


@dataclass
class Config:
    algorithm: tuple = ("dmfw",)
    topology: str = "ring"
    agents: int = 5
    dataset: str = "synthetic-a9a:2000"
    objective: str = "logistic"
    constraint: str = "2:5"
    iters: int = 2000
    batch_frac: float = 0.01
    batch_size: int | None = None
    seeds: tuple = (1,)
    outdir: str = "runs"
    metric_cadence: str = "1"
    plot: bool = False
    bounds: bool = False
    subsample: int | None = None
    lambda1: float | None = None
    label_map: str = "auto"
    scale: bool = False
    shuffle: bool = False
    data_seed: int = 0
    graph_seed: int = 0
    dim: int = 50
    samples: int = 10000
    ref_budget: int = 50000
    ref_tol: float = 1e-10

    def __post_init__(self):
        if isinstance(self.algorithm, str):
            self.algorithm = tuple(a.strip().lower() for a in self.algorithm.split(",") if a.strip())
        for a in self.algorithm:
            if a not in baselines.ALGORITHMS:
                raise ValueError(f"unknown algorithm {a!r}; choose from {', '.join(baselines.ALGORITHMS)}")
        if isinstance(self.seeds, (int, str)):
            self.seeds = parse_seeds(str(self.seeds))
        self.seeds = tuple(int(s) for s in self.seeds)
        if self.agents < 1:
            raise ValueError("agents must be >= 1")
        if self.iters < 0:
            raise ValueError("iters must be >= 0")
        objectives.batch_size(10**9, self.batch_frac, self.batch_size)
        ConstraintSet.parse(self.constraint)
        if self.lambda1 is None:
            self.lambda1 = 0.0 if self.objective == "logistic" else 5e-6

    @property
    def cadence(self):
        return None if str(self.metric_cadence) == "auto" else int(self.metric_cadence)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["algorithm"] = ",".join(self.algorithm)
        d["seeds"] = ",".join(str(s) for s in self.seeds)
        return d


def parse_seeds(text: str) -> tuple:
    """``"7"``, ``"1,2,5"`` or ``"1..20"`` (inclusive)."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..")
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    if not out:
        raise ValueError(f"no seeds in {text!r}")
    return tuple(out)


@dataclass
class Problem:
    locals: list
    aggregate: objectives.Aggregate
    cs: ConstraintSet
    mixing: topology.MixingMatrix
    graph: topology.Graph
    f_star: float | None = None
    f_star_gap: float | None = None
    dataset_digest: str = ""
    file_digest: str = ""
    extra: dict = field(default_factory=dict)


def _file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def load_dataset(cfg: Config):
    """Returns ``(dataset, file_digest)``; ``synthetic-a9a:N`` builds the stand-in set."""
    spec = cfg.dataset
    if spec.startswith("synthetic-a9a"):
        _, _, count = spec.partition(":")
        ds = data.synthetic_a9a(int(count) if count else 2000, seed=cfg.data_seed)
        digest = ""
    else:
        path = Path(spec)
        if not path.exists():
            raise FileNotFoundError(f"dataset not found: {spec}")
        label_map = data.COVTYPE_LABELS if cfg.label_map == "covtype" else None
        ds = data.parse_libsvm(path, label_map=label_map)
        digest = _file_sha256(path)
    if cfg.subsample:
        ds = data.subsample(ds, int(cfg.subsample), seed=cfg.data_seed)
    if cfg.scale:
        ds = ds.maxabs_scaled()
    return ds, digest


def build_graph(cfg: Config) -> topology.Graph:
    kind, _, arg = cfg.topology.partition(":")
    if kind in ("ring", "complete"):
        return topology.build_graph(kind, cfg.agents)
    if kind in ("random", "random-connected"):
        return topology.random_connected(cfg.agents, float(arg) if arg else 0.5, seed=cfg.graph_seed)
    path = Path(cfg.topology)
    if path.exists():
        return topology.read_edge_list(path, cfg.agents)
    raise ValueError(f"unknown topology {cfg.topology!r}")


def build_problem(cfg: Config) -> Problem:
    cs = ConstraintSet.parse(cfg.constraint)
    graph = build_graph(cfg)
    mixing = topology.metropolis_weights(graph)
    extra = {}
    ds_digest = file_digest = ""
    if cfg.objective == "ridge":
        parts, targets = [], []
        for ss in np.random.SeedSequence(cfg.data_seed).spawn(cfg.agents):
            obj, z = objectives.make_ridge_synthetic(cfg.dim, cfg.samples, cfg.lambda1, seed=ss)
            parts.append(obj)
            targets.append(z)
        h = hashlib.sha256()
        for p in parts:
            h.update(p.features.tobytes())
            h.update(p.labels.tobytes())
        ds_digest = h.hexdigest()
    else:
        ds, file_digest = load_dataset(cfg)
        ds_digest = ds.digest()
        rows = data.partition_even(ds, cfg.agents, seed=cfg.data_seed, shuffle=cfg.shuffle)
        parts = [objectives.from_dataset(ds, cfg.objective, r, cfg.lambda1) for r in rows]
    agg = objectives.Aggregate(parts)
    f_star = gap = None
    if agg.convex:
        ref = reference_optimum(agg, cs, cfg.ref_budget, tol=cfg.ref_tol)
        f_star, gap = ref.value, ref.gap
        extra["reference_iterations"] = ref.iterations
    return Problem(parts, agg, cs, mixing, graph, f_star, gap, ds_digest, file_digest, extra)


def make_algorithm(problem: Problem, cfg: Config, algorithm: str, seed: int):
    kw = dict(batch_frac=cfg.batch_frac, batch=cfg.batch_size, seed=seed)
    if algorithm == "dmfw":
        return DMFW(problem.locals, problem.cs, problem.mixing, StepSchedule(), **kw)
    if algorithm == "mshfw":
        return baselines.make_mshfw(problem.aggregate, problem.cs, **kw)
    if algorithm == "sfw":
        return baselines.make_sfw(problem.aggregate, problem.cs, **kw)
    if algorithm == "defw":
        eta = baselines.DEFW_ETA_CONVEX if problem.aggregate.convex else baselines.DEFW_ETA_NONCONVEX
        return baselines.make_defw(problem.locals, problem.cs, problem.mixing, eta)
    raise ValueError(f"unknown algorithm {algorithm!r}")


def run(problem: Problem, cfg: Config, algorithm: str, seed: int) -> list[TraceRecord]:
    if cfg.iters == 0:
        return []
    algo = make_algorithm(problem, cfg, algorithm, seed)
    return iterate(algo, cfg.iters, Recorder(problem.aggregate, problem.cs, problem.f_star), cfg.cadence)


def _fmt(v) -> str:
    return str(v) if isinstance(v, (int, np.integer)) else repr(float(v))


def write_trace(trace, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for rec in trace:
            w.writerow([_fmt(v) for v in rec.row()])


def read_trace(path) -> list[TraceRecord]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        return [TraceRecord(int(row[0]), *map(float, row[1:])) for row in r]


SUMMARY_COLUMNS = CSV_COLUMNS[1:]


def summarize(traces) -> dict:
    """Seed statistics per algorithm.

    ``traces`` maps ``algorithm -> list of traces`` (one per seed). Returns
    ``{"per_k": rows, "final": rows, "rates": rows}`` where per-k rows hold
    the mean and population standard deviation of every metric column.
    """
    per_k, final, rates = [], [], []
    for algo, runs in traces.items():
        runs = [r for r in runs]
        if not runs:
            raise ValueError(f"no traces for {algo}")
        ks = [rec.k for rec in runs[0]]
        for r in runs[1:]:
            if [rec.k for rec in r] != ks:
                raise ValueError(f"{algo}: traces record different iterations")
        if not ks:
            continue
        arr = np.array([[rec.row()[1:] for rec in r] for r in runs], dtype=float)
        mean, std = arr.mean(axis=0), arr.std(axis=0)
        for j, k in enumerate(ks):
            row = {"algorithm": algo, "k": k}
            for c, col in enumerate(SUMMARY_COLUMNS):
                row[f"{col}_mean"] = mean[j, c]
                row[f"{col}_std"] = std[j, c]
            per_k.append(row)
        final.append({"algorithm": algo, "k": ks[-1], "seeds": len(runs),
                      **{col: mean[-1, c] for c, col in enumerate(SUMMARY_COLUMNS)}})
        kk = np.array(ks, dtype=float)
        lo = 100 if (kk >= 100).sum() >= 10 else 1
        for col in ("fw_gap", "subopt", "tracking_err_sq", "per_agent_dev"):
            c = SUMMARY_COLUMNS.index(col)
            vals = mean[:, c]
            keep = kk >= lo
            row = {"algorithm": algo, "column": col, "k_min": int(lo), "k_max": int(kk[-1]),
                   "slope": math.nan, "inv_log2_r2": math.nan}
            vals_sq = vals ** 2 if col == "per_agent_dev" else vals
            try:
                row["slope"] = fit_rate(kk[keep], vals_sq[keep])
                if col == "fw_gap":
                    row["inv_log2_r2"] = fit_inverse_log(kk[keep & (kk > 1)], vals[keep & (kk > 1)])[1]
            except ValueError:
                pass
            if col == "per_agent_dev":
                row["column"] = "per_agent_dev_sq"
            rates.append(row)
    return {"per_k": per_k, "final": final, "rates": rates}


def write_rows(rows, path) -> None:
    if not rows:
        Path(path).write_text("")
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(v) if isinstance(v, (float, np.floating)) else v for k, v in row.items()})


def with_overrides(cfg: Config, **kw) -> Config:
    return replace(cfg, **kw)
