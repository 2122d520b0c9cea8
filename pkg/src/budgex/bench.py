"""Budget and density sweeps producing plot-ready CSV rows."""

from __future__ import annotations

import csv
import io
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .certify import nlc_upper_bound, smooth_upper_bound
from .graph import load_graph, prune_max_degree, random_exchange_graph
from .greedy import plan
from .objectives import make_objective
from .posegraph import generate_manhattan, parse_g2o

log = logging.getLogger(__name__)

COLUMNS = ["algo", "objective", "budget", "max_degree", "seed", "value", "normalized",
           "upper_bound", "runtime_ms"]


@dataclass
class BenchConfig:
    source: str = "manhattan"            # manhattan | random | file
    objective: str = "wst"
    algos: list = field(default_factory=lambda: ["greedy", "edge", "random"])
    budgets: list = field(default_factory=lambda: [50.0])
    degrees: list = field(default_factory=lambda: [None])
    seeds: list = field(default_factory=lambda: [0])
    random_trials: int = 20
    bound: Optional[str] = None          # None | lp | fw
    fw_iters: int = 100
    recover: bool = True
    timing: bool = False
    # manhattan parameters
    grid_size: int = 10
    n_robots: int = 5
    steps_per_robot: int = 100
    loop_radius: float = 1.0
    # random-graph parameters
    verts_per_robot: int = 10
    # file source
    graph_path: Optional[str] = None
    posegraph_path: Optional[str] = None

    def __post_init__(self):
        if not self.algos or not self.budgets or not self.degrees or not self.seeds:
            raise ValueError("bench sweeps must be nonempty")


def build_instance(cfg: BenchConfig, max_degree, seed):
    """Exchange graph and objective for one (density, seed) cell of the sweep."""
    pg = None
    if cfg.source == "manhattan":
        pg, g = generate_manhattan(cfg.grid_size, cfg.n_robots, cfg.steps_per_robot,
                                   loop_radius=cfg.loop_radius, seed=seed)
    elif cfg.source == "random":
        g = random_exchange_graph(cfg.n_robots, cfg.verts_per_robot,
                                  max_degree if max_degree is not None else cfg.n_robots * cfg.verts_per_robot,
                                  seed=seed)
    elif cfg.source == "file":
        g = load_graph(cfg.graph_path)
        if cfg.posegraph_path:
            with open(cfg.posegraph_path) as fh:
                pg = parse_g2o(fh.read())
    else:
        raise ValueError(f"unknown instance source {cfg.source!r}")
    if max_degree is not None:
        g = prune_max_degree(g, int(max_degree), seed=seed)
    return g, make_objective(cfg.objective, g, pg)


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _trial_seed(seed, trial):
    return int(np.random.SeedSequence([int(seed), int(trial)]).generate_state(1)[0])


def run_bench(cfg: BenchConfig, workers: Optional[int] = None) -> list:
    """Run every (density, seed, budget, algo[, trial]) task; rows come back in config order."""
    if workers is None:
        workers = max(1, int(os.environ.get("BUDGEX_THREADS", "1")))
    tasks = []
    instances = {}
    for deg in cfg.degrees:
        for seed in cfg.seeds:
            g, obj = build_instance(cfg, deg, seed)
            instances[(deg, seed)] = (g, obj, obj.full_value())
            for b in cfg.budgets:
                for algo in cfg.algos:
                    trials = range(cfg.random_trials) if algo == "random" else [None]
                    for t in trials:
                        tasks.append((deg, seed, float(b), algo, t))

    bounds = {}

    def bound(deg, seed, b):
        if cfg.bound is None:
            return None
        key = (deg, seed, b)
        if key not in bounds:
            g, obj, _ = instances[(deg, seed)]
            if cfg.bound == "lp":
                bounds[key] = nlc_upper_bound(g, b).upper_bound
            elif cfg.bound == "fw":
                bounds[key] = smooth_upper_bound(g, obj, b, iters=cfg.fw_iters).upper_bound
            else:
                raise ValueError(f"unknown bound {cfg.bound!r}")
        return bounds[key]

    def run(task):
        deg, seed, b, algo, trial = task
        g, obj, full = instances[(deg, seed)]
        row = {"algo": algo, "objective": cfg.objective, "budget": b,
               "max_degree": deg, "seed": seed}
        t0 = time.perf_counter()
        try:
            rseed = _trial_seed(seed, trial) if trial is not None else None
            res = plan(g, obj, b, algo=algo, seed=rseed, recover=cfg.recover)
            row["value"] = res.value
            row["normalized"] = res.value / full if full > 0 else 0.0
            row["upper_bound"] = bound(deg, seed, b)
        except Exception as exc:  # keep the sweep going
            log.error("bench row %s failed: %s", task, exc)
            row.update(value=float("nan"), normalized=float("nan"), upper_bound=None)
        row["runtime_ms"] = round(1000.0 * (time.perf_counter() - t0), 3) if cfg.timing else None
        return row

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run, tasks))
    return [run(t) for t in tasks]


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row.get(c)) for c in COLUMNS])
    return buf.getvalue()
