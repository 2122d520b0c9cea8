"""``budgex`` command line.

Exit codes: 0 ok, 1 invalid or infeasible input, 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import __version__
from .bench import BenchConfig, rows_to_csv, run_bench
from .certify import certify
from .cover import apx_vertex_cover
from .errors import BudgexError
from .graph import load_graph, prune_max_degree, random_exchange_graph, save_graph
from .greedy import plan
from .objectives import KINDS, make_objective
from .posegraph import generate_manhattan, parse_g2o, write_g2o

log = logging.getLogger("budgex")


class InputError(Exception):
    pass


def _workers():
    return max(1, int(os.environ.get("BUDGEX_THREADS", "1")))


def _ensure_dir(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory {path}: {exc}") from exc


def _write(path, text):
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc


def _load_instance(args):
    try:
        g = load_graph(args.graph)
        pg = None
        if getattr(args, "posegraph", None):
            with open(args.posegraph) as fh:
                pg = parse_g2o(fh.read())
    except OSError as exc:
        raise InputError(str(exc)) from exc
    return g, pg


def _emit(obj):
    json.dump(obj, sys.stdout, indent=1)
    sys.stdout.write("\n")


def cmd_generate(args):
    _ensure_dir(args.out)
    if args.kind == "manhattan":
        pg, g = generate_manhattan(args.grid, args.robots, args.steps, loop_radius=args.radius,
                                   seed=args.seed)
        if args.max_degree is not None:
            g = prune_max_degree(g, args.max_degree, seed=args.seed)
        _write(os.path.join(args.out, "posegraph.g2o"), write_g2o(pg))
    else:
        max_deg = args.max_degree if args.max_degree is not None else args.robots * args.verts
        g = random_exchange_graph(args.robots, args.verts, max_deg, (args.wmin, args.wmax),
                                  seed=args.seed, density=args.density)
    save_graph(g, os.path.join(args.out, "graph.json"))
    _emit({"out": args.out, "vertices": g.m, "edges": len(g.edges), "n_robots": g.n_robots})


def cmd_cover(args):
    g, _ = _load_instance(args)
    if args.edges:
        try:
            with open(args.edges) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"{args.edges}: {exc}") from exc
        E = data["edges"] if isinstance(data, dict) else data
    else:
        E = g.all_edges()
    res = apx_vertex_cover(g, E)
    _emit({"cover": list(res.cover), "value": res.value, "exact": res.exact, "lp_value": res.lp_value})


def cmd_plan(args):
    g, pg = _load_instance(args)
    obj = make_objective(args.objective, g, pg)
    res = plan(g, obj, args.budget, algo=args.algo, seed=args.seed, recover=not args.no_recover,
               workers=_workers())
    out = res.to_dict()
    out["objective"] = args.objective
    out["normalized"] = res.value / obj.full_value() if g.edges else 0.0
    if args.trace:
        _write(args.trace, res.trace_csv())
    _emit(out)


def cmd_certify(args):
    g, pg = _load_instance(args)
    obj = make_objective(args.objective, g, pg)
    achieved = None
    if args.algo:
        achieved = plan(g, obj, args.budget, algo=args.algo, seed=args.seed,
                        recover=not args.no_recover).value
    cert = certify(g, obj, args.budget, method=args.method, achieved=achieved, iters=args.iters)
    out = cert.to_dict()
    out["objective"] = args.objective
    out["budget"] = args.budget
    _emit(out)


def _parse_degrees(text):
    if text is None:
        return [None]
    return [int(x) for x in text.split(",")]


def cmd_bench(args):
    cfg = {}
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"{args.config}: {exc}") from exc
    flags = {
        "source": args.source,
        "objective": args.objective,
        "algos": args.algos.split(",") if args.algos else None,
        "budgets": [float(x) for x in args.budgets.split(",")] if args.budgets else None,
        "degrees": _parse_degrees(args.degrees) if args.degrees else None,
        "seeds": [int(x) for x in args.seeds.split(",")] if args.seeds else None,
        "random_trials": args.random_trials,
        "bound": args.bound,
        "timing": args.timing or None,
        "recover": False if args.no_recover else None,
        "grid_size": args.grid,
        "n_robots": args.robots,
        "steps_per_robot": args.steps,
        "loop_radius": args.radius,
        "graph_path": args.graph,
        "posegraph_path": args.posegraph,
    }
    cfg.update({k: v for k, v in flags.items() if v is not None})
    try:
        config = BenchConfig(**cfg)
    except TypeError as exc:
        raise InputError(f"bad bench config: {exc}") from exc
    text = rows_to_csv(run_bench(config, workers=_workers()))
    if args.out:
        parent = os.path.dirname(args.out)
        if parent:
            _ensure_dir(parent)
        _write(args.out, text)
    else:
        sys.stdout.write(text)


def build_parser():
    ap = argparse.ArgumentParser(prog="budgex", description="Budgeted loop-closure data exchange planner")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic instance")
    gen.add_argument("kind", choices=["manhattan", "random"])
    gen.add_argument("--robots", type=int, default=5)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", default=".")
    gen.add_argument("--max-degree", type=int)
    gen.add_argument("--grid", type=int, default=10)
    gen.add_argument("--steps", type=int, default=100, help="poses per robot (manhattan)")
    gen.add_argument("--radius", type=float, default=1.0)
    gen.add_argument("--verts", type=int, default=10, help="observations per robot (random)")
    gen.add_argument("--wmin", type=float, default=1.0)
    gen.add_argument("--wmax", type=float, default=1.0)
    gen.add_argument("--density", type=float, default=1.0)
    gen.set_defaults(func=cmd_generate)

    def instance_args(p):
        p.add_argument("--graph", required=True, help="exchange graph JSON")
        p.add_argument("--posegraph", help="g2o pose graph (wst/fim objectives)")

    cov = sub.add_parser("cover", help="vertex cover of an edge set")
    instance_args(cov)
    cov.add_argument("--edges", help="JSON list of edge ids (default: all)")
    cov.set_defaults(func=cmd_cover)

    pl = sub.add_parser("plan", help="select observations under a budget")
    instance_args(pl)
    pl.add_argument("--objective", choices=KINDS, default="nlc")
    pl.add_argument("--budget", type=float, required=True)
    pl.add_argument("--algo", choices=["greedy", "cbgreedy", "edge", "random"], default="greedy")
    pl.add_argument("--seed", type=int, default=0)
    pl.add_argument("--no-recover", action="store_true", help="disable cover recomputation")
    pl.add_argument("--trace", help="write the greedy trace CSV here")
    pl.set_defaults(func=cmd_plan)

    ce = sub.add_parser("certify", help="upper bound on the optimum")
    instance_args(ce)
    ce.add_argument("--objective", choices=KINDS, default="nlc")
    ce.add_argument("--budget", type=float, required=True)
    ce.add_argument("--method", choices=["oracle", "lp", "fw"], default="lp")
    ce.add_argument("--iters", type=int, default=200)
    ce.add_argument("--algo", choices=["greedy", "cbgreedy", "edge", "random"], default="greedy",
                    help="planner whose value is reported against the bound")
    ce.add_argument("--seed", type=int, default=0)
    ce.add_argument("--no-recover", action="store_true")
    ce.set_defaults(func=cmd_certify)

    be = sub.add_parser("bench", help="budget/density sweep to CSV")
    be.add_argument("--config", help="JSON file with BenchConfig fields; flags override")
    be.add_argument("--source", choices=["manhattan", "random", "file"])
    be.add_argument("--objective", choices=KINDS)
    be.add_argument("--algos", help="comma list, e.g. greedy,edge,random")
    be.add_argument("--budgets", help="comma list of budgets")
    be.add_argument("--degrees", help="comma list of max degrees")
    be.add_argument("--seeds", help="comma list of instance seeds")
    be.add_argument("--random-trials", type=int)
    be.add_argument("--bound", choices=["lp", "fw"])
    be.add_argument("--timing", action="store_true", help="fill runtime_ms (output no longer reproducible)")
    be.add_argument("--no-recover", action="store_true")
    be.add_argument("--grid", type=int)
    be.add_argument("--robots", type=int)
    be.add_argument("--steps", type=int)
    be.add_argument("--radius", type=float)
    be.add_argument("--graph")
    be.add_argument("--posegraph")
    be.add_argument("--out", help="CSV path (default stdout)")
    be.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (InputError, BudgexError, ValueError, KeyError) as exc:
        print(f"budgex: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - reported, not raised
        log.exception("internal error")
        print(f"budgex: internal error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
