"""Budgeted planners over the vertex (observation) view of the exchange graph.

Every planner returns a :class:`PlanResult` whose broadcast set ``vertices``
fits the budget and whose verified loop closures are ``edges_of(vertices)``.
Ties in marginal gain always go to the smallest id.
"""

from __future__ import annotations

import heapq
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np

from .cover import CoverResult, apx_vertex_cover, cheaper_cover
from .graph import ExchangeGraph, canonical, edges_of
from .objectives import Objective

EPS = 1e-9


@dataclass(frozen=True)
class TraceStep:
    item: int       # vertex id (edge id for the edge baseline)
    gain: float
    cost: float     # cumulative cost after any cover recomputation
    value: float


@dataclass
class PlanResult:
    algo: str
    budget: float
    trace: list
    vertices: tuple
    edges: tuple
    value: float
    cost: float
    cover: CoverResult
    extra_rounds: int = 0
    evaluations: int = 0

    def to_dict(self) -> dict:
        return {
            "algo": self.algo,
            "budget": self.budget,
            "vertices": list(self.vertices),
            "edges": list(self.edges),
            "value": float(self.value),
            "cost": float(self.cost),
            "extra_rounds": self.extra_rounds,
            "cover": {
                "vertices": list(self.cover.cover),
                "value": self.cover.value,
                "exact": self.cover.exact,
                "lp_value": self.cover.lp_value,
            },
            "trace": [
                {"item": s.item, "gain": float(s.gain), "cost": float(s.cost), "value": float(s.value)}
                for s in self.trace
            ],
        }

    def trace_csv(self) -> str:
        rows = ["round,vertex,gain,cost,value"]
        for n, s in enumerate(self.trace, start=1):
            rows.append(f"{n},{s.item},{float(s.gain)!r},{float(s.cost)!r},{float(s.value)!r}")
        return "\n".join(rows) + "\n"


# --- candidate screening -------------------------------------------------------------

def _better(a, b):
    """True if scored item ``a = (score, id)`` beats ``b`` (higher score, then smaller id)."""
    return b is None or a[0] > b[0] or (a[0] == b[0] and a[1] < b[1])


def exhaustive_screen(candidates: Iterable[int], score: Callable[[int], float], workers: int = 1):
    """Evaluate every candidate; return ``(best_id, best_score)`` or ``(None, None)``."""
    candidates = list(candidates)
    if not candidates:
        return None, None
    if workers > 1 and len(candidates) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scores = list(pool.map(score, candidates))
    else:
        scores = [score(c) for c in candidates]
    best = None
    for c, s in zip(candidates, scores):
        if _better((s, c), best):
            best = (s, c)
    return best[1], best[0]


class LazyScreener:
    """Lazy greedy screening with stale upper bounds kept across rounds.

    Valid for diminishing-returns scores: a score computed in an earlier round
    upper-bounds the score now.  Every candidate whose stale bound comes within
    a small tolerance of the running best is re-evaluated, so the winner is the
    one an exhaustive scan picks, including the smallest-id tie-break.
    """

    def __init__(self, tol: float = 1e-9):
        self.tol = tol
        self.heap = []
        self.known = set()
        self.evaluations = 0

    def select(self, candidates, score: Callable[[int], float]):
        cand = set(candidates)
        for c in cand - self.known:
            heapq.heappush(self.heap, (-math.inf, c))
            self.known.add(c)
        best = None
        fresh = []
        while self.heap:
            negb, c = self.heap[0]
            if c not in cand:
                heapq.heappop(self.heap)
                self.known.discard(c)
                continue
            if best is not None and -negb < best[0] - self.tol * (1.0 + abs(best[0])):
                break
            heapq.heappop(self.heap)
            s = score(c)
            self.evaluations += 1
            fresh.append((s, c))
            if _better((s, c), best):
                best = (s, c)
        for s, c in fresh:
            if best is not None and c == best[1]:
                self.known.discard(c)
            else:
                heapq.heappush(self.heap, (-s, c))
        if best is None:
            return None, None
        return best[1], best[0]


def lazy_priority_screening(state, candidates, screener: Optional[LazyScreener] = None):
    """Best vertex by marginal gain using lazy evaluation (see :class:`LazyScreener`)."""
    screener = screener or LazyScreener()
    v, _ = screener.select(candidates, state.marginal_gain)
    return v


# --- planners ----------------------------------------------------------------------------

def _finish(algo, g, objective, b, trace, V, extra_rounds=0, evaluations=0, cover=None):
    V = canonical(V)
    L = edges_of(g, V)
    cover = cover if cover is not None else cheaper_cover(g, L, V)
    return PlanResult(
        algo=algo,
        budget=float(b),
        trace=trace,
        vertices=V,
        edges=L,
        value=objective.value(L),
        cost=g.weight_of(V),
        cover=cover,
        extra_rounds=extra_rounds,
        evaluations=evaluations,
    )


def _selector(state, lazy, workers, normalize=None):
    """Return ``pick(candidates) -> vertex`` for the current state."""
    w = state.graph.weights
    if normalize:
        score = lambda v: state.marginal_gain(v) / w[v]
    else:
        score = state.marginal_gain
    if lazy and workers <= 1:
        screener = LazyScreener()
        return lambda cands: screener.select(cands, score)[0]
    return lambda cands: exhaustive_screen(cands, score, workers)[0]


def vertex_greedy_uniform(g: ExchangeGraph, objective: Objective, b: float, recover: bool = True,
                          lazy: bool = True, workers: int = 1) -> PlanResult:
    """Greedy observation selection with vertex-cover recomputation.

    Picks the vertex with the largest marginal gain until the budget is spent,
    then recomputes a cover of the verified edges.  If that cover is cheaper
    than what was spent, greedy resumes with the freed budget.  The final
    broadcast set is the previous round's cover plus the last round's picks.
    Costs are vertex weights (unit in the uniform setting).
    """
    w = g.weights
    state = objective.new_state()
    pick = _selector(state, lazy, workers)
    cost = 0.0
    C = ()
    trace = []
    chosen = set()
    first_round = None
    while True:
        n_prev = len(state.selected)
        C_prev = C
        exhausted = False
        while True:
            cands = [v for v in range(g.m) if v not in chosen and cost + w[v] <= b + EPS]
            if not cands:
                exhausted = len(chosen) == g.m
                break
            v = pick(cands)
            gain = state.commit(v)
            chosen.add(v)
            cost += w[v]
            trace.append(TraceStep(int(v), gain, cost, state.value))
        if first_round is None:
            first_round = len(state.selected)
        if not recover:
            C_prev, n_prev = (), 0
            break
        res = apx_vertex_cover(g, edges_of(g, state.selected))
        C = res.cover
        if res.value < cost - EPS and not exhausted:
            cost = res.value
            continue
        break
    V_new = state.selected[n_prev:]
    V = set(C_prev) | set(V_new)
    return _finish("greedy", g, objective, b, trace, V,
                   extra_rounds=len(state.selected) - first_round,
                   evaluations=state.evaluations)


def _knapsack_pass(g, objective, b, normalize, lazy, workers):
    w = g.weights
    state = objective.new_state()
    pick = _selector(state, lazy, workers, normalize=normalize)
    cost = 0.0
    trace = []
    chosen = set()
    while True:
        cands = [v for v in range(g.m) if v not in chosen and cost + w[v] <= b + EPS]
        if not cands:
            break
        v = pick(cands)
        gain = state.commit(v)
        chosen.add(v)
        cost += w[v]
        trace.append(TraceStep(int(v), gain, cost, state.value))
    return state, trace


def cost_benefit_greedy(g: ExchangeGraph, objective: Objective, b: float, lazy: bool = True,
                        workers: int = 1) -> PlanResult:
    """Better of a plain-gain greedy pass and a gain-per-weight greedy pass under a knapsack."""
    best = None
    for normalize in (False, True):
        state, trace = _knapsack_pass(g, objective, b, normalize, lazy, workers)
        plan = _finish("cbgreedy", g, objective, b, trace, state.selected,
                       evaluations=state.evaluations)
        if best is None or plan.value > best.value + EPS:
            best = plan
    return best


def edge_greedy_baseline(g: ExchangeGraph, objective: Objective, b: float) -> PlanResult:
    """Greedy over loop closures with a vertex-cover budget check.

    An edge with an endpoint already in the cover is free.  Otherwise the cover
    is recomputed for the enlarged set and the edge is dropped for good if the
    cover no longer fits.  Finally every edge incident to the cover is added.
    """
    w = g.weights
    state = objective.new_state()
    screener = LazyScreener()
    score = lambda e: state.gain_edges([e])
    cover = CoverResult((), 0.0, True, 0.0)
    in_cover = set()
    selected = []
    remaining = set(g.all_edges())
    trace = []
    while remaining:
        e, _ = screener.select(remaining, score)
        if e is None:
            break
        remaining.discard(e)
        edge = g.edges[e]
        if edge.u not in in_cover and edge.v not in in_cover:
            cheap = edge.u if (w[edge.u], edge.u) <= (w[edge.v], edge.v) else edge.v
            trial = cheaper_cover(g, selected + [e], set(cover.cover) | {cheap})
            if trial.value > b + EPS:
                continue
            cover = trial
            in_cover = set(cover.cover)
        gain = state.commit_edges([e])
        selected.append(e)
        trace.append(TraceStep(int(e), gain, cover.value, state.value))
    V = cover.cover
    L = edges_of(g, V)
    return PlanResult(
        algo="edge",
        budget=float(b),
        trace=trace,
        vertices=canonical(V),
        edges=L,
        value=objective.value(L),
        cost=cover.value,
        cover=cover,
        evaluations=screener.evaluations,
    )


def random_baseline(g: ExchangeGraph, objective: Objective, b: float, seed=None) -> PlanResult:
    """Random budget-feasible set of observations, scanned in a seeded random order."""
    rng = np.random.default_rng(seed)
    w = g.weights
    state = objective.new_state()
    cost = 0.0
    trace = []
    for v in rng.permutation(g.m):
        v = int(v)
        if cost + w[v] <= b + EPS:
            gain = state.commit(v)
            cost += w[v]
            trace.append(TraceStep(v, gain, cost, state.value))
    return _finish("random", g, objective, b, trace, state.selected)


ALGORITHMS = {
    "greedy": vertex_greedy_uniform,
    "cbgreedy": cost_benefit_greedy,
    "edge": edge_greedy_baseline,
    "random": random_baseline,
}


def plan(g: ExchangeGraph, objective: Objective, b: float, algo: str = "greedy", seed=None,
         recover: bool = True, workers: int = 1) -> PlanResult:
    if algo == "greedy":
        return vertex_greedy_uniform(g, objective, b, recover=recover, workers=workers)
    if algo == "cbgreedy":
        return cost_benefit_greedy(g, objective, b, workers=workers)
    if algo == "edge":
        return edge_greedy_baseline(g, objective, b)
    if algo == "random":
        return random_baseline(g, objective, b, seed=seed)
    raise ValueError(f"unknown algorithm {algo!r}; expected one of {sorted(ALGORITHMS)}")
