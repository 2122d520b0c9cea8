"""Exchange graph: observations as vertices, potential loop closures as edges.

Vertex and edge ids are dense integers.  Every set of ids handed around the
package is a sorted tuple so that ordering and tie-breaks are reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import (
    DanglingVertexId,
    DuplicateEdge,
    GraphError,
    InfeasibleDegree,
    IntraRobotEdge,
    InvalidEdgeId,
    InvalidVertexId,
    NonpositiveWeight,
    ProbabilityOutOfRange,
)

VertexSet = tuple
EdgeSet = tuple


def canonical(ids: Iterable[int]) -> tuple:
    """Sorted, deduplicated tuple of ids."""
    return tuple(sorted(set(int(i) for i in ids)))


@dataclass(frozen=True)
class Vertex:
    id: int
    robot: int
    w: float = 1.0


@dataclass(frozen=True)
class Edge:
    id: int
    u: int
    v: int
    p: float
    pg_edge: Optional[int] = None

    @property
    def ends(self):
        return (self.u, self.v)


@dataclass(frozen=True, eq=False)
class ExchangeGraph:
    """Validated n-partite exchange graph.  Build with :func:`build_exchange_graph`."""

    n_robots: int
    vertices: tuple
    edges: tuple
    incident: tuple = field(repr=False)

    @property
    def m(self) -> int:
        return len(self.vertices)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def weights(self) -> np.ndarray:
        return np.array([v.w for v in self.vertices], dtype=float)

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([e.p for e in self.edges], dtype=float)

    def degree(self, v: int) -> int:
        return len(self.incident[v])

    def neighbors(self, v: int) -> tuple:
        out = []
        for eid in self.incident[v]:
            e = self.edges[eid]
            out.append(e.v if e.u == v else e.u)
        return tuple(sorted(out))

    def all_vertices(self) -> VertexSet:
        return tuple(range(self.m))

    def all_edges(self) -> EdgeSet:
        return tuple(range(len(self.edges)))

    def is_uniform(self) -> bool:
        w = self.weights
        return len(w) == 0 or bool(np.all(w == w[0]))

    def check_vertices(self, V: Iterable[int]) -> VertexSet:
        V = canonical(V)
        if V and (V[0] < 0 or V[-1] >= self.m):
            raise InvalidVertexId(f"vertex ids out of range 0..{self.m - 1}: {V}")
        return V

    def check_edges(self, E: Iterable[int]) -> EdgeSet:
        E = canonical(E)
        if E and (E[0] < 0 or E[-1] >= len(self.edges)):
            raise InvalidEdgeId(f"edge ids out of range 0..{len(self.edges) - 1}: {E}")
        return E

    def edge_vertices(self, E: Iterable[int]) -> VertexSet:
        """Vertices touched by the edges in ``E``."""
        out = set()
        for eid in E:
            e = self.edges[eid]
            out.add(e.u)
            out.add(e.v)
        return tuple(sorted(out))

    def weight_of(self, V: Iterable[int]) -> float:
        return float(sum(self.vertices[v].w for v in V))

    def to_dict(self) -> dict:
        return {
            "n_robots": self.n_robots,
            "vertices": [{"id": v.id, "robot": v.robot, "w": v.w} for v in self.vertices],
            "edges": [{"u": e.u, "v": e.v, "p": e.p, "pg_edge": e.pg_edge} for e in self.edges],
        }


def build_exchange_graph(vertices, edges, n: int) -> ExchangeGraph:
    """Validate raw vertex and edge lists and assemble an :class:`ExchangeGraph`.

    ``vertices`` items are ``(id, robot, w)`` tuples or :class:`Vertex`;
    ``edges`` items are ``(u, v, p[, pg_edge])`` tuples or :class:`Edge`.
    Edge ids follow input order.
    """
    if n < 2:
        raise GraphError(f"an exchange graph needs at least 2 robots, got {n}")
    verts = []
    for item in vertices:
        if isinstance(item, Vertex):
            vid, robot, w = item.id, item.robot, item.w
        else:
            vid, robot, w = item
        w = float(w)
        if not w > 0 or not np.isfinite(w):
            raise NonpositiveWeight(f"vertex {vid} has weight {w}")
        verts.append(Vertex(int(vid), int(robot), w))
    verts.sort(key=lambda v: v.id)
    if [v.id for v in verts] != list(range(len(verts))):
        raise GraphError("vertex ids must be contiguous 0..m-1")

    incident = [[] for _ in verts]
    seen = set()
    out_edges = []
    for item in edges:
        if isinstance(item, Edge):
            u, v, p, pg = item.u, item.v, item.p, item.pg_edge
        else:
            u, v, p = item[:3]
            pg = item[3] if len(item) > 3 else None
        u, v, p = int(u), int(v), float(p)
        for x in (u, v):
            if not 0 <= x < len(verts):
                raise DanglingVertexId(f"edge ({u}, {v}) references unknown vertex {x}")
        if u == v or verts[u].robot == verts[v].robot:
            raise IntraRobotEdge(f"edge ({u}, {v}) joins two observations of robot {verts[u].robot}")
        if not 0.0 < p <= 1.0:
            raise ProbabilityOutOfRange(f"edge ({u}, {v}) has probability {p}")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise DuplicateEdge(f"duplicate edge {key}")
        seen.add(key)
        eid = len(out_edges)
        out_edges.append(Edge(eid, u, v, p, None if pg is None else int(pg)))
        incident[u].append(eid)
        incident[v].append(eid)

    return ExchangeGraph(
        n_robots=int(n),
        vertices=tuple(verts),
        edges=tuple(out_edges),
        incident=tuple(tuple(lst) for lst in incident),
    )


def edges_of(g: ExchangeGraph, V: Iterable[int]) -> EdgeSet:
    """All edges with at least one endpoint in ``V``."""
    V = g.check_vertices(V)
    out = set()
    for v in V:
        out.update(g.incident[v])
    return tuple(sorted(out))


def incidence_matrix(g: ExchangeGraph) -> np.ndarray:
    A = np.zeros((g.m, len(g.edges)))
    for e in g.edges:
        A[e.u, e.id] = 1.0
        A[e.v, e.id] = 1.0
    return A


def subgraph_edges(g: ExchangeGraph, E: Iterable[int]) -> ExchangeGraph:
    """Exchange graph with the same vertices and only the edges in ``E``."""
    E = g.check_edges(E)
    return build_exchange_graph(g.vertices, [g.edges[i] for i in E], g.n_robots)


def prune_max_degree(g: ExchangeGraph, max_degree: int, seed=None) -> ExchangeGraph:
    """Randomly drop edges until no vertex has degree above ``max_degree``.

    Edges are visited in a seeded random order and kept while both endpoints
    have spare degree.  Vertices are kept even if they become isolated.
    """
    if max_degree < 0:
        raise InfeasibleDegree(f"max_degree must be >= 0, got {max_degree}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(g.edges))
    deg = np.zeros(g.m, dtype=int)
    keep = []
    for eid in order:
        e = g.edges[eid]
        if deg[e.u] < max_degree and deg[e.v] < max_degree:
            deg[e.u] += 1
            deg[e.v] += 1
            keep.append(int(eid))
    keep.sort()
    return subgraph_edges(g, keep)


def random_exchange_graph(n_robots, verts_per_robot, max_degree, weight_range=(1.0, 1.0),
                          seed=None, density=1.0) -> ExchangeGraph:
    """Random n-partite exchange graph with bounded vertex degree.

    Every inter-robot pair is a candidate with probability ``density``;
    candidates are then pruned to ``max_degree``.  Weights are uniform in
    ``weight_range`` and edge probabilities uniform in (0, 1].
    """
    if n_robots < 2:
        raise GraphError(f"n_robots must be >= 2, got {n_robots}")
    if max_degree < 0:
        raise InfeasibleDegree(f"max_degree must be >= 0, got {max_degree}")
    lo, hi = weight_range
    if lo <= 0 or hi < lo:
        raise NonpositiveWeight(f"bad weight range {weight_range}")
    rng = np.random.default_rng(seed)
    m = n_robots * verts_per_robot
    robots = [i // verts_per_robot for i in range(m)]
    weights = rng.uniform(lo, hi, size=m) if hi > lo else np.full(m, float(lo))
    verts = [(i, robots[i], float(weights[i])) for i in range(m)]

    pairs = [(u, v) for u, v in combinations(range(m), 2) if robots[u] != robots[v]]
    pairs = [pq for pq in pairs if rng.random() < density]
    order = rng.permutation(len(pairs))
    deg = np.zeros(m, dtype=int)
    chosen = []
    for k in order:
        u, v = pairs[k]
        if deg[u] < max_degree and deg[v] < max_degree:
            deg[u] += 1
            deg[v] += 1
            chosen.append((u, v))
    chosen.sort()
    # 1 - U[0,1) lies in (0, 1]
    probs = 1.0 - rng.random(len(chosen))
    edges = [(u, v, float(p)) for (u, v), p in zip(chosen, probs)]
    return build_exchange_graph(verts, edges, n_robots)


def graph_from_dict(data: dict) -> ExchangeGraph:
    try:
        verts = [(v["id"], v["robot"], v.get("w", 1.0)) for v in data["vertices"]]
        edges = [(e["u"], e["v"], e["p"], e.get("pg_edge")) for e in data["edges"]]
        n = data["n_robots"]
    except (KeyError, TypeError) as exc:
        raise GraphError(f"malformed exchange graph: missing or bad field {exc}") from exc
    return build_exchange_graph(verts, edges, n)


def load_graph(path) -> ExchangeGraph:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise GraphError(f"{path}: invalid JSON ({exc})") from exc
    return graph_from_dict(data)


def save_graph(g: ExchangeGraph, path) -> None:
    with open(path, "w") as fh:
        json.dump(g.to_dict(), fh, indent=1)
        fh.write("\n")


def toy_graph(p: float = 0.5, weights: Optional[Sequence[float]] = None) -> ExchangeGraph:
    """Three-robot toy exchange graph with nine observations and eight candidates.

    Vertex ids: a1..a3 -> 0..2, b1..b3 -> 3..5, c1..c3 -> 6..8.
    """
    names = ["a1", "a2", "a3", "b1", "b2", "b3", "c1", "c2", "c3"]
    idx = {name: i for i, name in enumerate(names)}
    w = weights if weights is not None else [1.0] * 9
    verts = [(i, i // 3, w[i]) for i in range(9)]
    pairs = ["a1b2", "a2b1", "a2c2", "a2c3", "b2c1", "a2c1", "b2a3", "b3c1"]
    edges = [(idx[s[:2]], idx[s[2:]], p) for s in pairs]
    return build_exchange_graph(verts, edges, 3)
