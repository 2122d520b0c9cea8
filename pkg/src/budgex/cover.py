"""Weighted vertex cover of exchange-graph edge sets.

Bipartite edge sets get an exact minimum cover (Hopcroft-Karp + Konig when
weights are uniform, s-t min cut otherwise).  General edge sets get the
half-integral LP optimum through the bipartite double cover, rounded at 1/2.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional

import networkx as nx

from .errors import NotBipartite
from .graph import ExchangeGraph, canonical


@dataclass(frozen=True)
class CoverResult:
    cover: tuple
    value: float
    exact: bool
    lp_value: float


def is_cover(g: ExchangeGraph, V: Iterable[int], E: Iterable[int]) -> bool:
    V = set(g.check_vertices(V))
    for eid in g.check_edges(E):
        e = g.edges[eid]
        if e.u not in V and e.v not in V:
            return False
    return True


def hopcroft_karp(left, adj):
    """Maximum-cardinality matching.

    ``left`` is an iterable of left vertices and ``adj[u]`` lists the right
    neighbours of ``u``.  Returns ``(match_left, match_right)`` dicts.
    """
    left = list(left)
    match_l = {u: None for u in left}
    match_r = {}
    INF = float("inf")
    dist = {}

    def bfs():
        queue = deque()
        for u in left:
            if match_l[u] is None:
                dist[u] = 0
                queue.append(u)
            else:
                dist[u] = INF
        found = False
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                w = match_r.get(v)
                if w is None:
                    found = True
                elif dist[w] == INF:
                    dist[w] = dist[u] + 1
                    queue.append(w)
        return found

    def dfs(u):
        # iterative DFS along layered alternating paths
        stack = [(u, iter(adj[u]))]
        path = []
        while stack:
            node, it = stack[-1]
            advanced = False
            for v in it:
                w = match_r.get(v)
                if w is None:
                    path.append((node, v))
                    for a, b in path:
                        match_l[a] = b
                        match_r[b] = a
                    return True
                if dist[w] == dist[node] + 1:
                    path.append((node, v))
                    stack.append((w, iter(adj[w])))
                    advanced = True
                    break
            if not advanced:
                dist[node] = INF
                stack.pop()
                if path:
                    path.pop()
        return False

    while bfs():
        for u in left:
            if match_l[u] is None:
                dfs(u)
    return match_l, match_r


def konig_cover(left, right, adj, match_l, match_r):
    """Minimum vertex cover from a maximum matching (Konig's construction)."""
    radj = {v: [] for v in right}
    for u in left:
        for v in adj[u]:
            radj[v].append(u)
    seen_l = set(u for u in left if match_l[u] is None)
    seen_r = set()
    queue = deque(seen_l)
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v in seen_r or match_l[u] == v:
                continue
            seen_r.add(v)
            w = match_r.get(v)
            if w is not None and w not in seen_l:
                seen_l.add(w)
                queue.append(w)
    return [u for u in left if u not in seen_l] + [v for v in right if v in seen_r]


def two_coloring(g: ExchangeGraph, E: Iterable[int]) -> Optional[dict]:
    """Map vertex -> side (0/1) for the graph induced by ``E``; None if not bipartite."""
    adj = {}
    for eid in E:
        e = g.edges[eid]
        adj.setdefault(e.u, []).append(e.v)
        adj.setdefault(e.v, []).append(e.u)
    color = {}
    for start in sorted(adj):
        if start in color:
            continue
        color[start] = 0
        queue = deque([start])
        while queue:
            x = queue.popleft()
            for y in adj[x]:
                if y not in color:
                    color[y] = 1 - color[x]
                    queue.append(y)
                elif color[y] == color[x]:
                    return None
    return color


def _min_cut_cover(left, right, pairs, weight):
    G = nx.DiGraph()
    G.add_node("s")
    G.add_node("t")
    for u in left:
        G.add_edge("s", ("L", u), capacity=weight[u])
    for v in right:
        G.add_edge(("R", v), "t", capacity=weight[v])
    for u, v in pairs:
        # no capacity attribute means infinite capacity
        G.add_edge(("L", u), ("R", v))
    _, (src_side, _) = nx.minimum_cut(G, "s", "t")
    return [u for u in left if ("L", u) not in src_side] + [v for v in right if ("R", v) in src_side]


def _bipartite_cover(left, right, pairs, weight, uniform):
    """Exact minimum (weighted) cover of a bipartite graph given as pairs (left, right)."""
    if not pairs:
        return []
    if uniform:
        adj = {u: [] for u in left}
        for u, v in pairs:
            adj[u].append(v)
        for u in adj:
            adj[u].sort(key=repr)
        match_l, match_r = hopcroft_karp(left, adj)
        return konig_cover(left, right, adj, match_l, match_r)
    return _min_cut_cover(left, right, pairs, weight)


def min_cover_bipartite(g: ExchangeGraph, E: Iterable[int]) -> CoverResult:
    E = g.check_edges(E)
    if not E:
        return CoverResult((), 0.0, True, 0.0)
    color = two_coloring(g, E)
    if color is None:
        raise NotBipartite("edge set induces an odd cycle")
    verts = sorted(color)
    left = [v for v in verts if color[v] == 0]
    right = [v for v in verts if color[v] == 1]
    pairs = []
    for eid in E:
        e = g.edges[eid]
        pairs.append((e.u, e.v) if color[e.u] == 0 else (e.v, e.u))
    weight = {v: g.vertices[v].w for v in verts}
    uniform = len(set(weight.values())) == 1
    cover = canonical(_bipartite_cover(left, right, pairs, weight, uniform))
    value = g.weight_of(cover)
    return CoverResult(cover, value, True, value)


def half_integral_lp(g: ExchangeGraph, E: Iterable[int]) -> dict:
    """Optimal vertex-cover LP solution with values in {0, 1/2, 1}.

    Solves the minimum weighted cover of the bipartite double cover (two
    copies per vertex, edge {u, v} becomes (u', v'') and (v', u'')) and
    averages the two copies of each vertex.
    """
    E = g.check_edges(E)
    verts = g.edge_vertices(E)
    if not verts:
        return {}
    left = [(v, 0) for v in verts]
    right = [(v, 1) for v in verts]
    pairs = []
    for eid in E:
        e = g.edges[eid]
        pairs.append(((e.u, 0), (e.v, 1)))
        pairs.append(((e.v, 0), (e.u, 1)))
    weight = {}
    for v in verts:
        weight[(v, 0)] = weight[(v, 1)] = g.vertices[v].w
    uniform = len(set(weight.values())) == 1
    chosen = set(_bipartite_cover(left, right, pairs, weight, uniform))
    return {v: Fraction(((v, 0) in chosen) + ((v, 1) in chosen), 2) for v in verts}


def apx_vertex_cover(g: ExchangeGraph, E: Iterable[int]) -> CoverResult:
    """Vertex cover of the graph induced by ``E``.

    Exact when the induced graph is bipartite; otherwise the rounded LP
    optimum, which costs at most twice the LP value.
    """
    E = g.check_edges(E)
    if not E:
        return CoverResult((), 0.0, True, 0.0)
    if two_coloring(g, E) is not None:
        return min_cover_bipartite(g, E)
    pi = half_integral_lp(g, E)
    lp_value = float(sum(g.vertices[v].w * float(x) for v, x in pi.items()))
    cover = tuple(v for v in sorted(pi) if pi[v] >= Fraction(1, 2))
    return CoverResult(cover, g.weight_of(cover), False, lp_value)


def cover_value(g: ExchangeGraph, E: Iterable[int]) -> float:
    return apx_vertex_cover(g, E).value


def cheaper_cover(g: ExchangeGraph, E: Iterable[int], V: Iterable[int]) -> CoverResult:
    """The cheaper of the computed cover of ``E`` and the known cover ``V``.

    ``V`` must cover ``E``; it is the fallback certificate when the
    2-approximate cover is worse than the vertices already broadcast.
    """
    res = apx_vertex_cover(g, E)
    V = canonical(V)
    wv = g.weight_of(V)
    if wv < res.value:
        return CoverResult(V, wv, False, res.lp_value)
    return res
