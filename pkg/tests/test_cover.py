from fractions import Fraction

import numpy as np
import pytest

from budgex.cover import (
    apx_vertex_cover,
    cover_value,
    half_integral_lp,
    hopcroft_karp,
    is_cover,
    min_cover_bipartite,
)
from budgex.errors import NotBipartite
from budgex.graph import build_exchange_graph, random_exchange_graph
from oracles import brute_min_cover

A1, A2, A3, B1, B2, B3, C1, C2, C3 = range(9)


def triangle(weights=(1, 1, 1)):
    return build_exchange_graph([(i, i, weights[i]) for i in range(3)],
                                [(0, 1, 0.5), (1, 2, 0.5), (0, 2, 0.5)], 3)


def test_is_cover(toy):
    assert is_cover(toy, [A2, B2, C1], toy.all_edges())
    assert is_cover(toy, [], [])
    assert not is_cover(toy, [A2], toy.all_edges())


def test_bipartite_path():
    # robots A = {0, 2}, B = {1}
    g = build_exchange_graph([(0, 0, 1), (1, 1, 1), (2, 0, 1)], [(0, 1, 0.5), (1, 2, 0.5)], 2)
    res = min_cover_bipartite(g, g.all_edges())
    assert res.cover == (1,)
    assert res.value == 1
    assert res.exact


def test_bipartite_empty(toy):
    res = min_cover_bipartite(toy, [])
    assert res.cover == () and res.value == 0


def test_not_bipartite():
    with pytest.raises(NotBipartite):
        min_cover_bipartite(triangle(), [0, 1, 2])


def test_hopcroft_karp_small():
    adj = {0: [0, 1], 1: [0], 2: [1, 2]}
    ml, mr = hopcroft_karp([0, 1, 2], adj)
    assert sum(v is not None for v in ml.values()) == 3


@pytest.mark.parametrize("seed", range(30))
def test_bipartite_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    uniform = seed % 2 == 0
    g = random_exchange_graph(2, 6, 6, (1, 1) if uniform else (1, 4), seed=seed, density=0.4)
    E = g.all_edges()
    if len(E) > 12:
        E = tuple(sorted(rng.choice(len(E), 12, replace=False).tolist()))
    res = min_cover_bipartite(g, E)
    assert is_cover(g, res.cover, E)
    assert res.value == pytest.approx(brute_min_cover(g, E)[0], abs=1e-9)


def test_triangle_half_integral():
    g = triangle()
    pi = half_integral_lp(g, g.all_edges())
    assert all(x == Fraction(1, 2) for x in pi.values())
    res = apx_vertex_cover(g, g.all_edges())
    assert res.lp_value == 1.5
    assert res.cover == (0, 1, 2)
    assert res.value == 3 <= 2 * res.lp_value
    assert not res.exact


def test_toy_cover(toy):
    res = apx_vertex_cover(toy, toy.all_edges())
    assert res.value == 3
    assert res.cover == (A2, B2, C1)
    # no pair covers all 8 edges: the two largest degrees sum to 4 + 3 = 7
    assert brute_min_cover(toy, toy.all_edges())[0] == 3


def test_single_edge():
    g = build_exchange_graph([(0, 0, 1), (1, 1, 1)], [(0, 1, 0.9)], 2)
    res = apx_vertex_cover(g, [0])
    assert res.value == 1 and len(res.cover) == 1
    assert cover_value(g, []) == 0


@pytest.mark.parametrize("seed", range(40))
def test_general_cover_properties(seed):
    g = random_exchange_graph(3, 4, 4, (1, 3) if seed % 2 else (1, 1), seed=seed, density=0.6)
    E = g.all_edges()
    pi = half_integral_lp(g, E)
    assert set(pi.values()) <= {Fraction(0), Fraction(1, 2), Fraction(1)}
    for e in E:
        edge = g.edges[e]
        assert pi[edge.u] + pi[edge.v] >= 1
    res = apx_vertex_cover(g, E)
    assert is_cover(g, res.cover, E)
    opt = brute_min_cover(g, E)[0]
    assert res.lp_value <= opt + 1e-9
    assert res.value <= 2 * res.lp_value + 1e-9
    if res.exact:
        assert res.value == pytest.approx(opt)


def test_lp_value_matches_simplex():
    from budgex.certify import LPProblem, simplex_solve
    for seed in range(10):
        g = random_exchange_graph(3, 4, 4, (1, 3), seed=seed, density=0.7)
        E = g.all_edges()
        if not E:
            continue
        A = np.zeros((len(E), g.m))
        for k, e in enumerate(E):
            A[k, g.edges[e].u] = A[k, g.edges[e].v] = -1.0
        sol = simplex_solve(LPProblem(-g.weights, A, -np.ones(len(E)), np.zeros(g.m), np.ones(g.m)))
        pi = half_integral_lp(g, E)
        lp = sum(g.vertices[v].w * float(x) for v, x in pi.items())
        assert -sol.value == pytest.approx(lp, abs=1e-7)
