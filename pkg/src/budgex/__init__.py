"""Budgeted data exchange planning for distributed loop closure detection."""

__version__ = "0.1.0"

from .certify import Certificate, nlc_upper_bound, oracle_opt, simplex_solve, smooth_upper_bound
from .cover import CoverResult, apx_vertex_cover, cover_value, is_cover, min_cover_bipartite
from .graph import ExchangeGraph, build_exchange_graph, edges_of, incidence_matrix, random_exchange_graph
from .greedy import (
    PlanResult,
    cost_benefit_greedy,
    edge_greedy_baseline,
    random_baseline,
    vertex_greedy_uniform,
)
from .objectives import make_objective
from .posegraph import PoseGraph2D, generate_manhattan, parse_g2o, write_g2o
