import itertools
import logging
import math

import numpy as np
import pytest

from budgex.errors import DisconnectedInit, ParseError, PoseGraphError, SingularCovariance
from budgex.posegraph import (
    CANDIDATE,
    ODOMETRY,
    PRIOR_LOOP,
    check_connected,
    compose,
    generate_manhattan,
    information_matrix,
    initial_information,
    make_posegraph,
    parse_g2o,
    random_posegraph_instance,
    reduced_laplacian,
    relative_pose,
    relative_pose_jacobians,
    wrap_angle,
    write_g2o,
)
from budgex.cover import two_coloring
from oracles import central_jacobian, spanning_tree_sum

I3 = np.eye(3)


def graph_from_pairs(n, pairs):
    return make_posegraph(np.zeros((n, 3)), [(i, j, (0, 0, 0), I3, ODOMETRY) for i, j in pairs])


def test_wrap_angle():
    assert wrap_angle(math.pi) == pytest.approx(math.pi)
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)
    assert wrap_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)
    assert wrap_angle(0.0) == 0.0


def test_compose_inverts_relative_pose():
    rng = np.random.default_rng(0)
    for _ in range(20):
        xi, xj = rng.normal(size=3), rng.normal(size=3)
        back = compose(xi, relative_pose(xi, xj))
        assert np.allclose(back[:2], xj[:2])
        assert wrap_angle(back[2] - xj[2]) == pytest.approx(0.0, abs=1e-12)


def wrap_theta(d):
    d = d.copy()
    d[2] = wrap_angle(d[2])
    return d


def test_jacobians_match_finite_differences():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(100):
        xi = rng.uniform(-5, 5, 3)
        xj = rng.uniform(-5, 5, 3)
        A, B = relative_pose_jacobians(xi, xj)
        nA = central_jacobian(lambda x: relative_pose(x, xj), xi, 1e-6, wrap=wrap_theta)
        nB = central_jacobian(lambda x: relative_pose(xi, x), xj, 1e-6, wrap=wrap_theta)
        worst = max(worst, np.abs(A - nA).max(), np.abs(B - nB).max())
    assert worst < 1e-5


def test_identity_jacobian_block():
    # anchor 0 elsewhere; the edge 1-2 sits at coincident poses with theta = 0 so A = -I, B = I
    pg = make_posegraph(np.zeros((3, 3)), [(0, 1, (0, 0, 0), I3, ODOMETRY),
                                           (1, 2, (0, 0, 0), I3, ODOMETRY)])
    info = information_matrix(pg, 1, linearization=np.zeros((3, 3)))
    expected = np.block([[I3, -I3], [-I3, I3]])
    assert np.allclose(info.block, expected)
    eig = np.sort(np.linalg.eigvalsh(info.block))
    assert np.allclose(eig, [0, 0, 0, 2, 2, 2])
    assert np.allclose(info.factor @ info.factor.T, info.block)


def test_edge_information_psd():
    pg, _ = random_posegraph_instance(3, 4, 8, seed=2)
    for e in pg.edges:
        info = information_matrix(pg, e.id)
        assert np.allclose(info.block, info.block.T)
        if info.block.size:
            assert np.linalg.eigvalsh(info.block).min() >= -1e-10


def test_initial_information_spd():
    pg, _ = random_posegraph_instance(2, 5, 6, seed=3)
    M = initial_information(pg)
    assert M.shape == (pg.dim, pg.dim)
    assert np.linalg.eigvalsh(M).min() > 0


@pytest.mark.parametrize("pairs,expected", [
    ([(0, 1), (1, 2), (0, 2)], 3.0),
    ([(0, 1), (1, 2)], 1.0),
    (list(itertools.combinations(range(4), 2)), 16.0),
])
def test_matrix_tree_small(pairs, expected):
    L = reduced_laplacian(graph_from_pairs(1 + max(max(p) for p in pairs), pairs))
    assert np.linalg.det(L) == pytest.approx(expected)


def test_matrix_tree_matches_enumeration():
    rng = np.random.default_rng(4)
    for trial in range(60):
        n = int(rng.integers(2, 9))
        pairs = [p for p in itertools.combinations(range(n), 2) if rng.random() < 0.5]
        # odometry chain keeps it connected; extras are weighted candidates
        chain = [(k, k + 1) for k in range(n - 1)]
        weights = rng.uniform(0.1, 2.0, len(pairs))
        edges = [(i, j, (0, 0, 0), I3, ODOMETRY) for i, j in chain]
        edges += [(i, j, (0, 0, 0), I3, CANDIDATE, 0.5) for i, j in pairs]
        pg = make_posegraph(np.zeros((n, 3)), edges)
        extra = [e.id for e in pg.candidate_edges()]
        w = {eid: float(wt) for eid, wt in zip(extra, weights)}
        L = reduced_laplacian(pg, w, extra=extra)
        all_edges = [(i, j, 1.0) for i, j in chain] + [(i, j, float(wt)) for (i, j), wt in zip(pairs, weights)]
        expected = spanning_tree_sum(n, all_edges)
        got = np.linalg.det(L) if n > 1 else 1.0
        assert got == pytest.approx(expected, rel=1e-9)


def test_parse_vertex():
    pg = parse_g2o("VERTEX_SE2 0 0 0 0\n")
    assert pg.num_poses == 1
    assert np.array_equal(pg.poses[0], [0, 0, 0])


def test_parse_identity_information():
    text = "VERTEX_SE2 0 0 0 0\nVERTEX_SE2 1 1 0 0\nEDGE_SE2 0 1 1 0 0 1 0 0 1 0 1\n"
    pg = parse_g2o(text)
    assert np.allclose(pg.edges[0].cov, I3)
    assert pg.edges[0].kind == ODOMETRY


def test_parse_errors_carry_line_numbers():
    with pytest.raises(ParseError, match="line 2"):
        parse_g2o("VERTEX_SE2 0 0 0 0\nVERTEX_SE2 1 x 0 0\n")
    with pytest.raises(ParseError, match="line 3"):
        parse_g2o("VERTEX_SE2 0 0 0 0\nVERTEX_SE2 1 0 0 0\nEDGE_SE2 0 1 0 0 0 1 0 0 1 0\n")
    with pytest.raises(ParseError, match="line 3"):
        # negative-definite information
        parse_g2o("VERTEX_SE2 0 0 0 0\nVERTEX_SE2 1 0 0 0\nEDGE_SE2 0 1 0 0 0 -1 0 0 1 0 1\n")


def test_unsupported_tag_skipped(caplog):
    with caplog.at_level(logging.WARNING):
        pg = parse_g2o("VERTEX_SE2 0 0 0 0\nVERTEX_XY 1 0 0\n")
    assert pg.num_poses == 1
    assert "VERTEX_XY" in caplog.text


def test_manhattan_round_trip():
    pg, _ = generate_manhattan(6, 3, 40, seed=5)
    text = write_g2o(pg)
    back = parse_g2o(text)
    assert back.same_as(pg)
    assert write_g2o(back) == text


def test_manhattan_deterministic():
    a = generate_manhattan(10, 5, 200, loop_radius=1.0, seed=3)
    b = generate_manhattan(10, 5, 200, loop_radius=1.0, seed=3)
    assert write_g2o(a[0]) == write_g2o(b[0])
    assert a[1].to_dict() == b[1].to_dict()


def test_manhattan_structure():
    pg, g = generate_manhattan(8, 2, 60, seed=6)
    assert two_coloring(g, g.all_edges()) is not None
    assert len(g.edges) > 0
    check_connected(pg)
    kinds = {e.kind for e in pg.edges}
    assert {ODOMETRY, PRIOR_LOOP, CANDIDATE} <= kinds
    for e in g.edges:
        assert g.vertices[e.u].robot != g.vertices[e.v].robot
        assert 0 < e.p <= 1


def test_zero_radius_no_candidates():
    pg, g = generate_manhattan(8, 3, 30, loop_radius=0.0, seed=7)
    assert pg.candidate_edges() == []
    assert len(g.edges) == 0


def test_bad_inputs():
    with pytest.raises(PoseGraphError):
        generate_manhattan(5, 1, 10)
    with pytest.raises(SingularCovariance):
        make_posegraph(np.zeros((2, 3)), [(0, 1, (0, 0, 0), np.zeros((3, 3)), ODOMETRY)])
    pg = make_posegraph(np.zeros((3, 3)), [(0, 1, (0, 0, 0), I3, ODOMETRY),
                                           (1, 2, (0, 0, 0), I3, CANDIDATE, 0.5)])
    with pytest.raises(DisconnectedInit):
        check_connected(pg)
