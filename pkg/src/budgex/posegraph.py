"""2D pose graphs: simulation, SE(2) measurement Jacobians, Laplacians and g2o I/O.

State ordering: pose ``k`` occupies rows ``3k .. 3k+2`` of the full state;
the anchor pose is deleted, so every pose index after the anchor shifts down.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DisconnectedInit, ParseError, PoseGraphError, SingularCovariance
from .graph import ExchangeGraph, build_exchange_graph

log = logging.getLogger(__name__)

ODOMETRY = "odometry"
PRIOR_LOOP = "prior-loop"
CANDIDATE = "candidate"
KINDS = (ODOMETRY, PRIOR_LOOP, CANDIDATE)

DEFAULT_ODOM_NOISE = (0.05, 0.05, 0.01)


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


@dataclass(frozen=True, eq=False)
class PGEdge:
    id: int
    i: int
    j: int
    meas: tuple          # (dx, dy, dtheta) in the frame of pose i
    cov: np.ndarray      # 3x3 SPD noise covariance
    kind: str
    p: Optional[float] = None

    @property
    def precisions(self):
        """Translational and rotational precision (w_p, w_theta)."""
        return 2.0 / (self.cov[0, 0] + self.cov[1, 1]), 1.0 / self.cov[2, 2]


@dataclass(frozen=True, eq=False)
class PoseGraph2D:
    poses: np.ndarray    # (N, 3): x, y, theta
    edges: tuple
    anchor: int = 0
    robots: tuple = field(default=())

    @property
    def num_poses(self) -> int:
        return len(self.poses)

    @property
    def dim(self) -> int:
        return 3 * (self.num_poses - 1)

    def init_edges(self):
        return [e for e in self.edges if e.kind != CANDIDATE]

    def candidate_edges(self):
        return [e for e in self.edges if e.kind == CANDIDATE]

    def robot_of(self, k: int) -> int:
        return self.robots[k] if self.robots else 0

    def reduced_index(self, k: int) -> int:
        """Row of pose ``k`` in anchor-deleted per-pose matrices, or -1 for the anchor."""
        if k == self.anchor:
            return -1
        return k if k < self.anchor else k - 1

    def same_as(self, other: "PoseGraph2D") -> bool:
        if self.anchor != other.anchor or tuple(self.robots) != tuple(other.robots):
            return False
        if not np.array_equal(self.poses, other.poses) or len(self.edges) != len(other.edges):
            return False
        for a, b in zip(self.edges, other.edges):
            if (a.id, a.i, a.j, a.kind, a.p) != (b.id, b.i, b.j, b.kind, b.p):
                return False
            if tuple(a.meas) != tuple(b.meas) or not np.array_equal(a.cov, b.cov):
                return False
        return True


def make_posegraph(poses, edges, anchor=0, robots=()):
    """Validate and assemble a :class:`PoseGraph2D`.

    ``edges`` items are ``(i, j, meas, cov, kind[, p])``; ids follow input order.
    """
    poses = np.asarray(poses, dtype=float).reshape(-1, 3)
    n = len(poses)
    if not 0 <= anchor < n:
        raise PoseGraphError(f"anchor {anchor} is not a pose")
    out = []
    for item in edges:
        if isinstance(item, PGEdge):
            i, j, meas, cov, kind, p = item.i, item.j, item.meas, item.cov, item.kind, item.p
        else:
            i, j, meas, cov, kind = item[:5]
            p = item[5] if len(item) > 5 else None
        if kind not in KINDS:
            raise PoseGraphError(f"unknown edge kind {kind!r}")
        if not (0 <= i < n and 0 <= j < n) or i == j:
            raise PoseGraphError(f"edge ({i}, {j}) has bad endpoints")
        cov = np.array(cov, dtype=float).reshape(3, 3)
        if not np.allclose(cov, cov.T):
            raise SingularCovariance(f"edge ({i}, {j}) covariance is not symmetric")
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise SingularCovariance(f"edge ({i}, {j}) covariance is not positive definite") from None
        out.append(PGEdge(len(out), int(i), int(j), tuple(float(x) for x in meas), cov, kind,
                          None if p is None else float(p)))
    robots = tuple(int(r) for r in robots)
    if robots and len(robots) != n:
        raise PoseGraphError("robots must list one robot id per pose")
    return PoseGraph2D(poses, tuple(out), int(anchor), robots)


def check_connected(pg: PoseGraph2D) -> None:
    parent = list(range(pg.num_poses))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in pg.init_edges():
        parent[find(e.i)] = find(e.j)
    roots = {find(k) for k in range(pg.num_poses)}
    if len(roots) > 1:
        raise DisconnectedInit(f"non-candidate edges leave {len(roots)} components")


# --- SE(2) measurement model -------------------------------------------------

def relative_pose(xi, xj):
    """Pose of ``xj`` expressed in the frame of ``xi``."""
    c, s = math.cos(xi[2]), math.sin(xi[2])
    dx, dy = xj[0] - xi[0], xj[1] - xi[1]
    return np.array([c * dx + s * dy, -s * dx + c * dy, wrap_angle(xj[2] - xi[2])])


def compose(xi, delta):
    c, s = math.cos(xi[2]), math.sin(xi[2])
    return np.array([xi[0] + c * delta[0] - s * delta[1],
                     xi[1] + s * delta[0] + c * delta[1],
                     wrap_angle(xi[2] + delta[2])])


def relative_pose_jacobians(xi, xj):
    """Jacobians of :func:`relative_pose` with respect to ``xi`` and ``xj`` (3x3 each)."""
    c, s = math.cos(xi[2]), math.sin(xi[2])
    dx, dy = xj[0] - xi[0], xj[1] - xi[1]
    A = np.array([[-c, -s, -s * dx + c * dy],
                  [s, -c, -c * dx - s * dy],
                  [0.0, 0.0, -1.0]])
    B = np.array([[c, s, 0.0],
                  [-s, c, 0.0],
                  [0.0, 0.0, 1.0]])
    return A, B


@dataclass(frozen=True)
class EdgeInformation:
    """Information contribution J^T Sigma^-1 J restricted to its nonzero rows/cols.

    ``factor`` satisfies ``block = factor @ factor.T``.
    """
    idx: np.ndarray
    block: np.ndarray
    factor: np.ndarray

    def dense(self, d: int) -> np.ndarray:
        out = np.zeros((d, d))
        out[np.ix_(self.idx, self.idx)] = self.block
        return out


def odometry_estimate(pg: PoseGraph2D) -> np.ndarray:
    """Dead-reckoned poses from the anchor along non-candidate edges (BFS order)."""
    est = np.full((pg.num_poses, 3), np.nan)
    est[pg.anchor] = pg.poses[pg.anchor]
    adj = {}
    for e in pg.init_edges():
        adj.setdefault(e.i, []).append(e)
        adj.setdefault(e.j, []).append(e)
    frontier = [pg.anchor]
    while frontier:
        nxt = []
        for k in frontier:
            for e in sorted(adj.get(k, []), key=lambda e: e.id):
                if e.i == k and np.isnan(est[e.j, 0]):
                    est[e.j] = compose(est[k], e.meas)
                    nxt.append(e.j)
                elif e.j == k and np.isnan(est[e.i, 0]):
                    # xi = xj composed with the inverse measurement
                    d = np.asarray(e.meas)
                    c, s = math.cos(d[2]), math.sin(d[2])
                    inv = np.array([-c * d[0] - s * d[1], s * d[0] - c * d[1], -d[2]])
                    est[e.i] = compose(est[k], inv)
                    nxt.append(e.i)
        frontier = nxt
    if np.isnan(est).any():
        raise DisconnectedInit("odometry does not reach every pose from the anchor")
    return est


def information_matrix(pg: PoseGraph2D, edge_id: int, linearization=None) -> EdgeInformation:
    """Information of one relative-pose edge at the given pose estimates."""
    e = pg.edges[edge_id]
    est = odometry_estimate(pg) if linearization is None else np.asarray(linearization)
    A, B = relative_pose_jacobians(est[e.i], est[e.j])
    try:
        # Sigma^-1 = Li^T Li  with Li = inv(chol(Sigma))
        L = np.linalg.cholesky(e.cov)
    except np.linalg.LinAlgError:
        raise SingularCovariance(f"edge {edge_id} covariance is singular") from None
    Linv = np.linalg.inv(L)
    blocks, idx = [], []
    for k, J in ((e.i, A), (e.j, B)):
        r = pg.reduced_index(k)
        if r >= 0:
            blocks.append(J)
            idx.extend(range(3 * r, 3 * r + 3))
    if not blocks:
        z = np.zeros((0, 0))
        return EdgeInformation(np.zeros(0, dtype=int), z, np.zeros((0, 3)))
    J = np.hstack(blocks)
    W = Linv @ J                      # whitened Jacobian
    factor = W.T
    return EdgeInformation(np.array(idx), factor @ factor.T, factor)


def initial_information(pg: PoseGraph2D, linearization=None, ridge=1e-6) -> np.ndarray:
    est = odometry_estimate(pg) if linearization is None else linearization
    M = ridge * np.eye(pg.dim)
    for e in pg.init_edges():
        info = information_matrix(pg, e.id, est)
        M[np.ix_(info.idx, info.idx)] += info.block
    return M


def reduced_laplacian(pg: PoseGraph2D, edge_weights=None, extra=()) -> np.ndarray:
    """Weighted Laplacian over poses with the anchor row/column deleted.

    Includes every non-candidate edge plus the edge ids in ``extra``.
    ``edge_weights`` maps edge id to weight; missing entries weigh 1.
    """
    edge_weights = edge_weights or {}
    n = pg.num_poses
    L = np.zeros((n, n))
    ids = [e.id for e in pg.init_edges()] + [int(x) for x in extra]
    for eid in ids:
        e = pg.edges[eid]
        w = float(edge_weights.get(eid, 1.0))
        L[e.i, e.i] += w
        L[e.j, e.j] += w
        L[e.i, e.j] -= w
        L[e.j, e.i] -= w
    keep = [k for k in range(n) if k != pg.anchor]
    return L[np.ix_(keep, keep)]


# --- simulation ----------------------------------------------------------------

_HEADINGS = np.array([0.0, 0.5 * math.pi, math.pi, -0.5 * math.pi])
_MOVES = np.array([[1, 0], [0, 1], [-1, 0], [0, -1]])


def _grid_walk(grid_size, steps, rng):
    pos = np.array([grid_size // 2, grid_size // 2])
    heading = int(rng.integers(4))
    out = []
    for _ in range(steps):
        out.append((float(pos[0]), float(pos[1]), float(wrap_angle(_HEADINGS[heading]))))
        for _attempt in range(8):
            r = rng.random()
            h = heading if r < 0.6 else (heading + (1 if r < 0.8 else 3)) % 4
            nxt = pos + _MOVES[h]
            if 0 <= nxt[0] < grid_size and 0 <= nxt[1] < grid_size:
                break
            heading = (heading + 2) % 4
        else:
            h, nxt = heading, pos + _MOVES[heading]
        heading, pos = h, nxt
    return np.array(out)


def generate_manhattan(grid_size=10, n_robots=5, steps_per_robot=100, odom_noise=DEFAULT_ODOM_NOISE,
                       loop_radius=1.0, p_distribution="uniform", seed=None, intra_loops=True):
    """Simulate robots on a square grid; return ``(pose_graph, exchange_graph)``.

    One grid walk is split into ``n_robots`` consecutive segments.  Within a
    segment consecutive poses are joined by noisy odometry; segment boundaries
    and intra-robot revisits become ``prior-loop`` edges, so the graph is
    connected before any rendezvous.  Every pair of poses of distinct robots
    within ``loop_radius`` (true positions) becomes a candidate with
    probability drawn uniformly from (0, 1].
    """
    if grid_size < 1 or n_robots < 2 or steps_per_robot < 1:
        raise PoseGraphError("grid_size, steps_per_robot must be positive and n_robots >= 2")
    if p_distribution != "uniform":
        raise PoseGraphError(f"unsupported probability distribution {p_distribution!r}")
    rng = np.random.default_rng(seed)
    sx, sy, st = odom_noise
    cov = np.diag([sx * sx, sy * sy, st * st])
    truth = _grid_walk(grid_size, n_robots * steps_per_robot, rng)
    N = len(truth)
    robots = [k // steps_per_robot for k in range(N)]

    def noisy(i, j):
        d = relative_pose(truth[i], truth[j])
        n = rng.normal(size=3) * np.array([sx, sy, st])
        return (float(d[0] + n[0]), float(d[1] + n[1]), float(wrap_angle(d[2] + n[2])))

    edges = []
    for k in range(N - 1):
        kind = ODOMETRY if robots[k] == robots[k + 1] else PRIOR_LOOP
        edges.append((k, k + 1, noisy(k, k + 1), cov, kind))

    r2 = loop_radius * loop_radius
    xy = truth[:, :2]
    cand = []
    for i in range(N):
        d2 = np.sum((xy[i + 1:] - xy[i]) ** 2, axis=1)
        for off in np.nonzero(d2 <= r2 + 1e-12)[0]:
            j = i + 1 + int(off)
            if loop_radius <= 0:
                continue
            if robots[i] != robots[j]:
                cand.append((i, j))
            elif intra_loops and j - i > 2 and d2[off] < 1e-12:
                edges.append((i, j, noisy(i, j), cov, PRIOR_LOOP))
    probs = 1.0 - rng.random(len(cand))
    for (i, j), p in zip(cand, probs):
        edges.append((i, j, (0.0, 0.0, 0.0), cov, CANDIDATE, float(p)))

    # start at the true first pose; the rest are dead-reckoned
    pg0 = make_posegraph(truth, edges, anchor=0, robots=robots)
    check_connected(pg0)
    pg = make_posegraph(odometry_estimate(pg0), pg0.edges, anchor=0, robots=robots)
    return pg, exchange_graph_from_posegraph(pg)


def random_posegraph_instance(n_robots=2, poses_per_robot=5, n_candidates=10, seed=None,
                              odom_noise=DEFAULT_ODOM_NOISE):
    """Small random instance: chained robot trajectories plus random inter-robot candidates.

    Every pose is an observation (exchange-graph vertex).
    """
    rng = np.random.default_rng(seed)
    N = n_robots * poses_per_robot
    robots = [k // poses_per_robot for k in range(N)]
    sx, sy, st = odom_noise
    cov = np.diag([sx * sx, sy * sy, st * st])
    poses = [np.zeros(3)]
    edges = []
    for k in range(1, N):
        step = np.array([rng.uniform(0.5, 1.5), rng.uniform(-0.3, 0.3), rng.uniform(-0.8, 0.8)])
        poses.append(compose(poses[-1], step))
        kind = ODOMETRY if robots[k] == robots[k - 1] else PRIOR_LOOP
        edges.append((k - 1, k, tuple(step), cov, kind))
    pairs = [(i, j) for i in range(N) for j in range(i + 1, N) if robots[i] != robots[j]]
    pick = rng.choice(len(pairs), size=min(n_candidates, len(pairs)), replace=False)
    for k in sorted(int(x) for x in pick):
        i, j = pairs[k]
        edges.append((i, j, (0.0, 0.0, 0.0), cov, CANDIDATE, float(1.0 - rng.random())))
    pg = make_posegraph(np.array(poses), edges, anchor=0, robots=robots)
    return pg, exchange_graph_from_posegraph(pg, all_poses=True)


def exchange_graph_from_posegraph(pg: PoseGraph2D, all_poses=False, weight=1.0) -> ExchangeGraph:
    """Exchange graph whose edges are the candidate edges of ``pg``.

    Vertices are the poses that own at least one candidate (or all poses),
    renumbered densely in pose order; edges carry ``pg_edge`` back-references.
    """
    cands = pg.candidate_edges()
    if all_poses:
        owners = list(range(pg.num_poses))
    else:
        owners = sorted({e.i for e in cands} | {e.j for e in cands})
    vid = {k: n for n, k in enumerate(owners)}
    verts = [(vid[k], pg.robot_of(k), weight) for k in owners]
    edges = [(vid[e.i], vid[e.j], e.p if e.p is not None else 1.0, e.id) for e in cands]
    n_robots = max(2, len(set(pg.robots)) if pg.robots else 2)
    return build_exchange_graph(verts, edges, n_robots)


# --- g2o subset -----------------------------------------------------------------

def _info_upper(cov):
    I = np.linalg.inv(cov)
    return [I[0, 0], I[0, 1], I[0, 2], I[1, 1], I[1, 2], I[2, 2]]


def _cov_from_upper(vals):
    a, b, c, d, e, f = vals
    info = np.array([[a, b, c], [b, d, e], [c, e, f]], dtype=float)
    try:
        np.linalg.cholesky(info)
    except np.linalg.LinAlgError:
        raise SingularCovariance("information matrix is not positive definite") from None
    cov = np.linalg.inv(info)
    return 0.5 * (cov + cov.T)


def _fmt(x):
    return repr(float(x))


def write_g2o(pg: PoseGraph2D) -> str:
    """Serialize to the g2o SE2 subset plus ``#``-prefixed extension records.

    Extensions: ``# ROBOT id r``, ``# KIND kind`` after EDGE_SE2 lines whose
    kind is not odometry, and ``# CANDIDATE i j p I11 I12 I13 I22 I23 I33``.
    Covariances are stored verbatim as ``# COV`` records so that the round
    trip is exact.
    """
    lines = []
    for k, (x, y, t) in enumerate(pg.poses):
        lines.append(f"VERTEX_SE2 {k} {_fmt(x)} {_fmt(y)} {_fmt(t)}")
    if pg.robots:
        for k, r in enumerate(pg.robots):
            lines.append(f"# ROBOT {k} {r}")
    lines.append(f"FIX {pg.anchor}")
    for e in pg.edges:
        info = " ".join(_fmt(v) for v in _info_upper(e.cov))
        if e.kind == CANDIDATE:
            lines.append(f"# CANDIDATE {e.i} {e.j} {_fmt(e.p if e.p is not None else 1.0)} {info}")
        else:
            dx, dy, dt = e.meas
            lines.append(f"EDGE_SE2 {e.i} {e.j} {_fmt(dx)} {_fmt(dy)} {_fmt(dt)} {info}")
            if e.kind != ODOMETRY:
                lines.append(f"# KIND {e.kind}")
        cov = e.cov
        lines.append("# COV " + " ".join(_fmt(cov[a, b]) for a, b in
                                         ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))))
    return "\n".join(lines) + "\n"


def parse_g2o(text: str) -> PoseGraph2D:
    poses = {}
    robots = {}
    edges = []
    anchor = None

    def floats(tok, n, lineno):
        if len(tok) != n:
            raise ParseError(f"expected {n} numeric fields, got {len(tok)}", lineno)
        try:
            return [float(t) for t in tok]
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        tok = raw.split()
        if not tok:
            continue
        tag = tok[0]
        try:
            if tag == "VERTEX_SE2":
                vals = floats(tok[1:], 4, lineno)
                poses[int(vals[0])] = vals[1:]
            elif tag == "EDGE_SE2":
                vals = floats(tok[1:], 11, lineno)
                edges.append([int(vals[0]), int(vals[1]), tuple(vals[2:5]),
                              _cov_from_upper(vals[5:11]), ODOMETRY, None])
            elif tag == "FIX":
                anchor = int(floats(tok[1:2], 1, lineno)[0])
            elif tag == "#" and len(tok) > 1:
                sub = tok[1]
                if sub == "ROBOT":
                    vals = floats(tok[2:], 2, lineno)
                    robots[int(vals[0])] = int(vals[1])
                elif sub == "CANDIDATE":
                    if len(tok) == 5:
                        vals = floats(tok[2:], 3, lineno)
                        cov = np.diag(np.square(DEFAULT_ODOM_NOISE))
                    else:
                        vals = floats(tok[2:], 9, lineno)
                        cov = _cov_from_upper(vals[3:9])
                    edges.append([int(vals[0]), int(vals[1]), (0.0, 0.0, 0.0), cov, CANDIDATE, vals[2]])
                elif sub == "KIND":
                    if not edges or len(tok) != 3 or tok[2] not in KINDS:
                        raise ParseError("KIND record must follow an edge and name a known kind", lineno)
                    edges[-1][4] = tok[2]
                elif sub == "COV":
                    if not edges:
                        raise ParseError("COV record must follow an edge", lineno)
                    a, b, c, d, e, f = floats(tok[2:], 6, lineno)
                    edges[-1][3] = np.array([[a, b, c], [b, d, e], [c, e, f]])
            elif tag.startswith("#"):
                continue
            else:
                log.warning("line %d: unsupported tag %s skipped", lineno, tag)
        except SingularCovariance as exc:
            raise ParseError(str(exc), lineno) from None
    if not poses:
        raise ParseError("no VERTEX_SE2 records")
    ids = sorted(poses)
    if ids != list(range(len(ids))):
        raise ParseError("pose ids must be contiguous from 0")
    arr = np.array([poses[k] for k in ids])
    rob = tuple(robots[k] for k in ids) if len(robots) == len(ids) else ()
    try:
        return make_posegraph(arr, [tuple(e) for e in edges], anchor=anchor if anchor is not None else 0,
                              robots=rob)
    except PoseGraphError as exc:
        raise ParseError(str(exc)) from None
