"""Edge objectives, the vertex lift and incremental marginal gains.

All three objectives are normalized, monotone and submodular over edge sets:

* ``nlc``: expected number of true loop closures, sum of p(e).
* ``fim``: log-det gain of the Fisher information with each candidate's
  information scaled by p(e).
* ``wst``: 2 log t_wp + log t_wtheta, expected weighted spanning-tree counts
  of the translational and rotational pose graphs (each candidate weight
  scaled by p(e)), relative to the graph before the rendezvous.

FIM and WST share one evaluator: a weighted sum of log-det "channels", each
with a base SPD matrix and a low-rank factor per exchange edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import BudgexError, FactorizationFailure
from .graph import ExchangeGraph, edges_of
from .posegraph import (
    PoseGraph2D,
    check_connected,
    information_matrix,
    initial_information,
    odometry_estimate,
    reduced_laplacian,
)

KINDS = ("nlc", "wst", "fim")


def _chol_logdet(M):
    try:
        c, _ = cho_factor(M, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        raise FactorizationFailure("matrix is not positive definite") from None
    return 2.0 * float(np.sum(np.log(np.diag(c))))


def _spd_inverse(M):
    try:
        c = cho_factor(M, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        raise FactorizationFailure("matrix is not positive definite") from None
    inv = cho_solve(c, np.eye(len(M)), check_finite=False)
    return 0.5 * (inv + inv.T)


class Objective:
    """An edge objective bound to one exchange graph."""

    kind = ""

    def __init__(self, graph: ExchangeGraph):
        self.graph = graph

    def value(self, E: Iterable[int]) -> float:
        raise NotImplementedError

    def f_v(self, V: Iterable[int]) -> float:
        return self.value(edges_of(self.graph, V))

    def full_value(self) -> float:
        """Value of selecting every candidate (the normalization denominator)."""
        return self.value(self.graph.all_edges())

    def new_state(self) -> "EvalState":
        raise NotImplementedError


class NLCObjective(Objective):
    kind = "nlc"

    def __init__(self, graph: ExchangeGraph):
        super().__init__(graph)
        self.p = graph.probabilities

    def value(self, E):
        E = self.graph.check_edges(E)
        return float(sum(self.p[e] for e in E)) if E else 0.0

    def new_state(self):
        return NLCState(self)


@dataclass
class Channel:
    """One log-det term: ``weight * [logdet(base + sum U_e U_e^T) - logdet(base)]``.

    ``contrib[e]`` is ``(idx, U)`` with ``U`` of shape ``(len(idx), r)``;
    scaling by p(e) is already folded into ``U``.
    """
    weight: float
    base: np.ndarray
    contrib: list

    def __post_init__(self):
        self.base_inv = _spd_inverse(self.base)
        self.base_logdet = _chol_logdet(self.base)

    def stack(self, E: Sequence[int]):
        """Union row index ``J`` and stacked factor with ``U_all.T @ M[J,J] @ U_all`` = Gram."""
        parts = [self.contrib[e] for e in E]
        parts = [(idx, U) for idx, U in parts if len(idx)]
        if not parts:
            return np.zeros(0, dtype=int), np.zeros((0, 0))
        J = np.unique(np.concatenate([idx for idx, _ in parts]))
        pos = {int(k): n for n, k in enumerate(J)}
        ncols = sum(U.shape[1] for _, U in parts)
        Ut = np.zeros((len(J), ncols))
        col = 0
        for idx, U in parts:
            rows = [pos[int(k)] for k in idx]
            Ut[rows, col:col + U.shape[1]] = U
            col += U.shape[1]
        return J, Ut

    def gain(self, Minv, E):
        """log det(I + U^T Minv U) for the stacked factor of ``E``."""
        J, Ut = self.stack(E)
        if Ut.size == 0:
            return 0.0
        K = Ut.T @ Minv[np.ix_(J, J)] @ Ut
        return _chol_logdet(np.eye(len(K)) + 0.5 * (K + K.T))

    def matrix(self, E, scale=None):
        """Dense ``base + sum_e s_e U_e U_e^T``."""
        M = self.base.copy()
        for k, e in enumerate(E):
            idx, U = self.contrib[e]
            if len(idx):
                s = 1.0 if scale is None else scale[k]
                M[np.ix_(idx, idx)] += s * (U @ U.T)
        return M


class LogDetObjective(Objective):
    """Weighted sum of log-det channels (FIM uses one, WST uses two)."""

    def __init__(self, graph: ExchangeGraph, channels: list, kind="fim"):
        super().__init__(graph)
        self.channels = channels
        self.kind = kind

    @classmethod
    def from_matrices(cls, graph, base, infos, kind="fim"):
        """FIM-style objective from a dense base and per-edge PSD contributions.

        ``infos[e]`` is a dense ``d x d`` PSD matrix or an ``(idx, factor)`` pair.
        Each contribution is scaled by the edge probability.
        """
        base = np.asarray(base, dtype=float)
        contrib = []
        for e, info in zip(graph.edges, infos):
            if isinstance(info, tuple):
                idx, F = info
                idx = np.asarray(idx, dtype=int)
            else:
                info = np.asarray(info, dtype=float)
                idx = np.nonzero(np.any(info != 0, axis=0))[0]
                sub = info[np.ix_(idx, idx)]
                w, V = np.linalg.eigh(0.5 * (sub + sub.T))
                keep = w > 1e-12 * max(1.0, float(w.max(initial=0.0)))
                F = V[:, keep] * np.sqrt(w[keep])
            contrib.append((idx, math.sqrt(e.p) * np.asarray(F, dtype=float)))
        return cls(graph, [Channel(1.0, base, contrib)], kind)

    def value(self, E):
        E = self.graph.check_edges(E)
        if not E:
            return 0.0
        return float(sum(ch.weight * ch.gain(ch.base_inv, E) for ch in self.channels))

    def value_dense(self, E):
        """Reference evaluation by factorizing the full matrices."""
        E = self.graph.check_edges(E)
        total = 0.0
        for ch in self.channels:
            total += ch.weight * (_chol_logdet(ch.matrix(E)) - ch.base_logdet)
        return total

    def relaxed_value_and_grad(self, ell):
        """Concave relaxation h(l) with candidate e scaled by l_e in [0, 1], and its gradient."""
        ell = np.asarray(ell, dtype=float)
        E = list(range(len(self.graph.edges)))
        val = 0.0
        grad = np.zeros(len(E))
        for ch in self.channels:
            M = ch.matrix(E, scale=ell)
            val += ch.weight * (_chol_logdet(M) - ch.base_logdet)
            Minv = _spd_inverse(M)
            for e in E:
                idx, U = ch.contrib[e]
                if len(idx):
                    grad[e] += ch.weight * float(np.sum(U * (Minv[np.ix_(idx, idx)] @ U)))
        return val, grad

    def new_state(self):
        return LogDetState(self)


def fim_objective(graph: ExchangeGraph, pg: PoseGraph2D, ridge=1e-6) -> LogDetObjective:
    """D-criterion gain, linearized at the dead-reckoned estimate."""
    est = odometry_estimate(pg)
    base = initial_information(pg, est, ridge=ridge)
    contrib = []
    for e in graph.edges:
        _require_mapped(e, pg)
        info = information_matrix(pg, e.pg_edge, est)
        contrib.append((info.idx, math.sqrt(e.p) * info.factor))
    return LogDetObjective(graph, [Channel(1.0, base, contrib)], "fim")


def wst_objective(graph: ExchangeGraph, pg: PoseGraph2D) -> LogDetObjective:
    """Tree-connectivity gain: 2 log E[t_wp] + log E[t_wtheta] relative to the pre-rendezvous graph."""
    check_connected(pg)
    init = pg.init_edges()
    wp = {e.id: e.precisions[0] for e in init}
    wt = {e.id: e.precisions[1] for e in init}
    channels = []
    for weight, which, wmap in ((2.0, 0, wp), (1.0, 1, wt)):
        base = reduced_laplacian(pg, wmap)
        contrib = []
        for e in graph.edges:
            _require_mapped(e, pg)
            pe = pg.edges[e.pg_edge]
            s = math.sqrt(e.p * pe.precisions[which])
            idx, col = [], []
            for k, sign in ((pe.i, 1.0), (pe.j, -1.0)):
                r = pg.reduced_index(k)
                if r >= 0:
                    idx.append(r)
                    col.append(sign * s)
            contrib.append((np.array(idx, dtype=int), np.array(col).reshape(-1, 1)))
        channels.append(Channel(weight, base, contrib))
    return LogDetObjective(graph, channels, "wst")


def _require_mapped(e, pg):
    if e.pg_edge is None or not 0 <= e.pg_edge < len(pg.edges):
        raise BudgexError(f"exchange edge {e.id} is not mapped to a pose-graph edge")


def make_objective(kind: str, graph: ExchangeGraph, pg: Optional[PoseGraph2D] = None) -> Objective:
    kind = kind.lower()
    if kind == "nlc":
        return NLCObjective(graph)
    if kind not in ("wst", "fim"):
        raise ValueError(f"unknown objective {kind!r}; expected one of {KINDS}")
    if pg is None:
        raise BudgexError(f"objective {kind} needs a pose graph")
    return wst_objective(graph, pg) if kind == "wst" else fim_objective(graph, pg)


ObjectiveSpec = Objective


def f_nlc(objective: Objective, E) -> float:
    return objective.value(E)


def f_fim(objective: Objective, E) -> float:
    return objective.value(E)


def f_wst(objective: Objective, E) -> float:
    return objective.value(E)


def f_v(objective: Objective, g: ExchangeGraph, V) -> float:
    return objective.value(edges_of(g, V))


# --- incremental evaluation ------------------------------------------------------

class EvalState:
    """Current selection plus cached data for fast marginal gains.

    ``marginal_gain`` is read-only and safe to call from several threads on
    the same state; ``commit`` must not run concurrently with anything else.
    """

    def __init__(self, objective: Objective):
        self.objective = objective
        self.graph = objective.graph
        self.selected: list = []
        self.covered: set = set()
        self.value = 0.0
        self.evaluations = 0

    def new_edges(self, v: int) -> list:
        return [e for e in self.graph.incident[v] if e not in self.covered]

    def marginal_gain(self, v: int) -> float:
        self.evaluations += 1
        return self.gain_edges(self.new_edges(v))

    def commit(self, v: int) -> float:
        gain = self.commit_edges(self.new_edges(v))
        self.selected.append(int(v))
        return gain

    def commit_edges(self, E) -> float:
        E = [e for e in E if e not in self.covered]
        gain = self._apply(E)
        self.covered.update(E)
        self.value += gain
        return gain

    def gain_edges(self, E) -> float:
        raise NotImplementedError

    def _apply(self, E) -> float:
        raise NotImplementedError

    def copy(self) -> "EvalState":
        raise NotImplementedError


class NLCState(EvalState):
    def gain_edges(self, E):
        p = self.objective.p
        return float(sum(p[e] for e in E if e not in self.covered))

    def _apply(self, E):
        return self.gain_edges(E)

    def copy(self):
        s = NLCState(self.objective)
        s.selected = list(self.selected)
        s.covered = set(self.covered)
        s.value = self.value
        return s


class LogDetState(EvalState):
    """Keeps the inverse of every channel matrix, updated by Woodbury on commit."""

    def __init__(self, objective: LogDetObjective, _inv=None):
        super().__init__(objective)
        self.inv = _inv if _inv is not None else [ch.base_inv.copy() for ch in objective.channels]

    def gain_edges(self, E):
        E = [e for e in E if e not in self.covered]
        if not E:
            return 0.0
        total = 0.0
        for ch, Minv in zip(self.objective.channels, self.inv):
            try:
                total += ch.weight * ch.gain(Minv, E)
            except FactorizationFailure:
                total += ch.weight * ch.gain(self._fresh_inverse(ch), E)
        return total

    def _fresh_inverse(self, ch):
        return _spd_inverse(ch.matrix(sorted(self.covered)))

    def _apply(self, E):
        if not E:
            return 0.0
        total = 0.0
        for n, ch in enumerate(self.objective.channels):
            J, Ut = ch.stack(E)
            if Ut.size == 0:
                continue
            Minv = self.inv[n]
            for attempt in range(2):
                W = Minv[:, J] @ Ut                      # d x r
                S = np.eye(Ut.shape[1]) + Ut.T @ W[J, :]
                S = 0.5 * (S + S.T)
                try:
                    c = cho_factor(S, lower=True, check_finite=False)
                    break
                except np.linalg.LinAlgError:
                    if attempt:
                        raise FactorizationFailure("rank update lost positive definiteness") from None
                    Minv = self._fresh_inverse(ch)
            total += ch.weight * 2.0 * float(np.sum(np.log(np.diag(c[0]))))
            Minv = Minv - W @ cho_solve(c, W.T, check_finite=False)
            self.inv[n] = 0.5 * (Minv + Minv.T)
        return total

    def refresh(self):
        """Recompute every cached inverse from scratch."""
        self.inv = [self._fresh_inverse(ch) for ch in self.objective.channels]

    def copy(self):
        s = LogDetState(self.objective, _inv=[m.copy() for m in self.inv])
        s.selected = list(self.selected)
        s.covered = set(self.covered)
        s.value = self.value
        return s


def marginal_gain(state: EvalState, v: int) -> float:
    return state.marginal_gain(v)


def commit(state: EvalState, v: int) -> float:
    return state.commit(v)
