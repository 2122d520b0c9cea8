"""A posteriori optimality certificates.

* ``oracle``: exhaustive search over budget-feasible observation sets (tiny instances).
* ``lp``: LP relaxation bound for the NLC objective.
* ``frank-wolfe``: certified bound for the concave log-det relaxation of FIM/WST.

All bounds are over the relaxed feasible set
``{(pi, l) in [0,1]^m x [0,1]^|L| : w.pi <= b, A^T pi >= l}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import Infeasible, InstanceTooLarge, IterationLimit
from .graph import ExchangeGraph, edges_of
from .objectives import LogDetObjective, NLCObjective, Objective

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass
class LPProblem:
    """maximize ``c @ x`` s.t. ``A_ub @ x <= b_ub``, ``lo <= x <= hi`` (finite bounds)."""
    c: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray
    lo: np.ndarray
    hi: np.ndarray


@dataclass
class LPSolution:
    x: np.ndarray
    value: float
    status: str
    iterations: int = 0


@dataclass
class Certificate:
    upper_bound: float
    method: str
    achieved: Optional[float] = None
    iterations: int = 0

    @property
    def ratio(self) -> Optional[float]:
        if self.achieved is None:
            return None
        if self.upper_bound <= 0.0:
            return 1.0
        return self.achieved / self.upper_bound

    def to_dict(self) -> dict:
        return {
            "upper_bound": self.upper_bound,
            "method": self.method,
            "achieved": self.achieved,
            "ratio": self.ratio,
        }


# --- dense two-phase simplex ---------------------------------------------------------

def _pivot(T, r, c):
    T[r] /= T[r, c]
    col = T[:, c].copy()
    col[r] = 0.0
    rows = np.nonzero(col)[0]
    T[rows] -= np.outer(col[rows], T[r])


def _run_simplex(T, basis, ncols, tol, max_iter):
    """Maximize the objective stored in the last row of tableau ``T`` (row holds -c).

    Dantzig's rule, switching to Bland's rule after a run of degenerate pivots.
    """
    m = T.shape[0] - 1
    degenerate = 0
    it = 0
    while True:
        obj = T[-1, :ncols]
        if degenerate > 50:
            cands = np.nonzero(obj < -tol)[0]
            if not len(cands):
                return it
            c = int(cands[0])
        else:
            c = int(np.argmin(obj))
            if obj[c] >= -tol:
                return it
        colv = T[:m, c]
        mask = colv > tol
        if not mask.any():
            raise _Unbounded()
        ratios = np.full(m, np.inf)
        ratios[mask] = T[:m, -1][mask] / colv[mask]
        rmin = ratios.min()
        ties = np.nonzero(ratios <= rmin + tol * (1.0 + abs(rmin)))[0]
        r = int(min(ties, key=lambda i: basis[i]))
        degenerate = degenerate + 1 if rmin <= tol else 0
        _pivot(T, r, c)
        basis[r] = c
        it += 1
        if it > max_iter:
            raise IterationLimit(f"simplex exceeded {max_iter} pivots")


class _Unbounded(Exception):
    pass


def simplex_solve(p: LPProblem, tol: float = 1e-10, max_iter: int = 50000) -> LPSolution:
    """Solve a box-bounded LP with a dense two-phase tableau simplex.

    Variables are shifted to ``y = x - lo`` and upper bounds become rows.
    Rows with a negative right-hand side get an artificial variable that
    phase one drives to zero.
    """
    c = np.asarray(p.c, dtype=float)
    n = len(c)
    lo = np.asarray(p.lo, dtype=float)
    hi = np.asarray(p.hi, dtype=float)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("simplex_solve needs finite bounds on every variable")
    if np.any(hi < lo - tol):
        raise Infeasible("a variable has hi < lo")
    A = np.asarray(p.A_ub, dtype=float).reshape(-1, n)
    b = np.asarray(p.b_ub, dtype=float) - A @ lo
    A = np.vstack([A, np.eye(n)])
    b = np.concatenate([b, hi - lo])
    m = len(b)

    neg = b < 0
    n_art = int(neg.sum())
    ncols = n + m + n_art
    T = np.zeros((m + 1, ncols + 1))
    sign = np.where(neg, -1.0, 1.0)
    T[:m, :n] = A * sign[:, None]
    T[:m, n:n + m] = np.diag(sign)
    T[:m, -1] = b * sign
    basis = np.arange(n, n + m)
    art_rows = np.nonzero(neg)[0]
    for k, r in enumerate(art_rows):
        T[r, n + m + k] = 1.0
        basis[r] = n + m + k
    iters = 0
    if n_art:
        # phase one: maximize -sum(artificials)
        T[-1, :] = 0.0
        T[-1, n + m:ncols] = 1.0
        for r in art_rows:
            T[-1] -= T[r]
        try:
            iters += _run_simplex(T, basis, ncols, tol, max_iter)
        except _Unbounded:  # cannot happen in phase one
            raise IterationLimit("phase one reported unboundedness") from None
        if -T[-1, -1] > 1e-8 * (1.0 + np.abs(b).max()):
            return LPSolution(np.full(n, np.nan), float("nan"), INFEASIBLE, iters)
        # drive remaining zero-level artificials out of the basis
        for r in range(m):
            if basis[r] >= n + m:
                row = T[r, :n + m]
                nz = np.nonzero(np.abs(row) > 1e-9)[0]
                if len(nz):
                    _pivot(T, r, int(nz[0]))
                    basis[r] = int(nz[0])
        T = np.delete(T, np.s_[n + m:ncols], axis=1)
        ncols = n + m
    T[-1, :] = 0.0
    T[-1, :n] = -c
    for r in range(m):
        if basis[r] < ncols:
            T[-1] -= T[-1, basis[r]] * T[r]
    try:
        iters += _run_simplex(T, basis, ncols, tol, max_iter)
    except _Unbounded:
        return LPSolution(np.full(n, np.nan), float("inf"), UNBOUNDED, iters)
    y = np.zeros(ncols)
    for r in range(m):
        if basis[r] < ncols:
            y[basis[r]] = T[r, -1]
    x = np.clip(lo + y[:n], lo, hi)
    return LPSolution(x, float(c @ x), OPTIMAL, iters)


# --- relaxed feasible set -------------------------------------------------------------

def relaxation_lp(g: ExchangeGraph, b: float, edge_obj) -> LPProblem:
    """LP over (pi, l): maximize ``edge_obj @ l`` with ``w.pi <= b`` and ``l_e <= pi_u + pi_v``."""
    m, k = g.m, len(g.edges)
    A = np.zeros((1 + k, m + k))
    A[0, :m] = g.weights
    for e in g.edges:
        A[1 + e.id, m + e.id] = 1.0
        A[1 + e.id, e.u] = -1.0
        A[1 + e.id, e.v] = -1.0
    rhs = np.zeros(1 + k)
    rhs[0] = b
    c = np.concatenate([np.zeros(m), np.asarray(edge_obj, dtype=float)])
    return LPProblem(c, A, rhs, np.zeros(m + k), np.ones(m + k))


def in_relaxation(g: ExchangeGraph, b: float, pi, ell, tol=1e-9) -> bool:
    pi = np.asarray(pi, dtype=float)
    ell = np.asarray(ell, dtype=float)
    if np.any(pi < -tol) or np.any(pi > 1 + tol) or np.any(ell < -tol) or np.any(ell > 1 + tol):
        return False
    if g.weights @ pi > b + tol:
        return False
    return all(ell[e.id] <= pi[e.u] + pi[e.v] + tol for e in g.edges)


def plan_indicators(g: ExchangeGraph, vertices, edges):
    pi = np.zeros(g.m)
    pi[list(vertices)] = 1.0
    ell = np.zeros(len(g.edges))
    ell[list(edges)] = 1.0
    return pi, ell


# --- certificates ---------------------------------------------------------------------

def oracle_opt(g: ExchangeGraph, objective: Objective, b: float, max_vertices: int = 20,
               achieved: Optional[float] = None) -> Certificate:
    """Exact optimum over budget-feasible observation sets by exhaustive search.

    Isolated vertices are ignored and only maximal feasible sets are scored,
    which is exact because the lifted objective is monotone.
    """
    if g.m > max_vertices:
        raise InstanceTooLarge(f"oracle capped at {max_vertices} vertices, instance has {g.m}")
    w = g.weights
    useful = [v for v in range(g.m) if g.degree(v) > 0 and w[v] <= b + 1e-9]
    best = 0.0
    cache = {}

    def rec(start, chosen, cost):
        nonlocal best
        extended = False
        for k in range(start, len(useful)):
            v = useful[k]
            if cost + w[v] <= b + 1e-9:
                extended = True
                chosen.append(v)
                rec(k + 1, chosen, cost + w[v])
                chosen.pop()
        if not extended:
            # maximal unless an earlier skipped vertex still fits
            for v in useful:
                if v not in chosen and cost + w[v] <= b + 1e-9:
                    return
            E = edges_of(g, chosen)
            if E not in cache:
                cache[E] = objective.value(E)
            best = max(best, cache[E])

    rec(0, [], 0.0)
    return Certificate(best, "oracle", achieved)


def nlc_upper_bound(g: ExchangeGraph, b: float, achieved: Optional[float] = None) -> Certificate:
    if not g.edges:
        return Certificate(0.0, "lp", achieved)
    sol = simplex_solve(relaxation_lp(g, b, g.probabilities))
    if sol.status != OPTIMAL:
        raise Infeasible(f"NLC relaxation status {sol.status}")
    return Certificate(sol.value, "lp", achieved, sol.iterations)


def smooth_upper_bound(g: ExchangeGraph, objective: LogDetObjective, b: float, iters: int = 200,
                       achieved: Optional[float] = None, tol: float = 1e-9) -> Certificate:
    """Frank-Wolfe on the concave relaxation ``h(l)``; returns the best certified bound.

    At each iterate ``x`` the linear maximization ``s = argmax grad.s`` over the
    relaxed set gives ``h(x) + grad.(s - x) >= max h >= OPT``.
    """
    m, k = g.m, len(g.edges)
    if k == 0:
        return Certificate(0.0, "frank-wolfe", achieved)
    lp = relaxation_lp(g, b, np.zeros(k))
    x = np.zeros(m + k)
    bound = np.inf
    t = 0
    for t in range(iters):
        val, grad = objective.relaxed_value_and_grad(x[m:])
        lp.c = np.concatenate([np.zeros(m), grad])
        sol = simplex_solve(lp)
        if sol.status != OPTIMAL:
            raise Infeasible(f"Frank-Wolfe subproblem status {sol.status}")
        s = sol.x
        gap = float(grad @ (s[m:] - x[m:]))
        bound = min(bound, val + max(gap, 0.0))
        if gap <= tol * (1.0 + abs(val)):
            break
        x = x + 2.0 / (t + 2.0) * (s - x)
    return Certificate(float(bound), "frank-wolfe", achieved, t + 1)


def certify(g: ExchangeGraph, objective: Objective, b: float, method: str = "lp",
            achieved: Optional[float] = None, iters: int = 200) -> Certificate:
    if method == "oracle":
        return oracle_opt(g, objective, b, achieved=achieved)
    if method == "lp":
        if not isinstance(objective, NLCObjective):
            raise ValueError("the LP bound applies to the nlc objective; use 'fw' for wst/fim")
        return nlc_upper_bound(g, b, achieved=achieved)
    if method in ("fw", "frank-wolfe"):
        if not isinstance(objective, LogDetObjective):
            raise ValueError("the Frank-Wolfe bound applies to wst/fim; use 'lp' for nlc")
        return smooth_upper_bound(g, objective, b, iters=iters, achieved=achieved)
    raise ValueError(f"unknown certificate method {method!r}")
