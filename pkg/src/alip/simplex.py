"""Dense two-phase tableau simplex with Bland's anti-cycling rule.

Solves ``min c.x  s.t.  A x <= b,  x >= 0``. Sized for the small refinement
programs of the pipeline; nothing here is sparse-aware.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass
class LPResult:
    x: np.ndarray | None
    fun: float
    status: str
    nit: int


def _pivot(T, row, col):
    T[row] /= T[row, col]
    factor = T[:, col].copy()
    factor[row] = 0.0
    T -= np.outer(factor, T[row])


def _iterate(T, basis, cost, allowed, tol, max_iter):
    m = T.shape[0]
    nit = 0
    while nit < max_iter:
        reduced = cost - cost[basis] @ T[:, :-1]
        entering = np.flatnonzero((reduced < -tol) & allowed)
        if entering.size == 0:
            return OPTIMAL, nit
        col = entering[0]
        column = T[:, col]
        positive = column > tol
        if not positive.any():
            return UNBOUNDED, nit
        ratios = np.full(m, np.inf)
        ratios[positive] = T[positive, -1] / column[positive]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + tol * max(1.0, abs(best)))
        row = min(ties, key=lambda i: basis[i])
        _pivot(T, row, col)
        basis[row] = col
        nit += 1
    raise RuntimeError("simplex iteration limit reached")


def simplex(c, A_ub, b_ub, tol: float = 1e-9, max_iter: int = 10_000) -> LPResult:
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A_ub, dtype=float))
    b = np.asarray(b_ub, dtype=float)
    m, n = A.shape
    neg = np.flatnonzero(b < 0)
    k = neg.size
    width = n + m + k

    T = np.zeros((m, width + 1))
    T[:, :n] = A
    T[:, n : n + m] = np.eye(m)
    T[:, -1] = b
    T[neg] *= -1.0
    basis = np.arange(n, n + m)
    for a, i in enumerate(neg):
        T[i, n + m + a] = 1.0
        basis[i] = n + m + a

    scale = max(1.0, float(np.abs(b).max(initial=0.0)))
    nit = 0
    if k:
        cost1 = np.zeros(width)
        cost1[n + m :] = 1.0
        status, it = _iterate(T, basis, cost1, np.ones(width, dtype=bool), tol, max_iter)
        nit += it
        if cost1[basis] @ T[:, -1] > tol * scale:
            return LPResult(None, np.inf, INFEASIBLE, nit)
        # drive remaining (zero-valued) artificials out of the basis
        keep = np.ones(m, dtype=bool)
        for i in range(m):
            if basis[i] >= n + m:
                cand = np.flatnonzero(np.abs(T[i, : n + m]) > tol)
                if cand.size:
                    _pivot(T, i, cand[0])
                    basis[i] = cand[0]
                else:
                    keep[i] = False
        T = T[keep]
        basis = basis[keep]

    cost2 = np.zeros(width)
    cost2[:n] = c
    allowed = np.zeros(width, dtype=bool)
    allowed[: n + m] = True
    status, it = _iterate(T, basis, cost2, allowed, tol, max_iter)
    nit += it
    if status != OPTIMAL:
        return LPResult(None, -np.inf, status, nit)
    x = np.zeros(width)
    x[basis] = T[:, -1]
    x = x[:n]
    x[(x < 0) & (x > -tol * scale)] = 0.0
    return LPResult(x, float(c @ x), OPTIMAL, nit)
