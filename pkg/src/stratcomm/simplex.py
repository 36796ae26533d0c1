"""Dense revised simplex for small equality-form LPs, with Bland's anti-cycling rule.

    minimize c @ x  subject to  A @ x == b,  x >= 0

Rows are few (a handful) and columns many, so the basis inverse is recomputed by a
dense solve on every pivot. That keeps round-off from accumulating and the returned
point is an exact vertex: at most ``m`` positive entries.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class LPError(RuntimeError):
    pass


class Infeasible(LPError):
    pass


class Unbounded(LPError):
    pass


class IterationLimit(LPError):
    pass


@dataclass(frozen=True)
class LPResult:
    x: np.ndarray
    value: float
    basis: tuple[int, ...]
    duals: np.ndarray
    iterations: int


def _iterate(A, b, c, basis, max_iter, tol, it0=0):
    """Bland-rule phase on the columns of ``A`` starting from a feasible ``basis``."""
    m, n = A.shape
    basis = list(basis)
    it = it0
    while True:
        B = A[:, basis]
        x_b = np.linalg.solve(B, b)
        y = np.linalg.solve(B.T, c[basis])
        reduced = c - y @ A
        reduced[basis] = 0.0
        candidates = np.flatnonzero(reduced < -tol)
        if candidates.size == 0:
            return basis, x_b, y, it
        if it >= max_iter:
            raise IterationLimit(f"simplex did not converge within {max_iter} pivots")
        j = int(candidates[0])                             # smallest entering index
        d = np.linalg.solve(B, A[:, j])
        rows = np.flatnonzero(d > tol)
        if rows.size == 0:
            raise Unbounded("objective is unbounded below")
        ratios = np.maximum(x_b[rows], 0.0) / d[rows]
        best = ratios.min()
        tied = rows[ratios <= best + tol * max(1.0, best)]
        leave = min(tied, key=lambda r: basis[r])          # smallest leaving variable index
        basis[leave] = j
        it += 1


def linprog_equality(c, A, b, *, basis=None, tol: float = 1e-11, feas_tol: float = 1e-9,
                     max_iter: int = 50_000) -> LPResult:
    """Solve the standard-form LP. ``basis`` optionally supplies a known feasible starting basis."""
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    c = np.array(c, dtype=float)
    m, n = A.shape
    it = 0

    if basis is not None:
        basis = list(basis)
        x_b = np.linalg.solve(A[:, basis], b)
        if np.any(x_b < -feas_tol):
            raise ValueError("supplied basis is not primal feasible")
        flip = np.zeros(m, dtype=bool)
    else:
        flip = b < 0
        A[flip] *= -1
        b[flip] *= -1
        # phase one: artificial identity block, minimize the sum of artificials
        A1 = np.hstack([A, np.eye(m)])
        c1 = np.concatenate([np.zeros(n), np.ones(m)])
        basis, x_b, _, it = _iterate(A1, b, c1, list(range(n, n + m)), max_iter, tol)
        if c1[basis] @ x_b > feas_tol:
            raise Infeasible("no feasible point")
        # pivot remaining (zero-level) artificials out; drop redundant rows
        keep_rows = list(range(m))
        for r in range(m):
            if basis[r] < n:
                continue
            B = A1[:, basis]
            row = np.linalg.solve(B.T, np.eye(m)[r])       # r-th row of B^-1
            alpha = row @ A
            alpha[[k for k in basis if k < n]] = 0.0
            j = np.flatnonzero(np.abs(alpha) > 1e-9)
            if j.size:
                basis[r] = int(j[0])
            else:
                keep_rows.remove(r)
        if len(keep_rows) < m:
            A, b = A[keep_rows], b[keep_rows]
            basis = [basis[r] for r in keep_rows]
            flip = flip[keep_rows]

    basis, x_b, y, it = _iterate(A, b, c, basis, max_iter, tol, it)
    y = np.where(flip, -y, y)
    x = np.zeros(n)
    x[basis] = np.maximum(x_b, 0.0)
    return LPResult(x, float(c @ x), tuple(basis), y, it)
