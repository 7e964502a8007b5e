"""Small dense linear programs: two-phase tableau simplex with Bland's rule."""

from __future__ import annotations

import numpy as np

TOL = 1e-8


class InfeasibleError(Exception):
    pass


class UnboundedError(Exception):
    pass


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    for i in range(T.shape[0]):
        if i != row and T[i, col] != 0.0:
            T[i] -= T[i, col] * T[row]


def _run(T: np.ndarray, basis: list[int], ncand: int, tol: float) -> None:
    """Maximize the objective held in the last row (stored as -reduced costs)."""
    m = len(basis)
    while True:
        obj = T[-1, :ncand]
        entering = next((j for j in range(ncand) if obj[j] < -tol), None)
        if entering is None:
            return
        col = T[:m, entering]
        best, leave = None, None
        for i in range(m):
            if col[i] > tol:
                ratio = T[i, -1] / col[i]
                if (best is None or ratio < best - tol
                        or (abs(ratio - best) <= tol and basis[i] < basis[leave])):
                    best, leave = ratio, i
        if leave is None:
            raise UnboundedError("objective unbounded")
        _pivot(T, leave, entering)
        basis[leave] = entering


def maximize(c, a_eq=None, b_eq=None, a_ub=None, b_ub=None, tol: float = TOL):
    """max c.x subject to a_eq x = b_eq, a_ub x <= b_ub, x >= 0.

    Returns ``(x, value)``.
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    rows, rhs = [], []
    n_slack = 0 if a_ub is None else len(b_ub)
    if a_ub is not None:
        for k, (r, b) in enumerate(zip(np.atleast_2d(a_ub), b_ub)):
            row = np.zeros(n + n_slack)
            row[:n] = r
            row[n + k] = 1.0
            rows.append(row)
            rhs.append(float(b))
    if a_eq is not None:
        for r, b in zip(np.atleast_2d(a_eq), b_eq):
            row = np.zeros(n + n_slack)
            row[:n] = r
            rows.append(row)
            rhs.append(float(b))
    m = len(rows)
    nv = n + n_slack
    A = np.array(rows).reshape(m, nv)
    b = np.array(rhs)
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1

    # phase 1: artificial variables on every row
    T = np.zeros((m + 1, nv + m + 1))
    T[:m, :nv] = A
    T[:m, nv:nv + m] = np.eye(m)
    T[:m, -1] = b
    basis = list(range(nv, nv + m))
    T[-1, :] = -T[:m, :].sum(axis=0)
    T[-1, nv:nv + m] = 0.0
    _run(T, basis, nv + m, tol)
    if T[-1, -1] < -tol * max(1.0, np.abs(b).max(initial=0.0)):
        raise InfeasibleError("no feasible point")
    # drive remaining artificials out of the basis
    for i in range(m):
        if basis[i] >= nv:
            cand = next((j for j in range(nv) if abs(T[i, j]) > tol), None)
            if cand is not None:
                _pivot(T, i, cand)
                basis[i] = cand
    keep = [i for i in range(m) if basis[i] < nv]
    T2 = np.zeros((len(keep) + 1, nv + 1))
    T2[:-1, :nv] = T[keep, :nv]
    T2[:-1, -1] = T[keep, -1]
    basis = [basis[i] for i in keep]
    cost = np.zeros(nv)
    cost[:n] = c
    T2[-1, :nv] = -cost
    for i, j in enumerate(basis):
        T2[-1] += cost[j] * T2[i]
    _run(T2, basis, nv, tol)
    x = np.zeros(nv)
    for i, j in enumerate(basis):
        x[j] = T2[i, -1]
    x = np.where(np.abs(x) < tol, 0.0, x)
    return x[:n], float(c @ x[:n])
