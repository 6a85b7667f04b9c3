"""Dense phase-one simplex for feasibility of ``A x = b, x >= 0``.

Bland's rule is used for both entering and leaving variables, so the
method terminates on degenerate problems.  When the system is infeasible
the final tableau yields a Farkas vector ``y`` with ``A^T y <= 0`` and
``b^T y > 0``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    x: np.ndarray  # best point found (exact solution when feasible)
    residual: float  # max |A x - b|
    objective: float  # phase-one optimum: sum of artificial variables
    farkas: np.ndarray | None  # certificate of infeasibility
    margin: float  # b^T y for the normalised certificate (0 when feasible)
    iterations: int


def phase_one(A, b, tol: float = 1e-9, pivot_tol: float = 1e-12, max_iter: int = 100_000):
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float).reshape(-1)
    m, n = A.shape
    flip = np.where(b < 0, -1.0, 1.0)
    A_ = A * flip[:, None]
    b_ = b * flip

    # tableau: [A | I | b] with the phase-one cost row underneath
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A_
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b_
    T[m, :n] = -A_.sum(axis=0)
    T[m, -1] = -b_.sum()
    basis = list(range(n, n + m))

    it = 0
    while it < max_iter:
        cost = T[m, :-1]
        entering = next((j for j in range(n + m) if cost[j] < -pivot_tol), None)
        if entering is None:
            break
        col = T[:m, entering]
        rows = [i for i in range(m) if col[i] > pivot_tol]
        if not rows:  # unbounded direction; cannot happen in phase one
            break
        ratios = [(T[i, -1] / col[i], basis[i], i) for i in rows]
        best = min(r for r, _, _ in ratios)
        leave = min((bv, i) for r, bv, i in ratios if r <= best + pivot_tol)[1]
        T[leave] /= T[leave, entering]
        for i in range(m + 1):
            if i != leave and T[i, entering] != 0.0:
                T[i] -= T[i, entering] * T[leave]
        basis[leave] = entering
        it += 1

    x = np.zeros(n)
    for i, bv in enumerate(basis):
        if bv < n:
            x[bv] = max(T[i, -1], 0.0)
    residual = float(np.abs(A @ x - b).max()) if m else 0.0
    objective = float(-T[m, -1])
    feasible = residual <= tol
    farkas, margin = None, 0.0
    if not feasible:
        # reduced cost of artificial i is 1 - y_i for the flipped system
        y = (1.0 - T[m, n:n + m]) * flip
        scale = max(np.abs(y).max(), 1.0)
        farkas = y / scale
        margin = float(b @ farkas)
    return Feasibility(feasible, x, residual, objective, farkas, margin, it)
