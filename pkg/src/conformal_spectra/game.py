"""Finite zero-sum games solved by linear programming.

The payoff matrix ``P`` has one row per pure strategy of the minimizing
player (mesh vertices) and one column per pure strategy of the maximizing
player (subgradient candidates)::

    value = min_{tau in simplex} max_{c in simplex} tau^T P c
          = max_{c in simplex} min_{tau in simplex} tau^T P c

Both optimal strategies are returned together with the certified duality gap
``max_a (P^T tau)_a - min_v (P c)_v``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .exceptions import LPFailure

GAP_TARGET = 1e-9

_HIGHS_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
    "presolve": True,
}


@dataclass(frozen=True)
class GameResult:
    value: float
    tau: np.ndarray
    mix: np.ndarray
    gap: float
    upper: float
    lower: float
    status: str


def _certify(P, tau, mix):
    upper = float(np.max(P.T @ tau))
    lower = float(np.min(P @ mix))
    return upper, lower


def _project_simplex(x):
    x = np.maximum(x, 0.0)
    s = x.sum()
    return x / s if s > 0 else np.full_like(x, 1.0 / len(x))


def _purify(P, tau, mix):
    """Re-solve the equalizing system on the active supports in full precision."""
    S = np.flatnonzero(tau > 1e-12)
    C = np.flatnonzero(mix > 1e-12)
    sub = P[np.ix_(S, C)]
    out_tau, out_mix = tau, mix
    # Rows: sub^T tau_S - t = 0 for every active column, sum tau_S = 1.
    A = np.block([[sub.T, -np.ones((len(C), 1))], [np.ones((1, len(S))), np.zeros((1, 1))]])
    b = np.zeros(len(C) + 1)
    b[-1] = 1.0
    x = np.linalg.lstsq(A, b, rcond=None)[0]
    if np.all(x[:-1] >= -1e-14):
        out_tau = np.zeros_like(tau)
        out_tau[S] = x[:-1]
        out_tau = _project_simplex(out_tau)
    A = np.block([[sub, -np.ones((len(S), 1))], [np.ones((1, len(C))), np.zeros((1, 1))]])
    b = np.zeros(len(S) + 1)
    b[-1] = 1.0
    y = np.linalg.lstsq(A, b, rcond=None)[0]
    if np.all(y[:-1] >= -1e-14):
        out_mix = np.zeros_like(mix)
        out_mix[C] = y[:-1]
        out_mix = _project_simplex(out_mix)
    return out_tau, out_mix


def solve_game(P):
    """Optimal mixed strategies and value of the game with payoff ``P``.

    Raises
    ------
    LPFailure
        If the LP solver does not report an optimal solution.
    """
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.size == 0:
        raise ValueError("payoff matrix must be a non-empty 2-D array")
    if not np.all(np.isfinite(P)):
        raise LPFailure("payoff matrix has non-finite entries")
    n, k = P.shape
    if k == 1:
        col = P[:, 0]
        lo = col.min()
        tau = (col == lo).astype(float)
        tau /= tau.sum()
        return GameResult(float(lo), tau, np.ones(1), 0.0, float(lo), float(lo), "singleton")
    scale = float(np.abs(P).max())
    if scale == 0.0:
        return GameResult(0.0, np.full(n, 1.0 / n), np.full(k, 1.0 / k), 0.0, 0.0, 0.0, "zero")
    Q = P / scale
    # variables (tau_1..tau_n, t): minimize t, Q^T tau - t <= 0, sum tau = 1
    cost = np.zeros(n + 1)
    cost[-1] = 1.0
    A_ub = np.hstack([Q.T, -np.ones((k, 1))])
    A_eq = np.zeros((1, n + 1))
    A_eq[0, :n] = 1.0
    bounds = [(0, None)] * n + [(None, None)]
    res = linprog(cost, A_ub=A_ub, b_ub=np.zeros(k), A_eq=A_eq, b_eq=[1.0], bounds=bounds,
                  method="highs-ds", options=_HIGHS_OPTIONS)
    if res.status != 0:
        raise LPFailure(f"LP solver failed: {res.message}", status=res.status)
    tau = _project_simplex(res.x[:n])
    mix = _project_simplex(-res.ineqlin.marginals)
    upper, lower = _certify(Q, tau, mix)
    if upper - lower > GAP_TARGET / scale:
        t2, m2 = _purify(Q, tau, mix)
        u2, l2 = _certify(Q, t2, m2)
        if u2 - l2 < upper - lower:
            tau, mix, upper, lower = t2, m2, u2, l2
    upper *= scale
    lower *= scale
    return GameResult(upper, tau, mix, max(upper - lower, 0.0), upper, lower, "optimal")
