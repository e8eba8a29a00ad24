"""Least squares over the probability simplex.

``simplex_lsq`` solves ``min ||A w - b||`` subject to ``w >= 0``, ``sum(w) = 1``
with a primal active-set method (Lawson-Hanson adapted to the extra equality).
The fitted point ``A w`` is unique; the weights need not be when columns are
affinely dependent.  ``canonical_simplex_lsq`` picks one optimal weight vector
by a linear tie-break: among all optimal ``w`` it minimizes ``cost @ w``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import ConvergenceError

__all__ = ["SimplexFit", "simplex_lsq", "canonical_simplex_lsq"]


@dataclass(frozen=True)
class SimplexFit:
    weights: np.ndarray
    residual: float
    iterations: int


def _solve_face(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Minimizer of ``||A z - b||`` on the affine hyperplane ``sum(z) = 1``."""
    k = A.shape[1]
    K = np.zeros((k + 1, k + 1))
    K[:k, :k] = A.T @ A
    K[:k, k] = K[k, :k] = 1.0
    rhs = np.concatenate([A.T @ b, [1.0]])
    sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    return sol[:k]


def simplex_lsq(A: np.ndarray, b: np.ndarray, tol: float = 1e-12,
                max_iter: int | None = None) -> SimplexFit:
    """Active-set solution of the simplex-constrained least-squares problem.

    Args:
        A: real ``(rows, k)`` matrix, one column per vertex.
        b: target vector.
        tol: relative optimality tolerance on the reduced gradient.
        max_iter: outer iteration budget (default ``3 k + 10``).

    Raises:
        ConvergenceError: the budget ran out before the optimality test passed.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    rows, k = A.shape
    if k == 0:
        raise ValueError("no columns")
    max_iter = 3 * k + 10 if max_iter is None else max_iter
    scale = max(1.0, float(np.linalg.norm(A, 2)) ** 2, float(np.linalg.norm(b)) ** 2)

    j0 = int(np.argmin(np.linalg.norm(A - b[:, None], axis=0)))
    passive = [j0]
    w = np.zeros(k)
    w[j0] = 1.0
    for it in range(1, max_iter + 1):
        # inner loop: move to the face optimum while staying feasible
        for _ in range(k + 1):
            z = _solve_face(A[:, passive], b)
            if np.all(z > 0):
                w[:] = 0.0
                w[passive] = z
                break
            wp = w[passive]
            neg = z <= 0
            alpha = np.min(wp[neg] / (wp[neg] - z[neg]))
            wp = wp + alpha * (z - wp)
            keep = wp > 1e-15
            w[:] = 0.0
            w[np.asarray(passive)[keep]] = wp[keep]
            passive = [j for j, kp in zip(passive, keep) if kp]
        else:
            raise ConvergenceError("face iteration did not settle")
        g = A.T @ (A @ w - b)
        mu = -float(np.mean(g[passive]))
        reduced = g + mu
        reduced[passive] = np.inf
        j = int(np.argmin(reduced))
        if reduced[j] >= -tol * scale:
            w = np.clip(w, 0.0, None)
            w /= w.sum()
            return SimplexFit(w, float(np.linalg.norm(A @ w - b)), it)
        passive.append(j)
    raise ConvergenceError(f"simplex least squares did not converge in {max_iter} iterations")


def canonical_simplex_lsq(A: np.ndarray, b: np.ndarray, cost: np.ndarray,
                          tol: float = 1e-12, slack: float | None = None) -> SimplexFit:
    """Optimal simplex weights that minimize ``cost @ w`` among all optimizers.

    Stage one computes the unique optimal point ``p = A w*``.  Stage two solves
    the linear program ``min cost @ w`` over the simplex with
    ``|A w - p| <= slack`` entrywise.  The result is then polished by an exact
    solve on the support the program selected; if that loses more than
    ``1e-9`` in the objective, the stage-one weights are returned instead.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    cost = np.asarray(cost, dtype=float)
    first = simplex_lsq(A, b, tol)
    p = A @ first.weights
    slack = 1e-10 * max(1.0, float(np.max(np.abs(p)))) if slack is None else slack
    k = A.shape[1]
    res = linprog(
        cost,
        A_ub=np.vstack([A, -A]),
        b_ub=np.concatenate([p + slack, slack - p]),
        A_eq=np.ones((1, k)),
        b_eq=[1.0],
        bounds=(0, None),
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0:
        return first
    support = np.flatnonzero(res.x > 1e-8 * np.max(res.x))
    best = None
    iters = first.iterations
    while support.size:
        polished = simplex_lsq(A[:, support], b, tol)
        iters += polished.iterations
        w = np.zeros(k)
        w[support] = polished.weights
        resid = float(np.linalg.norm(A @ w - b))
        if resid > first.residual + 1e-9:
            break
        best = SimplexFit(w, resid, iters)
        # drop negligible weights left over from the slack and re-solve
        smaller = support[polished.weights > 1e-9]
        if smaller.size == support.size:
            break
        support = smaller
    return first if best is None else best
