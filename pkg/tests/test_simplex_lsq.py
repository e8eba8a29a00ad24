from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import nnls

from fermi_definetti.errors import ConvergenceError
from fermi_definetti.simplex_lsq import canonical_simplex_lsq, simplex_lsq

seeds = st.integers(0, 2**32 - 1)


def nnls_oracle(A, b, penalty=1e4):
    # sum(w) = 1 enforced by a heavily weighted extra row
    rows = np.vstack([A, penalty * np.ones((1, A.shape[1]))])
    w, _ = nnls(rows, np.concatenate([b, [penalty]]))
    return w


def brute_oracle(A, b):
    # exhaust supports: each face solved in closed form, keep feasible optima
    k = A.shape[1]
    best = np.inf
    for r in range(1, k + 1):
        for S in itertools.combinations(range(k), r):
            As = A[:, S]
            K = np.block([[As.T @ As, np.ones((r, 1))], [np.ones((1, r)), np.zeros((1, 1))]])
            z = np.linalg.lstsq(K, np.concatenate([As.T @ b, [1.0]]), rcond=None)[0][:r]
            if np.all(z >= -1e-12):
                best = min(best, float(np.linalg.norm(As @ z - b)))
    return best


@given(seeds)
def test_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((5, 6))
    b = rng.standard_normal(5)
    fit = simplex_lsq(A, b)
    assert fit.weights.min() >= 0
    assert fit.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert fit.residual <= brute_oracle(A, b) + 1e-9


@given(seeds)
def test_not_worse_than_nnls_penalty(seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((12, 30))
    b = A @ rng.dirichlet(np.ones(30) * 0.3) + 0.1 * rng.standard_normal(12)
    fit = simplex_lsq(A, b)
    w = nnls_oracle(A, b)
    w = w / w.sum()
    assert fit.residual <= np.linalg.norm(A @ w - b) + 1e-7


def test_exact_vertex():
    A = np.eye(3)
    fit = simplex_lsq(A, A[:, 1])
    assert np.allclose(fit.weights, [0, 1, 0])
    assert fit.residual < 1e-14


def test_point_outside_hull_projects():
    A = np.eye(2)
    fit = simplex_lsq(A, np.array([2.0, 2.0]))
    assert np.allclose(fit.weights, [0.5, 0.5])


def test_canonical_picks_cheapest_optimum():
    # two columns are identical; the tie-break chooses the cheaper one
    A = np.array([[1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    b = np.array([0.5, 0.5])
    fit = canonical_simplex_lsq(A, b, cost=np.array([2.0, 1.0, 1.0]))
    assert np.allclose(fit.weights, [0.0, 0.5, 0.5], atol=1e-8)
    assert fit.residual < 1e-12


def test_budget_exhaustion():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((4, 20))
    with pytest.raises(ConvergenceError):
        simplex_lsq(A, rng.standard_normal(4) * 0.01, max_iter=1)
