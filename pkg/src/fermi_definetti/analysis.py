"""Desk-scale diagnostics for symmetric states on finite Fermi powers.

Clustering, evenness and commutator decay are reported as :class:`DecayReport`
objects: magnitudes per number of sites, a log-log fitted rate and a check
against an envelope ``K f(n)`` whose constant ``K`` is calibrated at the
smallest ``n``.  :func:`definetti_fit` recovers a symmetric state as a mixture
of product states over a grid of even site states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import reduce
from typing import Any, Callable, Iterable, Sequence

import numpy as np
from scipy.stats import norm, qmc

from .errors import BudgetExceeded, EmptyGrid, NotOdd
from .graded import Element, GradedAlgebra, is_homogeneous
from .power import (
    GRAM_BUDGET,
    FermiPower,
    Permutation,
    PowerElement,
    adjacent,
    embed_site,
    ergodic_mean,
    permutation_matrix,
    permute,
    power_unit,
    require_symmetric,
    stormer_sequence,
)
from .simplex_lsq import canonical_simplex_lsq
from .states import STATE_TOL, GNSData, State, covariant_unitary, state_from_density

__all__ = [
    "DecayReport",
    "FitResult",
    "InvariantProjection",
    "ENVELOPES",
    "fitted_rate",
    "check_weak_clustering",
    "check_strong_clustering",
    "check_asymptotic_abelianness",
    "oddness_decay",
    "invariant_projection",
    "ergodic_operator_mean",
    "even_state_grid",
    "definetti_fit",
]

ENVELOPES: dict[str, Callable[[float], float]] = {
    "1/n": lambda n: 1.0 / n,
    "1/(n+1)": lambda n: 1.0 / (n + 1),
    "n^-1/2": lambda n: n ** -0.5,
    "0": lambda n: 0.0,
}


def fitted_rate(points: Sequence[tuple[float, float]]) -> float:
    """Slope of ``log(value)`` against ``log(n)``; NaN with fewer than two positive values."""
    pts = [(n, v) for n, v in points if v > 0 and n > 0]
    if len(pts) < 2 or len({n for n, _ in pts}) < 2:
        return float("nan")
    x = np.log([n for n, _ in pts])
    y = np.log([v for _, v in pts])
    return float(np.polyfit(x, y, 1)[0])


@dataclass(frozen=True)
class DecayReport:
    """Magnitudes of a diagnostic per number of sites.

    ``passed`` records whether every value lies under ``constant * f(n)``
    (plus ``atol``) for the named envelope ``f``.
    """

    quantity: str
    values: list[tuple[int, float]]
    fitted_rate: float
    passed: bool
    envelope: str = ""
    constant: float = float("nan")

    @classmethod
    def build(cls, quantity: str, values: Iterable[tuple[int, float]], envelope: str,
              atol: float = 1e-12, constant: float | None = None) -> "DecayReport":
        vals = [(int(n), float(v)) for n, v in values]
        if not vals:
            raise ValueError("a report needs at least one value")
        if any(v < 0 or math.isnan(v) for _, v in vals):
            raise ValueError("magnitudes must be nonnegative numbers")
        f = ENVELOPES[envelope]
        n0, v0 = vals[0]
        if constant is None:
            constant = v0 / f(n0) if f(n0) > 0 else 0.0
        passed = all(v <= constant * f(n) * (1 + 1e-9) + atol for n, v in vals)
        return cls(quantity, vals, fitted_rate(vals), passed, envelope, float(constant))

    def to_dict(self) -> dict:
        return {
            "quantity": self.quantity,
            "points": [[n, v] for n, v in self.values],
            "fitted_rate": self.fitted_rate,
            "passed": self.passed,
        }


# -- helpers -----------------------------------------------------------------------

Family = Any  # State, sequence of States, or callable n -> State


def _family(omega: Family, sites: Iterable[int] | None) -> list[tuple[int, State]]:
    if isinstance(omega, State):
        return [(omega.algebra.sites, omega)]
    if callable(omega):
        if sites is None:
            raise ValueError("a state family needs the list of site counts")
        return [(int(n), omega(int(n))) for n in sites]
    return [(s.algebra.sites, s) for s in omega]


def _at_site0(x: Element | PowerElement, P: FermiPower) -> PowerElement:
    if isinstance(x, PowerElement):
        if x.power is not P:
            raise ValueError("element belongs to a different power")
        return x
    return embed_site(x, 0, P)


def _permuted_expectation(omega: State, left: PowerElement, moving: PowerElement,
                          right: PowerElement) -> Callable[[Permutation], complex]:
    """``g -> omega(left alpha_g(moving) right)``.

    ``alpha_g(moving)`` depends on ``g`` only through the images of the sites
    ``moving`` is supported on, so values are cached on that key.
    """
    support = moving.support()
    cache: dict[tuple[int, ...], complex] = {}

    def f(g: Permutation) -> complex:
        key = tuple(g.images[s] for s in support)
        if key not in cache:
            cache[key] = omega(left @ permute(g, moving) @ right)
        return cache[key]

    return f


# -- clustering ----------------------------------------------------------------------

def check_weak_clustering(omega: Family, a: Element | PowerElement, b: Element | PowerElement,
                          sites: Iterable[int] | None = None, samples: int = 20000,
                          seed: int = 0, tol: float = STATE_TOL) -> DecayReport:
    """``|M_g omega(iota_0(a) alpha_g(iota_0(b))) - omega(a) omega(b)|`` per ``n``.

    The envelope is ``C / n`` with ``C`` calibrated at the smallest ``n``.

    Raises:
        NotSymmetric: a state of the family is not permutation invariant.
    """
    out = []
    for n, w in _family(omega, sites):
        require_symmetric(w, tol)
        P = w.algebra
        x, y = _at_site0(a, P), _at_site0(b, P)
        f = _permuted_expectation(w, x, y, power_unit(P))
        mean = ergodic_mean(f, n, samples, seed).value
        out.append((n, abs(mean - w(x) * w(y))))
    return DecayReport.build("weak_clustering", out, "1/n")


def check_strong_clustering(omega: State, a: Element | PowerElement, b: Element | PowerElement,
                            max_m: int | None = None, tol: float = 1e-12) -> DecayReport:
    """``|omega(alpha_{g_m}(a) b) - omega(a) omega(b)|`` for the block swaps ``g_m``.

    Points are ``(m, deviation)``; ``passed`` means every deviation is within
    ``tol`` (exact factorization).

    Raises:
        BudgetExceeded: the state has fewer than ``2^{max_m+1}`` sites.
    """
    P = omega.algebra
    n = P.sites
    top = int(math.floor(math.log2(n))) - 1 if max_m is None else max_m
    if top < 0 or 2 ** (top + 1) > n:
        raise BudgetExceeded(f"block swaps up to m={top} need {2 ** (top + 1)} sites, have {n}")
    x, y = _at_site0(a, P), _at_site0(b, P)
    target = omega(x) * omega(y)
    out = []
    for m in range(top + 1):
        g = stormer_sequence(m, n)
        out.append((m, abs(omega(permute(g, x) @ y) - target)))
    return DecayReport.build("strong_clustering", out, "0", atol=tol, constant=0.0)


def check_asymptotic_abelianness(omega: Family, a, b, c, d, sites: Iterable[int] | None = None,
                                 samples: int = 20000, seed: int = 0,
                                 tol: float = STATE_TOL) -> DecayReport:
    """``|M_g omega(c [alpha_g(a), b] d)|`` per ``n``, operands at site 0.

    Envelope ``K / (n + 1)`` with ``K`` calibrated at the smallest ``n``.
    """
    out = []
    for n, w in _family(omega, sites):
        require_symmetric(w, tol)
        P = w.algebra
        xa, xb, xc, xd = (_at_site0(e, P) for e in (a, b, c, d))
        f = _permuted_commutator(w, xc, xa, xb, xd)
        mean = ergodic_mean(f, n, samples, seed).value
        out.append((n, abs(mean)))
    return DecayReport.build("asymptotic_abelianness", out, "1/(n+1)")


def _permuted_commutator(omega: State, c: PowerElement, a: PowerElement, b: PowerElement,
                         d: PowerElement) -> Callable[[Permutation], complex]:
    support = a.support()
    cache: dict[tuple[int, ...], complex] = {}

    def f(g: Permutation) -> complex:
        key = tuple(g.images[s] for s in support)
        if key not in cache:
            ga = permute(g, a)
            cache[key] = omega(c @ (ga @ b - b @ ga) @ d)
        return cache[key]

    return f


def oddness_decay(family: Family, a_odd: Element, sites: Iterable[int] | None = None,
                  tol: float = STATE_TOL) -> DecayReport:
    """``|omega_n(iota_0(a_odd))|`` per ``n`` against ``K n^{-1/2}``.

    Raises:
        NotOdd: ``a_odd`` is not a nonzero odd element.
    """
    if not isinstance(a_odd, Element) or is_homogeneous(a_odd) != -1 or not np.any(a_odd.coeffs):
        raise NotOdd("oddness decay needs a nonzero odd site element")
    out = []
    for n, w in _family(family, sites):
        require_symmetric(w, tol)
        out.append((n, abs(w(embed_site(a_odd, 0, w.algebra)))))
    return DecayReport.build("oddness", out, "n^-1/2")


# -- GNS diagnostics -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class InvariantProjection:
    gns: GNSData
    projection: np.ndarray
    unitaries: list[np.ndarray]
    commutator: float
    fixed_dim: int

    @property
    def E(self) -> np.ndarray:
        return self.projection


def _random_site_elements(B: GradedAlgebra, count: int, rng: np.random.Generator) -> list[Element]:
    out = []
    for _ in range(count):
        x = Element(B, rng.standard_normal(B.size) + 1j * rng.standard_normal(B.size))
        out.append(x * (1.0 / x.norm()))
    return out


def invariant_projection(omega: State, samples: int = 8, seed: int = 0,
                         operands: Sequence[tuple[Element, Element]] | None = None,
                         tol: float = STATE_TOL) -> InvariantProjection:
    """Projection onto the permutation-invariant vectors of the GNS space.

    Builds the unitaries of the adjacent transpositions, takes the joint fixed
    space, and reports the worst ``||[E pi(a) E, E pi(b) E]||`` over operand
    pairs at site 0 (seeded random norm-one pairs unless given).

    Raises:
        NotSymmetric; BudgetExceeded when the power has more than the Gram budget of words.
    """
    require_symmetric(omega, tol)
    P = omega.algebra
    if P.size > GRAM_BUDGET:
        raise BudgetExceeded(f"GNS of {P.size} words exceeds the budget of {GRAM_BUDGET}")
    g = omega.gns
    Us = []
    for j in range(P.sites - 1):
        Us.append(covariant_unitary(g, omega, permutation_matrix(adjacent(P.sites, j), P), tol))
    if Us:
        stacked = np.vstack([U - np.eye(g.dim) for U in Us])
        _, sv, Vh = np.linalg.svd(stacked)
        null = sv <= 1e-9 * max(1.0, sv[0]) if sv.size else np.ones(0, bool)
        rank_def = g.dim - int(np.sum(~null[: min(len(sv), g.dim)]))
        basis = Vh[g.dim - rank_def:].conj().T
    else:
        basis = np.eye(g.dim)
    E = basis @ basis.conj().T
    if operands is None:
        rng = np.random.default_rng(seed)
        xs = _random_site_elements(P.site, 2 * samples, rng)
        operands = list(zip(xs[::2], xs[1::2]))
    worst = 0.0
    for a, b in operands:
        A = E @ g.pi(embed_site(a, 0, P)) @ E
        Bm = E @ g.pi(embed_site(b, 0, P)) @ E
        worst = max(worst, float(np.linalg.norm(A @ Bm - Bm @ A, 2)))
    return InvariantProjection(g, E, Us, worst, basis.shape[1])


def ergodic_operator_mean(omega: State, a: Element, mode: str = "norm") -> float:
    """Distance of the permutation mean of ``pi(iota_0(a))`` from ``omega(a) 1``.

    The mean over ``S_n`` of ``pi(alpha_g(iota_0(a)))`` equals
    ``(1/n) sum_j pi(iota_j(a))``.  ``mode="norm"`` returns the operator norm of
    its difference from ``omega(a) 1``; ``mode="cyclic"`` returns the norm of
    that difference applied to the cyclic vector.
    """
    P = omega.algebra
    if P.size > GRAM_BUDGET:
        raise BudgetExceeded(f"GNS of {P.size} words exceeds the budget of {GRAM_BUDGET}")
    g = omega.gns
    n = P.sites
    M = sum(g.pi(embed_site(a, j, P)) for j in range(n)) / n
    D = M - omega(embed_site(a, 0, P)) * np.eye(g.dim)
    if mode == "norm":
        return float(np.linalg.norm(D, 2))
    if mode == "cyclic":
        return float(np.linalg.norm(D @ g.cyclic_vector))
    raise ValueError(f"unknown mode {mode!r}")


# -- De Finetti fit ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FitResult:
    grid: list[State]
    weights: np.ndarray
    residual: float
    restricted_sites: int
    grid_params: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "grid_params": self.grid_params,
            "weights": [float(w) for w in self.weights],
            "residual": float(self.residual),
            "sites": int(self.restricted_sites),
        }


def _is_car1(B: GradedAlgebra) -> bool:
    if B.ambient_dim != 2 or B.size != 4:
        return False
    v = B.grading_unitary
    return bool(np.allclose(np.abs(np.diag(v)), 1) and np.isclose(np.trace(v), 0))


def even_state_grid(B: GradedAlgebra, resolution: int, seed: int = 0) -> list[State]:
    """Deterministic family of even states on ``B``.

    For the one-mode CAR algebra: the states of ``diag(t, 1-t)`` for ``t`` on a
    uniform grid of ``resolution`` points (in the basis where ``v`` is
    ``diag(1, -1)``).  Otherwise: vector states of ``v``-eigenvectors drawn
    from a scrambled Halton sequence, then Halton mixtures of such pairs.
    The parameters are stored on each state as ``label``.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    out = []
    if _is_car1(B):
        v = B.grading_unitary
        plus = 0 if v[0, 0].real > 0 else 1
        for t in np.linspace(0.0, 1.0, resolution):
            rho = np.zeros((2, 2), dtype=complex)
            rho[plus, plus] = t
            rho[1 - plus, 1 - plus] = 1.0 - t
            out.append(replace(state_from_density(B, rho), label=float(t)))
        return out
    d = B.ambient_dim
    lam, U = np.linalg.eigh(B.grading_unitary)
    spaces = [U[:, lam > 0], U[:, lam < 0]]
    spaces = [S for S in spaces if S.shape[1]]
    sampler = qmc.Halton(d=4 * d + 1, scramble=True, seed=seed)
    pts = sampler.random(resolution)
    for k, p in enumerate(pts):
        vecs = []
        for s, S in enumerate(spaces):
            z = norm.ppf(np.clip(p[2 * d * s: 2 * d * s + 2 * S.shape[1]], 1e-12, 1 - 1e-12))
            c = z[: S.shape[1]] + 1j * z[S.shape[1]:]
            psi = S @ c
            vecs.append(psi / np.linalg.norm(psi))
        if k < resolution // 2 or len(vecs) == 1:
            psi = vecs[k % len(vecs)]
            rho = np.outer(psi, psi.conj())
            param = [float(x) for x in p]
        else:
            t = float(p[-1])
            rho = t * np.outer(vecs[0], vecs[0].conj()) + (1 - t) * np.outer(vecs[1], vecs[1].conj())
            param = [float(x) for x in p]
        out.append(replace(state_from_density(B, rho), label=param))
    return out


def _product_values(phi: State, n: int) -> np.ndarray:
    return reduce(np.multiply.outer, [phi.values] * n).ravel()


def definetti_fit(omega: State, grid: Sequence[State], tol: float = STATE_TOL) -> FitResult:
    """Best approximation of a symmetric state by mixtures of grid product states.

    Minimizes the Euclidean distance of basis values over the probability
    simplex.  When several weight vectors are optimal (the product values only
    see moments up to the number of sites), the one minimizing
    ``sum_k w_k ||phi_k||^{2(n+1)}`` is returned; for the one-mode CAR grid this
    is the representation with the fewest interior nodes.

    Raises:
        EmptyGrid, NotSymmetric, ConvergenceError.
    """
    if len(grid) == 0:
        raise EmptyGrid("the grid of even states is empty")
    require_symmetric(omega, tol)
    P = omega.algebra
    B = P.site
    if any(phi.algebra is not B for phi in grid):
        raise ValueError("grid states must live on the site algebra")
    n = P.sites
    cols = np.stack([_product_values(phi, n) for phi in grid], axis=1)
    A = np.vstack([cols.real, cols.imag])
    b = np.concatenate([omega.values.real, omega.values.imag])
    cost = np.array([np.linalg.norm(phi.values) ** (2 * (n + 1)) for phi in grid])
    fit = canonical_simplex_lsq(A, b, cost)
    params = [phi.label for phi in grid]
    return FitResult(list(grid), fit.weights, fit.residual, n, params)
