"""States, positivity certificates and the GNS construction.

A state is stored by its values on the basis of its algebra.  The algebra may
be a :class:`~fermi_definetti.graded.GradedAlgebra` or a
:class:`~fermi_definetti.power.FermiPower`; both expose the same small surface
(``size``, ``grades``, ``unit_coeffs``, ``gram``, ``star_values``,
``grade_values``, ``left_mult``, ``evaluate``, ``basis_element``,
``coeffs_of``).
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Callable, Iterator, Sequence

import numpy as np

from .errors import (
    BudgetExceeded,
    DegenerateState,
    NotHermitian,
    NotInvariant,
    NotNormalized,
    NotPositive,
)
from .serialize import decode_complex, encode_complex

__all__ = [
    "STATE_TOL",
    "State",
    "GNSData",
    "state_from_values",
    "state_from_density",
    "mixture",
    "random_density",
    "random_state",
    "min_gram_eigenvalue",
    "is_even",
    "evenness_residuals",
    "gns",
    "covariant_unitary",
    "gns_norm",
    "state_to_json",
]

STATE_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class State:
    """A normalized positive functional given by its basis values.

    ``certificate`` records how positivity was established: ``"gram"`` when the
    Gram matrix was checked numerically, otherwise a short description of the
    construction that guarantees it (e.g. a product of even states).
    ``label`` is free-form metadata such as a grid parameter.
    """

    algebra: Any
    values: np.ndarray
    certificate: str = "gram"
    density: np.ndarray | None = None
    label: Any = None

    def __call__(self, x: Any) -> complex:
        return self.algebra.evaluate(self.values, x)

    @cached_property
    def gram(self) -> np.ndarray:
        return self.algebra.gram(self.values)

    @cached_property
    def gns(self) -> "GNSData":
        return gns(self)

    def __repr__(self) -> str:
        return f"State(on={self.algebra!r}, certificate={self.certificate!r})"


def min_gram_eigenvalue(algebra: Any, values: np.ndarray) -> tuple[float, float]:
    """Smallest eigenvalue and spectral norm of the Gram matrix of a functional."""
    G = algebra.gram(np.asarray(values, dtype=complex))
    G = 0.5 * (G + G.conj().T)
    ev = np.linalg.eigvalsh(G)
    return float(ev[0]), float(max(abs(ev[0]), abs(ev[-1])))


def _check_functional(algebra: Any, values: np.ndarray, tol: float) -> None:
    one = complex(np.dot(values, algebra.unit_coeffs))
    if abs(one - 1.0) > tol:
        raise NotNormalized(f"phi(1) = {one:.6g}, expected 1")
    scale = max(1.0, float(np.max(np.abs(values))))
    herm = np.max(np.abs(algebra.star_values(values) - np.conj(values)))
    if herm > tol * scale:
        raise NotHermitian(f"phi(x*) differs from conj(phi(x)) by {herm:.3e}")


def state_from_values(algebra: Any, values: Sequence[complex] | np.ndarray,
                      tol: float = STATE_TOL, certificate: str | None = None,
                      density: np.ndarray | None = None) -> State:
    """Validate basis values and return a :class:`State`.

    With ``certificate=None`` positivity is checked on the Gram matrix
    (minimum eigenvalue >= ``-tol * ||G||``).  Passing a certificate string
    skips that check; use it only when positivity holds by construction.

    Raises:
        NotNormalized, NotHermitian, NotPositive; BudgetExceeded when the Gram
        matrix is too large to form and no certificate was supplied.
    """
    v = np.asarray(values, dtype=complex)
    if v.shape != (algebra.size,):
        raise ValueError(f"expected {algebra.size} values, got shape {v.shape}")
    _check_functional(algebra, v, tol)
    if certificate is None:
        lo, nrm = min_gram_eigenvalue(algebra, v)
        if lo < -tol * max(nrm, 1e-300):
            raise NotPositive(f"Gram matrix has eigenvalue {lo:.3e} (norm {nrm:.3e})")
        certificate = "gram"
    return State(algebra, v, certificate, density)


def _ambient_values(algebra: Any, rho: np.ndarray) -> np.ndarray:
    if hasattr(algebra, "density_values"):
        return algebra.density_values(rho)
    # tr(rho b_i)
    return np.einsum("ab,iba->i", rho, algebra.basis)


def state_from_density(algebra: Any, rho: np.ndarray, tol: float = STATE_TOL) -> State:
    """The state ``x -> tr(rho x)`` for an ambient density matrix ``rho``."""
    rho = np.asarray(rho, dtype=complex)
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise NotHermitian("density matrix is not self-adjoint")
    ev = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    if ev[0] < -tol * max(1.0, ev[-1]):
        raise NotPositive(f"density matrix has eigenvalue {ev[0]:.3e}")
    if abs(np.trace(rho) - 1.0) > tol:
        raise NotNormalized(f"density matrix has trace {np.trace(rho):.6g}")
    values = _ambient_values(algebra, rho)
    try:
        return state_from_values(algebra, values, tol, density=rho)
    except BudgetExceeded:
        # an ambient density is positive on every *-subalgebra
        return state_from_values(algebra, values, tol, certificate="ambient density",
                                 density=rho)


def mixture(states: Sequence[State], weights: Sequence[float]) -> State:
    """Convex combination of states on one algebra."""
    w = np.asarray(weights, dtype=float)
    if len(states) == 0 or w.shape != (len(states),):
        raise ValueError("need one weight per state")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise ValueError("weights must be a probability vector")
    alg = states[0].algebra
    if any(s.algebra is not alg for s in states):
        raise ValueError("states live on different algebras")
    values = np.tensordot(w, np.stack([s.values for s in states]), axes=1)
    certs = sorted({s.certificate for s in states})
    cert = "convex combination of: " + "; ".join(certs)
    return State(alg, values, cert)


def random_density(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = dim if rank is None else rank
    X = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = X @ X.conj().T
    return rho / np.trace(rho).real


def random_state(algebra: Any, rng: np.random.Generator, rank: int | None = None) -> State:
    return state_from_density(algebra, random_density(algebra.ambient_dim, rng, rank))


# -- evenness -------------------------------------------------------------------

def evenness_residuals(state: State) -> tuple[float, float]:
    """The two evenness diagnostics.

    Returns:
        ``(max |phi(b)|`` over odd basis elements, ``max |phi o theta - phi|``).
    """
    alg = state.algebra
    v = state.values
    odd = alg.grades < 0
    on_odd = float(np.max(np.abs(v[odd]))) if np.any(odd) else 0.0
    drift = float(np.max(np.abs(alg.grade_values(v) - v)))
    return on_odd, drift


def is_even(state: State, tol: float = STATE_TOL) -> bool:
    on_odd, drift = evenness_residuals(state)
    a, b = on_odd <= tol, drift <= tol
    if a != b:
        raise RuntimeError(
            f"evenness criteria disagree (odd part {on_odd:.3e}, theta drift {drift:.3e})")
    return a


# -- GNS --------------------------------------------------------------------------

class _RepMap(Mapping):
    """Lazy basis-index -> pi(b_i) map."""

    def __init__(self, g: "GNSData") -> None:
        self._g = g
        self._cache: dict[int, np.ndarray] = {}

    def __getitem__(self, i: int) -> np.ndarray:
        if not 0 <= i < len(self):
            raise KeyError(i)
        if i not in self._cache:
            alg = self._g.state.algebra
            self._cache[i] = self._g.pi(alg.basis_element(i))
        return self._cache[i]

    def __iter__(self) -> Iterator[int]:
        return iter(range(len(self)))

    def __len__(self) -> int:
        return self._g.state.algebra.size


@dataclass(frozen=True, eq=False)
class GNSData:
    """GNS triple of a state in coordinates.

    The GNS space is ``C^dim``; ``factor`` (``J``) maps basis coordinates of
    ``x`` to the vector ``[x] = pi(x) xi`` and ``cofactor`` is its
    pseudo-inverse on the complement of the null space.
    """

    state: State
    dim: int
    factor: np.ndarray
    cofactor: np.ndarray
    cyclic_vector: np.ndarray
    eigenvalues: np.ndarray

    @property
    def isometry_basis(self) -> np.ndarray:
        return self.factor

    def pi(self, x: Any) -> np.ndarray:
        """Representation matrix of an element (or of a left-multiplication matrix)."""
        L = x if isinstance(x, np.ndarray) and x.ndim == 2 else self.state.algebra.left_mult(x)
        return self.factor @ L @ self.cofactor

    def vector(self, x: Any) -> np.ndarray:
        """``pi(x) xi``."""
        return self.factor @ self.state.algebra.coeffs_of(x)

    @cached_property
    def rep(self) -> Mapping:
        return _RepMap(self)


def gns(state: State, tol: float = STATE_TOL) -> GNSData:
    """GNS construction by diagonalizing the Gram matrix.

    Eigenvalues above ``tol * ||G||`` span the quotient by the null space.

    Raises:
        DegenerateState: the Gram matrix is numerically indefinite.
    """
    G = state.gram
    G = 0.5 * (G + G.conj().T)
    lam, U = np.linalg.eigh(G)
    nrm = max(abs(lam[0]), abs(lam[-1]))
    if lam[0] < -tol * nrm:
        raise DegenerateState(f"Gram matrix eigenvalue {lam[0]:.3e} below tolerance")
    keep = lam > tol * nrm
    lam_k, U_k = lam[keep], U[:, keep]
    root = np.sqrt(lam_k)
    J = root[:, None] * U_k.conj().T
    Jp = U_k / root[None, :]
    xi = J @ state.algebra.unit_coeffs
    return GNSData(state, int(keep.sum()), J, Jp, xi, lam_k)


def _automorphism_matrix(algebra: Any, automorphism: Callable | np.ndarray) -> np.ndarray:
    if isinstance(automorphism, np.ndarray):
        return automorphism
    cols = [algebra.coeffs_of(automorphism(algebra.basis_element(i)))
            for i in range(algebra.size)]
    return np.stack(cols, axis=1)


def covariant_unitary(g: GNSData, state: State, automorphism: Callable | np.ndarray,
                      tol: float = STATE_TOL) -> np.ndarray:
    """Unitary ``V`` with ``V pi(x) xi = pi(alpha(x)) xi`` for a state-preserving ``alpha``.

    ``automorphism`` is either a callable on elements or the matrix of the map
    on basis coordinates.

    Raises:
        NotInvariant: ``state o alpha != state``.
    """
    A = _automorphism_matrix(state.algebra, automorphism)
    drift = np.max(np.abs(A.T @ state.values - state.values))
    if drift > tol:
        raise NotInvariant(f"state is not invariant under the automorphism (drift {drift:.3e})")
    V = g.factor @ A @ g.cofactor
    err = np.max(np.abs(V.conj().T @ V - np.eye(g.dim))) if g.dim else 0.0
    if err > 1e3 * tol:
        raise NotInvariant(f"implementing operator is not unitary (error {err:.3e})")
    return V


def gns_norm(c: Any, state: State) -> float:
    """Operator norm of ``pi_state(c)``."""
    P = state.gns.pi(c)
    return float(np.linalg.norm(P, 2)) if P.size else 0.0


# -- JSON -------------------------------------------------------------------------

def state_to_json(state: State, algebra_name: str | None = None, sites: int | None = None) -> dict:
    out: dict = {"algebra": algebra_name or getattr(state.algebra, "name", "algebra")}
    if sites is not None:
        out["sites"] = int(sites)
    out["values"] = encode_complex(state.values)
    return out


def values_from_json(data: dict) -> np.ndarray:
    return decode_complex(data["values"])
