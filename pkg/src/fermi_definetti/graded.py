"""Finite-dimensional Z2-graded *-algebras realized as matrix algebras.

An algebra is given by a homogeneous basis of d x d complex matrices, the grade
(+1 even, -1 odd) of each basis element, and a self-adjoint unitary ``v`` in
the ambient matrix algebra implementing the grading, ``theta(x) = v x v``.
Elements are coefficient vectors over the basis; all arithmetic is done on the
ambient matrices and projected back onto the basis span.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import (
    DependentBasis,
    GradingNotInvolutive,
    NoUnit,
    NotClosed,
    NotHomogeneous,
    UnknownPreset,
)
from .serialize import decode_complex, encode_complex

__all__ = [
    "DEFAULT_TOL",
    "GradedAlgebra",
    "Element",
    "build_algebra",
    "element",
    "basis_element",
    "unit",
    "from_matrix",
    "multiply",
    "star",
    "grading_apply",
    "grade_split",
    "conditional_expectation_even",
    "is_homogeneous",
    "random_element",
    "preset",
    "PRESET_NAMES",
    "algebra_to_json",
    "algebra_from_json",
]

DEFAULT_TOL = 1e-12

# car(1) letters in the order e11, e12, e21, e22
_E = np.zeros((4, 2, 2), dtype=complex)
_E[0, 0, 0] = _E[1, 0, 1] = _E[2, 1, 0] = _E[3, 1, 1] = 1.0
_CAR1_GRADES = np.array([1, -1, -1, 1])
_Z = np.diag([1.0, -1.0]).astype(complex)


@dataclass(frozen=True, eq=False)
class GradedAlgebra:
    """A validated matrix realization of a Z2-graded *-algebra.

    Construct through :func:`build_algebra` or :func:`preset`; the raw
    constructor does not check the axioms.
    """

    name: str
    basis: np.ndarray  # (m, d, d)
    grades: np.ndarray  # (m,) entries +1 / -1
    grading_unitary: np.ndarray  # (d, d)
    identity_coeffs: np.ndarray  # (m,)
    tol: float = DEFAULT_TOL

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[1]

    @property
    def size(self) -> int:
        return self.basis.shape[0]

    @property
    def unit_coeffs(self) -> np.ndarray:
        return self.identity_coeffs

    def __repr__(self) -> str:
        return f"GradedAlgebra({self.name!r}, size={self.size}, ambient_dim={self.ambient_dim})"

    # -- coordinates ---------------------------------------------------------

    @cached_property
    def _flat(self) -> np.ndarray:
        return self.basis.reshape(self.size, -1)

    @cached_property
    def basis_gram(self) -> np.ndarray:
        """Hilbert-Schmidt Gram matrix ``tr(b_i^* b_j)`` of the basis."""
        return self._flat.conj() @ self._flat.T

    @cached_property
    def _coord_map(self) -> np.ndarray:
        return np.linalg.pinv(self.basis_gram, hermitian=True) @ self._flat.conj()

    def coords_many(self, mats: np.ndarray, scale: np.ndarray | float = 1.0,
                    ) -> np.ndarray:
        """Basis coordinates of a stack of ambient matrices.

        Raises:
            NotClosed: some matrix is farther than ``tol * scale`` (Frobenius)
                from the basis span.
        """
        mats = np.asarray(mats, dtype=complex)
        flat = mats.reshape(mats.shape[0], -1)
        c = flat @ self._coord_map.T
        resid = np.linalg.norm(flat - c @ self._flat, axis=1)
        bound = self.tol * np.maximum(np.asarray(scale, dtype=float), 1e-300)
        bad = resid > bound
        if np.any(bad):
            k = int(np.argmax(resid - bound))
            raise NotClosed(
                f"{self.name}: matrix leaves the basis span "
                f"(residual {resid[k]:.3e} > {np.broadcast_to(bound, resid.shape)[k]:.3e})")
        return c

    def coords(self, mat: np.ndarray, scale: float | None = None) -> np.ndarray:
        mat = np.asarray(mat, dtype=complex)
        if scale is None:
            scale = max(np.linalg.norm(mat), 1.0)
        return self.coords_many(mat[None], scale)[0]

    @cached_property
    def _basis_norms(self) -> np.ndarray:
        return np.linalg.norm(self._flat, axis=1)

    # -- structure tables ----------------------------------------------------

    @cached_property
    def star_matrix(self) -> np.ndarray:
        """Column ``i`` holds the coordinates of ``b_i^*``."""
        adj = np.conj(np.transpose(self.basis, (0, 2, 1)))
        return self.coords_many(adj, self._basis_norms).T

    @cached_property
    def grading_matrix(self) -> np.ndarray:
        """Column ``i`` holds the coordinates of ``v b_i v``."""
        v = self.grading_unitary
        return self.coords_many(v @ self.basis @ v, self._basis_norms).T

    @cached_property
    def structure_constants(self) -> np.ndarray:
        """``C[i, j, k]``: coefficient of ``b_k`` in ``b_i b_j``."""
        m = self.size
        out = np.empty((m, m, m), dtype=complex)
        for i in range(m):
            prods = self.basis[i] @ self.basis
            out[i] = self.coords_many(prods, self._basis_norms[i] * self._basis_norms)
        return out

    def left_mult(self, x: "Element | np.ndarray") -> np.ndarray:
        """Matrix ``L`` with ``coords(x y) = L @ coords(y)``."""
        mat = _as_matrix(self, x)
        prods = mat @ self.basis
        scale = max(np.linalg.norm(mat), 1e-300) * self._basis_norms
        return self.coords_many(prods, scale).T

    def functional_matrix(self, values: np.ndarray) -> np.ndarray:
        """Ambient matrix ``F`` with ``phi(M) = sum(F * M)`` on the basis span."""
        return (np.asarray(values) @ self._coord_map).reshape(self.ambient_dim, -1)

    def gram(self, values: np.ndarray) -> np.ndarray:
        """``G[i, j] = phi(b_i^* b_j)`` for the functional with the given basis values."""
        F = self.functional_matrix(values)
        bh = np.conj(np.transpose(self.basis, (0, 2, 1)))
        # phi(b_i^* b_j) = sum_{a,c} F[a, c] (b_i^* b_j)[a, c]
        return np.einsum("iab,jbc,ac->ij", bh, self.basis, F, optimize=True)

    def star_values(self, values: np.ndarray) -> np.ndarray:
        """Values of ``x -> phi(x^*)`` on the basis."""
        return self.star_matrix.T @ values

    def grade_values(self, values: np.ndarray) -> np.ndarray:
        """Values of ``phi o theta`` on the basis."""
        return self.grading_matrix.T @ values

    def odd_mask(self) -> np.ndarray:
        return self.grades < 0

    def evaluate(self, values: np.ndarray, x: Any) -> complex:
        """``phi(x)`` for the functional with the given basis values."""
        return complex(np.dot(values, self.coeffs_of(x)))

    def basis_element(self, i: int) -> "Element":
        return basis_element(self, i)

    def coeffs_of(self, x: Any) -> np.ndarray:
        if isinstance(x, Element):
            if x.algebra is not self:
                raise ValueError("element belongs to a different algebra")
            return x.coeffs
        return np.asarray(x, dtype=complex)


def _as_matrix(algebra: GradedAlgebra, x: "Element | np.ndarray") -> np.ndarray:
    if isinstance(x, Element):
        return x.matrix
    x = np.asarray(x, dtype=complex)
    if x.ndim == 1:
        return np.tensordot(x, algebra.basis, axes=1)
    return x


@dataclass(frozen=True, eq=False)
class Element:
    """A coefficient vector over the basis of ``algebra``."""

    algebra: GradedAlgebra
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (self.algebra.size,):
            raise ValueError(
                f"expected {self.algebra.size} coefficients, got shape {c.shape}")
        object.__setattr__(self, "coeffs", c)

    @cached_property
    def matrix(self) -> np.ndarray:
        return np.tensordot(self.coeffs, self.algebra.basis, axes=1)

    def norm(self) -> float:
        """Operator norm of the ambient matrix."""
        return float(np.linalg.norm(self.matrix, 2))

    def _same(self, other: "Element") -> None:
        if other.algebra is not self.algebra:
            raise ValueError("elements belong to different algebras")

    def __add__(self, other: "Element") -> "Element":
        self._same(other)
        return Element(self.algebra, self.coeffs + other.coeffs)

    def __sub__(self, other: "Element") -> "Element":
        self._same(other)
        return Element(self.algebra, self.coeffs - other.coeffs)

    def __neg__(self) -> "Element":
        return Element(self.algebra, -self.coeffs)

    def __mul__(self, scalar: complex) -> "Element":
        return Element(self.algebra, self.coeffs * scalar)

    __rmul__ = __mul__

    def __matmul__(self, other: "Element") -> "Element":
        return multiply(self, other)

    def allclose(self, other: "Element", atol: float = 1e-12) -> bool:
        self._same(other)
        return bool(np.allclose(self.coeffs, other.coeffs, rtol=0, atol=atol))


# -- element constructors -------------------------------------------------------

def element(algebra: GradedAlgebra, coeffs: Sequence[complex] | np.ndarray) -> Element:
    return Element(algebra, np.asarray(coeffs, dtype=complex))


def basis_element(algebra: GradedAlgebra, i: int) -> Element:
    c = np.zeros(algebra.size, dtype=complex)
    c[i] = 1.0
    return Element(algebra, c)


def unit(algebra: GradedAlgebra) -> Element:
    return Element(algebra, algebra.identity_coeffs.copy())


def from_matrix(algebra: GradedAlgebra, mat: np.ndarray) -> Element:
    """Element whose ambient matrix is ``mat``; raises NotClosed outside the span."""
    return Element(algebra, algebra.coords(mat))


def random_element(algebra: GradedAlgebra, rng: np.random.Generator) -> Element:
    m = algebra.size
    return Element(algebra, rng.standard_normal(m) + 1j * rng.standard_normal(m))


# -- arithmetic -------------------------------------------------------------------

def multiply(x: Element, y: Element) -> Element:
    x._same(y)
    A = x.algebra
    prod = x.matrix @ y.matrix
    scale = max(np.linalg.norm(x.matrix) * np.linalg.norm(y.matrix), 1e-300)
    return Element(A, A.coords(prod, scale))


def star(x: Element) -> Element:
    A = x.algebra
    adj = x.matrix.conj().T
    return Element(A, A.coords(adj, max(np.linalg.norm(adj), 1e-300)))


def grading_apply(x: Element) -> Element:
    """``theta(x) = v x v``."""
    A = x.algebra
    v = A.grading_unitary
    img = v @ x.matrix @ v
    return Element(A, A.coords(img, max(np.linalg.norm(img), 1e-300)))


def grade_split(x: Element) -> tuple[Element, Element]:
    """Even and odd parts ``((x + theta x)/2, (x - theta x)/2)``."""
    tx = grading_apply(x)
    return (x + tx) * 0.5, (x - tx) * 0.5


def conditional_expectation_even(x: Element) -> Element:
    """The conditional expectation ``(id + theta)/2`` onto the even part."""
    return grade_split(x)[0]


def is_homogeneous(x: Element, tol: float | None = None) -> int | None:
    """+1 if ``x`` is even, -1 if odd, ``None`` if mixed.

    The zero element counts as even.
    """
    tol = x.algebra.tol if tol is None else tol
    nrm = np.linalg.norm(x.matrix)
    if nrm == 0.0:
        return 1
    plus, minus = grade_split(x)
    if np.linalg.norm(minus.matrix) <= tol * nrm:
        return 1
    if np.linalg.norm(plus.matrix) <= tol * nrm:
        return -1
    return None


# -- construction and validation ---------------------------------------------

def build_algebra(
    basis: Iterable[np.ndarray] | np.ndarray,
    grades: Iterable[int],
    grading_unitary: np.ndarray,
    identity_coeffs: Sequence[complex] | np.ndarray | None = None,
    name: str = "algebra",
    tol: float = DEFAULT_TOL,
    check_closure: bool = True,
) -> GradedAlgebra:
    """Validate an algebra description and return the :class:`GradedAlgebra`.

    Args:
        basis: basis matrices, all square of the same dimension.
        grades: +1 / -1 per basis matrix.
        grading_unitary: self-adjoint unitary ``v`` implementing the grading.
        identity_coeffs: coordinates of the algebra unit. When omitted the
            ambient identity is used, which must then lie in the span.
        name: label.
        tol: relative tolerance of all checks.
        check_closure: verify that products and adjoints stay in the span.
            Costs ``O(m^2 d^3)``; callers building algebras whose closure is
            guaranteed by construction may skip it.

    Raises:
        GradingNotInvolutive, NotHomogeneous, DependentBasis, NotClosed, NoUnit
    """
    B = np.asarray([np.asarray(b, dtype=complex) for b in basis])
    if B.ndim != 3 or B.shape[0] == 0 or B.shape[1] != B.shape[2]:
        raise ValueError("basis must be a nonempty list of square matrices of equal size")
    m, d, _ = B.shape
    g = np.asarray(list(grades), dtype=int)
    if g.shape != (m,) or not np.all(np.isin(g, (-1, 1))):
        raise ValueError("grades must be one +1/-1 entry per basis element")
    v = np.asarray(grading_unitary, dtype=complex)
    if v.shape != (d, d):
        raise ValueError(f"grading unitary must be {d}x{d}")

    eye = np.eye(d)
    if (np.linalg.norm(v - v.conj().T) > tol * d
            or np.linalg.norm(v @ v - eye) > tol * d):
        raise GradingNotInvolutive(f"{name}: grading unitary must satisfy v = v* and v^2 = 1")

    norms = np.linalg.norm(B.reshape(m, -1), axis=1)
    if np.any(norms == 0):
        raise DependentBasis(f"{name}: zero basis matrix")
    twisted = v @ B @ v - g[:, None, None] * B
    bad = np.linalg.norm(twisted.reshape(m, -1), axis=1) > tol * norms
    if np.any(bad):
        raise NotHomogeneous(
            f"{name}: basis element(s) {np.flatnonzero(bad).tolist()} are not "
            f"homogeneous of the declared grade")

    A = GradedAlgebra(name, B, g, v, np.zeros(m, dtype=complex), tol)
    ev = np.linalg.eigvalsh(A.basis_gram)
    if ev[0] <= tol * ev[-1] * m:
        raise DependentBasis(f"{name}: basis is linearly dependent")

    if check_closure:
        A.star_matrix  # noqa: B018 - raises NotClosed
        for i in range(m):
            A.coords_many(B[i] @ B, norms[i] * norms)

    if identity_coeffs is None:
        try:
            ident = A.coords(eye, float(np.sqrt(d)))
        except NotClosed:
            raise NoUnit(f"{name}: ambient identity not in span; give identity_coeffs") from None
    else:
        ident = np.asarray(identity_coeffs, dtype=complex)
        if ident.shape != (m,):
            raise ValueError("identity_coeffs has the wrong length")
    one = np.tensordot(ident, B, axes=1)
    left = np.linalg.norm((one @ B - B).reshape(m, -1), axis=1)
    right = np.linalg.norm((B @ one - B).reshape(m, -1), axis=1)
    if np.any(left > tol * norms * max(1.0, np.linalg.norm(one))) or np.any(
            right > tol * norms * max(1.0, np.linalg.norm(one))):
        raise NoUnit(f"{name}: identity_coeffs do not give a two-sided unit")
    return GradedAlgebra(name, B, g, v, ident, tol)


# -- presets ------------------------------------------------------------------

PRESET_NAMES = ("car(1)", "car(2)", "car(3)", "car(4)", "m2_trivial", "c2_swap")
_CAR_RE = re.compile(r"^car\(?\s*(\d+)\s*\)?$")


def _car(k: int, tol: float) -> GradedAlgebra:
    # Jordan-Wigner form of the k-site Klein construction: the letter at site s
    # carries Z when an odd number of odd letters sit to its right.
    words = list(itertools.product(range(4), repeat=k))
    basis = []
    grades = []
    ident = np.zeros(len(words), dtype=complex)
    for idx, w in enumerate(words):
        par = [_CAR1_GRADES[a] < 0 for a in w]
        mat = np.ones((1, 1), dtype=complex)
        for s, a in enumerate(w):
            letter = _E[a] @ _Z if sum(par[s + 1:]) % 2 else _E[a]
            mat = np.kron(mat, letter)
        basis.append(mat)
        grades.append(-1 if sum(par) % 2 else 1)
        if all(a in (0, 3) for a in w):
            ident[idx] = 1.0
    v = np.ones((1, 1), dtype=complex)
    for _ in range(k):
        v = np.kron(v, _Z)
    return build_algebra(basis, grades, v, ident, name=f"car({k})", tol=tol,
                         check_closure=k <= 3)


def preset(name: str, tol: float = DEFAULT_TOL) -> GradedAlgebra:
    """Built-in algebras.

    ``car(k)`` (k <= 4) is the Jordan-Wigner realization of k fermion modes in
    ``M_{2^k}`` with grading ``diag(1,-1)^{(x)k}`` and basis of Jordan-Wigner
    matrix-unit words. ``m2_trivial`` is ``M_2`` with the trivial grading.
    ``c2_swap`` is the diagonal algebra of ``M_2`` with the grading exchanging
    the two diagonal entries.
    """
    key = name.strip().lower().replace(" ", "")
    m = _CAR_RE.match(key)
    if m:
        k = int(m.group(1))
        if not 1 <= k <= 4:
            raise UnknownPreset(f"car(k) preset needs 1 <= k <= 4, got {k}")
        return _car(k, tol)
    if key == "m2_trivial":
        return build_algebra(_E, [1, 1, 1, 1], np.eye(2), [1, 0, 0, 1],
                             name="m2_trivial", tol=tol)
    if key == "c2_swap":
        return build_algebra([np.eye(2), _Z], [1, -1], np.array([[0, 1], [1, 0]]),
                             [1, 0], name="c2_swap", tol=tol)
    raise UnknownPreset(f"unknown preset {name!r}; known: {', '.join(PRESET_NAMES)}")


# -- JSON ----------------------------------------------------------------------------

def algebra_to_json(A: GradedAlgebra) -> dict:
    return {
        "name": A.name,
        "ambient_dim": int(A.ambient_dim),
        "basis": [{"grade": int(g), "matrix": encode_complex(b)}
                  for g, b in zip(A.grades, A.basis)],
        "grading_unitary": encode_complex(A.grading_unitary),
        "identity_coeffs": encode_complex(A.identity_coeffs),
    }


def algebra_from_json(data: dict, tol: float = DEFAULT_TOL) -> GradedAlgebra:
    """Parse and validate the algebra JSON schema."""
    try:
        basis = [decode_complex(b["matrix"]) for b in data["basis"]]
        grades = [int(b["grade"]) for b in data["basis"]]
        v = decode_complex(data["grading_unitary"])
        ident = data.get("identity_coeffs")
        ident = None if ident is None else decode_complex(ident)
        d = int(data.get("ambient_dim", basis[0].shape[0] if basis else 0))
    except (KeyError, TypeError, IndexError) as exc:
        raise ValueError(f"malformed algebra JSON: {exc}") from exc
    if any(b.shape != (d, d) for b in basis):
        raise ValueError("basis matrices do not match ambient_dim")
    return build_algebra(basis, grades, v, ident, name=str(data.get("name", "algebra")), tol=tol)
