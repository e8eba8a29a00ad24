"""Fermi (graded) tensor product of two graded algebras.

Two independent realizations are kept side by side:

* the Klein model, an ordinary matrix algebra in ``C^{d_A} (x) C^{d_B}`` whose
  basis element for the pair ``(i, j)`` is ``a_i v_A^{s(j)} (x) b_j`` with
  ``s(j) = 1`` exactly when ``b_j`` is odd;
* the Koszul rule, which multiplies and conjugates formal sums of basis pairs
  directly from the structure constants of the factors and the sign
  ``eps(a, b) = -1`` iff both are odd.

The two agree (``klein_koszul_residual``); this is the central correctness
check of the construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import NeitherEven
from .graded import DEFAULT_TOL, Element, GradedAlgebra, build_algebra, random_element, star
from .states import STATE_TOL, State, gns_norm, is_even, state_from_values

__all__ = [
    "epsilon",
    "FermiProduct",
    "fermi_tensor",
    "koszul_multiply",
    "koszul_star",
    "product_grading",
    "product_functional_values",
    "product_functional",
    "klein_pullback_values",
    "minimal_norm",
    "minimal_norm_check",
    "sampled_gns_sup",
    "klein_koszul_residual",
    "faithful_even_pairs",
]

# above this many product basis elements the closure check is skipped
_CHECK_LIMIT = 256


def epsilon(grade_a: int, grade_b: int) -> int:
    """Koszul sign: -1 when both grades are odd, +1 otherwise."""
    if grade_a not in (1, -1) or grade_b not in (1, -1):
        raise ValueError("grades must be +1 or -1")
    return -1 if grade_a == -1 and grade_b == -1 else 1


def _eps_table(ga: np.ndarray, gb: np.ndarray) -> np.ndarray:
    return np.where((ga[:, None] < 0) & (gb[None, :] < 0), -1.0, 1.0)


@dataclass(frozen=True, eq=False)
class FermiProduct:
    left: GradedAlgebra
    right: GradedAlgebra
    product: GradedAlgebra

    def pair_index(self, i: int, j: int) -> int:
        return i * self.right.size + j

    def pair(self, k: int) -> tuple[int, int]:
        return divmod(k, self.right.size)

    def klein_map(self, i: int, j: int) -> np.ndarray:
        a = self.left.basis[i]
        if self.right.grades[j] < 0:
            a = a @ self.left.grading_unitary
        return np.kron(a, self.right.basis[j])

    def elementary(self, a: Element, b: Element) -> Element:
        """``a (F) b`` for arbitrary (not necessarily homogeneous) ``a``, ``b``."""
        if a.algebra is not self.left or b.algebra is not self.right:
            raise ValueError("factors do not match the product")
        return Element(self.product, np.outer(a.coeffs, b.coeffs).ravel())

    def pair_coeffs(self, x: Element) -> np.ndarray:
        if x.algebra is not self.product:
            raise ValueError("element is not in this product")
        return x.coeffs.reshape(self.left.size, self.right.size)


def fermi_tensor(A: GradedAlgebra, B: GradedAlgebra, check: bool | None = None,
                 name: str | None = None) -> FermiProduct:
    """Klein-model realization of the Fermi product of ``A`` and ``B``.

    Args:
        check: run the full closure validation on the product. Defaults to
            doing so for products with at most 256 basis elements.
    """
    mA, mB = A.size, B.size
    check = (mA * mB <= _CHECK_LIMIT) if check is None else check
    basis = np.empty((mA * mB, A.ambient_dim * B.ambient_dim, A.ambient_dim * B.ambient_dim),
                     dtype=complex)
    left_twisted = A.basis @ A.grading_unitary
    for j in range(mB):
        lefts = left_twisted if B.grades[j] < 0 else A.basis
        for i in range(mA):
            basis[i * mB + j] = np.kron(lefts[i], B.basis[j])
    grades = np.multiply.outer(A.grades, B.grades).ravel()
    v = np.kron(A.grading_unitary, B.grading_unitary)
    ident = np.outer(A.identity_coeffs, B.identity_coeffs).ravel()
    prod = build_algebra(basis, grades, v, ident,
                         name=name or f"{A.name} (F) {B.name}",
                         tol=max(A.tol, B.tol, DEFAULT_TOL), check_closure=check)
    return FermiProduct(A, B, prod)


def koszul_multiply(P: FermiProduct, x: Element, y: Element) -> Element:
    """Product of formal sums by the sign rule, without the Klein model.

    ``(a (F) b)(A (F) B) = eps(b, A) aA (F) bB``, extended bilinearly.
    """
    X, Y = P.pair_coeffs(x), P.pair_coeffs(y)
    eps = _eps_table(P.right.grades, P.left.grades)  # eps[j, k]: b_j vs a_k
    # T[i, j, k, l] = eps(j, k) X[i, j] Y[k, l]; then contract (i, k) and (j, l)
    T = X[:, :, None, None] * eps[None, :, :, None] * Y[None, None, :, :]
    Z = np.tensordot(T, P.left.structure_constants, axes=([0, 2], [0, 1]))
    Z = np.tensordot(Z, P.right.structure_constants, axes=([0, 1], [0, 1]))
    return Element(P.product, Z.ravel())


def koszul_star(P: FermiProduct, x: Element) -> Element:
    """``(a (F) b)^* = eps(a, b) a^* (F) b^*``, extended antilinearly."""
    X = P.pair_coeffs(x)
    eps = _eps_table(P.left.grades, P.right.grades)
    Z = P.left.star_matrix @ (eps * X.conj()) @ P.right.star_matrix.T
    return Element(P.product, Z.ravel())


def product_grading(P: FermiProduct, x: Element) -> Element:
    """``alpha (F) beta`` applied pairwise: pair (i, j) picks up ``grade_i * grade_j``."""
    X = P.pair_coeffs(x)
    return Element(P.product, (X * np.multiply.outer(P.left.grades, P.right.grades)).ravel())


# -- product functionals ----------------------------------------------------------

def product_functional_values(omega: State, phi: State) -> np.ndarray:
    """Raw values ``omega(a_i) phi(b_j)`` on the pair basis; no positivity check."""
    return np.outer(omega.values, phi.values).ravel()


def product_functional(omega: State, phi: State, product: FermiProduct | None = None,
                       tol: float = STATE_TOL) -> State:
    """The product state ``omega x phi``.

    Raises:
        NeitherEven: neither factor is even (the functional is then not
            positive in general; use :func:`product_functional_values` to
            inspect it).
    """
    if not (is_even(omega, tol) or is_even(phi, tol)):
        raise NeitherEven("product functional needs at least one even factor")
    P = product or fermi_tensor(omega.algebra, phi.algebra)
    if P.left is not omega.algebra or P.right is not phi.algebra:
        raise ValueError("product does not match the factor algebras")
    values = product_functional_values(omega, phi)
    if P.product.size <= 4096:
        return state_from_values(P.product, values, tol)
    return state_from_values(P.product, values, tol, certificate="product with an even factor")


def klein_pullback_values(rho_A: np.ndarray, rho_B: np.ndarray, P: FermiProduct) -> np.ndarray:
    """Values of the ordinary product state ``tr((rho_A (x) rho_B) .)`` on the Klein basis."""
    rho = np.kron(rho_A, rho_B)
    return np.einsum("ab,iba->i", rho, P.product.basis)


# -- norms --------------------------------------------------------------------------

def minimal_norm(c) -> float:
    """Minimal C*-norm of an element of a Fermi product.

    In finite dimensions the C*-norm is unique, so it equals the operator norm
    of the element in the (faithful) Klein realization.  Accepts elements of a
    :class:`FermiProduct` product algebra, of any graded algebra, or
    :class:`~fermi_definetti.power.PowerElement` instances.
    """
    mat = c.klein_matrix() if hasattr(c, "klein_matrix") else c.matrix
    return float(np.linalg.norm(mat, 2))


def minimal_norm_check(c: Element, P: FermiProduct, samples: int = 8,
                       seed: int = 0) -> tuple[float, float]:
    """``(Klein operator norm, sup of GNS norms over sampled faithful even product states)``.

    The second number is a lower bound for the first and equals it whenever a
    sampled product state is faithful, which random full-rank even densities are.
    """
    rng = np.random.default_rng(seed)
    pairs = faithful_even_pairs(P.left, P.right, samples, rng)
    return minimal_norm(c), sampled_gns_sup(c, P, pairs)


def sampled_gns_sup(c: Element, P: FermiProduct,
                    pairs: Iterable[tuple[State, State]]) -> float:
    """``max ||pi_{phi x psi}(c)||`` over the given pairs of even states."""
    best = 0.0
    for phi, psi in pairs:
        best = max(best, gns_norm(c, product_functional(phi, psi, P)))
    return best


def klein_koszul_residual(P: FermiProduct, rng: np.random.Generator, samples: int) -> float:
    """Worst coefficient mismatch between Klein-model and Koszul products and stars."""
    worst = 0.0
    for _ in range(samples):
        x = random_element(P.product, rng)
        y = random_element(P.product, rng)
        scale = max(1.0, np.max(np.abs(x.coeffs)) * np.max(np.abs(y.coeffs)))
        d1 = np.max(np.abs((x @ y).coeffs - koszul_multiply(P, x, y).coeffs)) / scale
        d2 = np.max(np.abs(star(x).coeffs - koszul_star(P, x).coeffs)) / max(
            1.0, np.max(np.abs(x.coeffs)))
        worst = max(worst, d1, d2)
    return float(worst)


def faithful_even_pairs(A: GradedAlgebra, B: GradedAlgebra, count: int,
                        rng: np.random.Generator) -> list[tuple[State, State]]:
    """Random faithful even states on each factor (full-rank densities commuting with ``v``)."""
    out = []
    for _ in range(count):
        out.append((_faithful_even(A, rng), _faithful_even(B, rng)))
    return out


def _faithful_even(A: GradedAlgebra, rng: np.random.Generator) -> State:
    from .states import random_density, state_from_density
    v = A.grading_unitary
    rho = random_density(A.ambient_dim, rng)
    rho = 0.5 * (rho + v @ rho @ v)
    return state_from_density(A, rho / np.trace(rho).real)
