"""Finite Fermi tensor powers, site embeddings and the signed permutation action.

The n-fold power of a site algebra ``B`` (basis size ``m``) has the basis of
words ``w = (w_0, ..., w_{n-1})``, indexed row-major, which is the indexing
produced by left-nested :func:`~fermi_definetti.fermi_product.fermi_tensor`.
In the Klein realization the word ``w`` is the matrix

    ``b_{w_0} v^{r_0} (x) b_{w_1} v^{r_1} (x) ... (x) b_{w_{n-1}}``

where ``r_s`` is the parity of the number of odd letters to the right of site
``s`` (a Jordan-Wigner string).

Nothing here needs the Klein matrices.  States are value tensors of shape
``(m,) * n``, elements are sums of elementary tensors of homogeneous site
elements, and all signs are computed from letter parities:

* product: ``(x_0 .. x_{n-1})(y_0 .. y_{n-1}) = (-1)^{sum_{s>t} p_s q_t} (x_0 y_0 .. )``
* star:    ``(x_0 .. x_{n-1})^* = (-1)^{sum_{s<t} p_s p_t} (x_0^* .. x_{n-1}^*)``
* action:  ``alpha_g`` moves the letter at slot ``k`` to slot ``g(k)`` with sign
  ``(-1)^{number of odd pairs whose order g reverses}``.

The materialized :class:`~fermi_definetti.graded.GradedAlgebra` is available
lazily (``FermiPower.product``) for small powers and is used as the oracle in
the tests.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache, reduce
from typing import Any, Callable, Iterator, Sequence

import numpy as np

from .errors import (
    BudgetExceeded,
    InsufficientSites,
    NotABijection,
    NotEvenFactor,
    NotHomogeneous,
    NotSymmetric,
    SiteOutOfRange,
)
from .graded import Element, GradedAlgebra
from .states import STATE_TOL, State, is_even, state_from_values

__all__ = [
    "BASIS_BUDGET",
    "GRAM_BUDGET",
    "FermiPower",
    "PowerElement",
    "Permutation",
    "MeanEstimate",
    "fermi_power",
    "embed_site",
    "local_element",
    "as_power_element",
    "extend",
    "power_unit",
    "random_power_element",
    "permute",
    "permutation_matrix",
    "adjacent",
    "random_decomposition",
    "stormer_sequence",
    "literal_stormer_map",
    "product_state_power",
    "mixed_product_state",
    "product_density_state",
    "compose_state",
    "symmetrize",
    "symmetry_defect",
    "is_symmetric",
    "require_symmetric",
    "restrict",
    "ergodic_mean",
    "EXACT_LIMIT",
]

BASIS_BUDGET = 65536        # words in a FermiPower
GRAM_BUDGET = 1024          # words for Gram matrices, GNS and left multiplication
MATERIALIZE_BUDGET = 1 << 22  # words * ambient_dim**2 for the Klein basis
KLEIN_BUDGET = 1 << 10      # ambient dimension for Klein matrices of elements
EXACT_LIMIT = 8             # exact S_n enumeration up to this n


def _inversion_sign_tensor(odd: np.ndarray, pairs: Sequence[tuple[int, int]], n: int) -> np.ndarray:
    """``prod_{(k,l) in pairs} (-1)^{odd[w_k] odd[w_l]}`` as a tensor over words."""
    m = odd.size
    out = np.ones((m,) * n)
    pair_sign = np.where(np.outer(odd, odd), -1.0, 1.0)
    for k, l in pairs:
        shape = [1] * n
        shape[k], shape[l] = m, m
        mat = pair_sign if k < l else pair_sign.T
        out = out * mat.reshape(shape)
    return out


# -- permutations ---------------------------------------------------------------

@dataclass(frozen=True)
class Permutation:
    """A bijection of ``{0, ..., n-1}`` given by its images."""

    images: tuple[int, ...]

    def __post_init__(self) -> None:
        im = tuple(int(i) for i in self.images)
        if sorted(im) != list(range(len(im))):
            raise NotABijection(f"{list(im)} is not a permutation of 0..{len(im) - 1}")
        object.__setattr__(self, "images", im)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(n)))

    @classmethod
    def transposition(cls, n: int, i: int, j: int) -> "Permutation":
        im = list(range(n))
        im[i], im[j] = j, i
        return cls(tuple(im))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "Permutation":
        return cls(tuple(int(i) for i in rng.permutation(n)))

    @property
    def n(self) -> int:
        return len(self.images)

    def __call__(self, k: int) -> int:
        return self.images[k]

    def compose(self, other: "Permutation") -> "Permutation":
        """``self o other``: apply ``other`` first."""
        if other.n != self.n:
            raise ValueError("permutations act on different numbers of sites")
        return Permutation(tuple(self.images[k] for k in other.images))

    __matmul__ = compose

    def inverse(self) -> "Permutation":
        inv = [0] * self.n
        for k, g in enumerate(self.images):
            inv[g] = k
        return Permutation(tuple(inv))

    def inversions(self) -> list[tuple[int, int]]:
        im = self.images
        return [(k, l) for k in range(self.n) for l in range(k + 1, self.n) if im[k] > im[l]]

    def adjacent_decomposition(self, rng: np.random.Generator | None = None) -> list[int]:
        """Indices ``j`` with ``g = s_{j_1} s_{j_2} ... s_{j_r}``, ``s_j = (j j+1)``.

        Bubble sort on positions; with ``rng`` the descent swapped at each step
        is chosen at random, giving a random reduced word.
        """
        im = list(self.images)
        steps = []
        while True:
            desc = [j for j in range(len(im) - 1) if im[j] > im[j + 1]]
            if not desc:
                break
            j = desc[0] if rng is None else desc[int(rng.integers(len(desc)))]
            im[j], im[j + 1] = im[j + 1], im[j]
            steps.append(j)
        return steps[::-1]

    def to_json(self) -> list[int]:
        return list(self.images)


def adjacent(n: int, j: int) -> Permutation:
    if not 0 <= j < n - 1:
        raise SiteOutOfRange(f"adjacent transposition ({j} {j + 1}) outside {n} sites")
    return Permutation.transposition(n, j, j + 1)


def random_decomposition(g: Permutation, rng: np.random.Generator, padding: int = 2) -> list[int]:
    """A random (generally non-reduced) adjacent-transposition word for ``g``.

    A random reduced word with ``padding`` cancelling pairs ``s_j s_j``
    inserted at random positions.
    """
    word = g.adjacent_decomposition(rng)
    if g.n < 2:
        return word
    for _ in range(padding):
        j = int(rng.integers(g.n - 1))
        pos = int(rng.integers(len(word) + 1))
        word[pos:pos] = [j, j]
    return word


def stormer_sequence(m: int, n: int) -> Permutation:
    """Block swap of ``[0, 2^m)`` and ``[2^m, 2^{m+1})`` on ``n`` sites.

    Raises:
        InsufficientSites: ``2^{m+1} > n``.
    """
    if m < 0:
        raise ValueError("m must be nonnegative")
    h = 1 << m
    if 2 * h > n:
        raise InsufficientSites(f"block swap at m={m} needs {2 * h} sites, have {n}")
    im = [k + h if k < h else (k - h if k < 2 * h else k) for k in range(n)]
    return Permutation(tuple(im))


def literal_stormer_map(m: int, n: int) -> Permutation:
    """The mixing map with closed index ranges ``0 <= k <= 2^m`` and ``2^m < k <= 2^{m+1}``.

    Kept to document why the block swap uses half-open ranges: this version
    is not injective, so constructing it raises.

    Raises:
        NotABijection: always for ``n > 2^{m+1}``.
        InsufficientSites: ``n <= 2^{m+1}`` (the map leaves the index range).
    """
    h = 1 << m
    if n <= 2 * h:
        raise InsufficientSites(f"literal map at m={m} needs more than {2 * h} sites")
    im = [k + h if k <= h else (k - h if k <= 2 * h else k) for k in range(n)]
    return Permutation(tuple(im))


# -- the power --------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FermiPower:
    """The ``n``-site Fermi power of ``site``.

    Satisfies the same small interface as
    :class:`~fermi_definetti.graded.GradedAlgebra` used by states and GNS.
    """

    site: GradedAlgebra
    sites: int
    budget: int = BASIS_BUDGET

    def __post_init__(self) -> None:
        if self.sites < 1:
            raise ValueError("need at least one site")
        if self.site.size ** self.sites > self.budget:
            raise BudgetExceeded(
                f"{self.site.size}^{self.sites} words exceed the budget of {self.budget}")

    @property
    def site_algebra(self) -> GradedAlgebra:
        return self.site

    @property
    def name(self) -> str:
        return f"{self.site.name}^{self.sites}"

    @property
    def tol(self) -> float:
        return self.site.tol

    @property
    def m(self) -> int:
        return self.site.size

    @property
    def size(self) -> int:
        return self.m ** self.sites

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.m,) * self.sites

    @property
    def ambient_dim(self) -> int:
        return self.site.ambient_dim ** self.sites

    def __repr__(self) -> str:
        return f"FermiPower({self.site.name!r}, sites={self.sites})"

    # words
    def word(self, k: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(k, self.shape))

    def word_index(self, word: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(word), self.shape))

    @cached_property
    def site_odd(self) -> np.ndarray:
        return (self.site.grades < 0).astype(int)

    @cached_property
    def parities(self) -> np.ndarray:
        """``(N, n)`` array of letter parities per word."""
        idx = np.indices(self.shape).reshape(self.sites, -1).T
        return self.site_odd[idx]

    @cached_property
    def grades(self) -> np.ndarray:
        return np.where(self.parities.sum(axis=1) % 2, -1, 1)

    @cached_property
    def grading_unitary(self) -> np.ndarray:
        return reduce(np.kron, [self.site.grading_unitary] * self.sites)

    @cached_property
    def unit_coeffs(self) -> np.ndarray:
        return reduce(np.multiply.outer, [self.site.unit_coeffs] * self.sites).ravel()

    @property
    def identity_coeffs(self) -> np.ndarray:
        return self.unit_coeffs

    @cached_property
    def star_sign(self) -> np.ndarray:
        """Tensor ``(-1)^{sum_{s<t} p_s p_t}`` over words."""
        n = self.sites
        return _inversion_sign_tensor(self.site_odd.astype(bool),
                                      [(s, t) for s in range(n) for t in range(s + 1, n)], n)

    # lazy Klein realization
    @cached_property
    def product(self) -> GradedAlgebra:
        """Materialized left-nested Klein model (budget permitting)."""
        from .fermi_product import fermi_tensor
        if self.size * self.ambient_dim ** 2 > MATERIALIZE_BUDGET:
            raise BudgetExceeded(f"materializing {self.name} exceeds the Klein budget")
        alg = self.site
        for _ in range(self.sites - 1):
            alg = fermi_tensor(alg, self.site, check=False).product
        return alg

    def word_matrix(self, word: Sequence[int]) -> np.ndarray:
        """Klein matrix of a basis word (Jordan-Wigner form)."""
        letters = [np.eye(self.m)[w] for w in word]
        return PowerElement(self, ((1.0, tuple(letters), tuple(self.site_odd[list(word)])),)
                            ).klein_matrix()

    # functionals
    def _apply_sites(self, values: np.ndarray, mat: np.ndarray) -> np.ndarray:
        """Apply ``mat`` along every site axis of a value tensor."""
        t = np.asarray(values).reshape(self.shape)
        for s in range(self.sites):
            t = np.moveaxis(np.tensordot(mat, t, axes=(1, s)), 0, s)
        return t

    def star_values(self, values: np.ndarray) -> np.ndarray:
        t = self._apply_sites(values, self.site.star_matrix.T) * self.star_sign
        return t.ravel()

    def grade_values(self, values: np.ndarray) -> np.ndarray:
        return self._apply_sites(values, self.site.grading_matrix.T).ravel()

    @cached_property
    def _site_star_product(self) -> np.ndarray:
        # T[a, j, k]: coefficient of b_k in b_a^* b_j
        S, C = self.site.star_matrix, self.site.structure_constants
        return np.einsum("la,ljk->ajk", S, C)

    def gram(self, values: np.ndarray) -> np.ndarray:
        """``G[u, w] = omega(b_u^* b_w)``."""
        N, n = self.size, self.sites
        if N > GRAM_BUDGET:
            raise BudgetExceeded(f"Gram matrix of {N} words exceeds the budget of {GRAM_BUDGET}")
        T = self._site_star_product
        t = np.asarray(values).reshape(self.shape)
        # contract the last value axis each time; new (a, j) axes go to the front
        for _ in range(n):
            t = np.tensordot(T, t, axes=(2, t.ndim - 1))
        # axes now (a_0, j_0, a_1, j_1, ...)
        order = [2 * s for s in range(n)] + [2 * s + 1 for s in range(n)]
        G = np.transpose(t, order).reshape(N, N)
        p = self.parities
        right = np.cumsum(p[:, ::-1], axis=1)[:, ::-1] - p  # parities strictly right of t
        # (-1)^{sum_{s>t} p_s(u) q_t(w)}
        sign = np.where((right @ p.T) % 2, -1.0, 1.0)
        return G * sign * self.star_sign.ravel()[:, None]

    def left_mult(self, x: "PowerElement | np.ndarray") -> np.ndarray:
        """Matrix of ``y -> x y`` on word coordinates."""
        if self.size > GRAM_BUDGET:
            raise BudgetExceeded(f"left multiplication on {self.size} words exceeds the budget")
        x = as_power_element(self, x)
        p = self.parities
        out = np.zeros((self.size, self.size), dtype=complex)
        for c, letters, par in x.terms:
            right = np.cumsum(np.asarray(par)[::-1])[::-1] - np.asarray(par)
            col_sign = np.where((p @ right) % 2, -1.0, 1.0)
            L = reduce(np.kron, [self.site.left_mult(lt) for lt in letters])
            out += c * L * col_sign[None, :]
        return out

    def evaluate(self, values: np.ndarray, x: Any) -> complex:
        if isinstance(x, PowerElement):
            return x.evaluate(values)
        return complex(np.dot(np.asarray(values).ravel(), self.coeffs_of(x)))

    def basis_element(self, i: int) -> "PowerElement":
        word = self.word(i)
        eye = np.eye(self.m, dtype=complex)
        return PowerElement(self, ((1.0 + 0j, tuple(eye[w] for w in word),
                                    tuple(int(self.site_odd[w]) for w in word)),))

    def coeffs_of(self, x: Any) -> np.ndarray:
        if isinstance(x, PowerElement):
            if x.power is not self:
                raise ValueError("element belongs to a different power")
            return x.coeffs()
        if isinstance(x, Element):
            raise ValueError("expected an element of the power, got a site element")
        return np.asarray(x, dtype=complex).ravel()

    def density_values(self, rho: np.ndarray) -> np.ndarray:
        """``tr(rho K_w)`` for every word, ``K_w`` the Klein matrix of the word."""
        d, n, m = self.site.ambient_dim, self.sites, self.m
        rho = np.asarray(rho, dtype=complex)
        if rho.shape != (d ** n, d ** n):
            raise ValueError("density has the wrong ambient dimension")
        v = self.site.grading_unitary
        # letters[r, w, j, i] = (b_w v^r)[j, i]
        letters = np.stack([self.site.basis, self.site.basis @ v])
        odd = self.site_odd
        # T[r, rows_<s, cols_<s, words_>=s] with r the parity of letters placed so far
        t = rho.reshape((d,) * n + (d,) * n)
        T = [t, np.zeros_like(t)]
        for s in range(n - 1, -1, -1):
            new = [0, 0]
            mask_shape = (1,) * (2 * s) + (m,) + (1,) * (n - 1 - s)
            for r in (0, 1):
                # contract (i_s, j_s); the new word axis w_s goes in front of w_{>s}
                X = np.tensordot(T[r], letters[r], axes=([s, 2 * s + 1], [2, 1]))
                X = np.moveaxis(X, -1, 2 * s)
                for q in (0, 1):
                    new[r ^ q] = new[r ^ q] + X * (odd == q).reshape(mask_shape)
            T = new
        return (T[0] + T[1]).ravel()

    def coords_from_site(self, x: Element) -> np.ndarray:
        return self.site.coeffs_of(x)


@lru_cache(maxsize=256)
def _cached_power(B: GradedAlgebra, n: int, budget: int) -> FermiPower:
    return FermiPower(B, n, budget)


def fermi_power(B: GradedAlgebra, n: int, budget: int = BASIS_BUDGET) -> FermiPower:
    """The ``n``-site Fermi power of ``B``.

    Calls with the same site algebra and ``n`` return the same object, so
    states built separately (e.g. for a mixture) share their algebra.

    Raises:
        BudgetExceeded: more than ``budget`` basis words.
    """
    return _cached_power(B, int(n), int(budget))


# -- elements of the power ----------------------------------------------------------

Term = tuple  # (coeff, letters: tuple[np.ndarray, ...], parities: tuple[int, ...])


def _letter_parity(B: GradedAlgebra, x: np.ndarray, tol: float) -> int:
    odd = B.grades < 0
    on_odd = np.linalg.norm(x[odd])
    on_even = np.linalg.norm(x[~odd])
    if on_odd > tol * max(1.0, on_even) and on_even > tol * max(1.0, on_odd):
        raise NotHomogeneous("letter is not homogeneous")
    return int(on_odd > on_even)


def _sites_sign(par: Sequence[int], qar: Sequence[int]) -> int:
    """``(-1)^{sum_{s>t} p_s q_t}``."""
    acc, tot = 0, 0
    for t in range(len(par) - 1, -1, -1):
        tot += qar[t] * acc
        acc += par[t]
    return -1 if tot % 2 else 1


def _star_sign(par: Sequence[int]) -> int:
    k = sum(par)
    return -1 if (k * (k - 1) // 2) % 2 else 1


@dataclass(frozen=True, eq=False)
class PowerElement:
    """A finite sum of elementary tensors of homogeneous site elements."""

    power: FermiPower
    terms: tuple[Term, ...] = field(default_factory=tuple)

    @property
    def site(self) -> GradedAlgebra:
        return self.power.site

    def _same(self, other: "PowerElement") -> None:
        if other.power is not self.power:
            raise ValueError("elements belong to different powers")

    def __add__(self, other: "PowerElement") -> "PowerElement":
        self._same(other)
        return PowerElement(self.power, self.terms + other.terms)

    def __sub__(self, other: "PowerElement") -> "PowerElement":
        return self + (-other)

    def __neg__(self) -> "PowerElement":
        return self * -1.0

    def __mul__(self, scalar: complex) -> "PowerElement":
        return PowerElement(self.power, tuple((c * scalar, l, p) for c, l, p in self.terms))

    __rmul__ = __mul__

    def __matmul__(self, other: "PowerElement") -> "PowerElement":
        self._same(other)
        C = self.site.structure_constants
        out = []
        for c1, l1, p1 in self.terms:
            for c2, l2, p2 in other.terms:
                sign = _sites_sign(p1, p2)
                letters = tuple(np.einsum("i,j,ijk->k", a, b, C) for a, b in zip(l1, l2))
                par = tuple(a ^ b for a, b in zip(p1, p2))
                out.append((sign * c1 * c2, letters, par))
        return PowerElement(self.power, tuple(out))

    def star(self) -> "PowerElement":
        S = self.site.star_matrix
        return PowerElement(self.power, tuple(
            (_star_sign(p) * np.conj(c), tuple(S @ np.conj(x) for x in l), p)
            for c, l, p in self.terms))

    def grading(self) -> "PowerElement":
        return PowerElement(self.power, tuple(
            ((-1) ** (sum(p) % 2) * c, l, p) for c, l, p in self.terms))

    def coeffs(self) -> np.ndarray:
        out = np.zeros(self.power.size, dtype=complex)
        for c, l, _ in self.terms:
            out += c * reduce(np.multiply.outer, l).ravel()
        return out

    def evaluate(self, values: np.ndarray) -> complex:
        t0 = np.asarray(values).reshape(self.power.shape)
        total = 0j
        for c, l, _ in self.terms:
            t = t0
            for x in l:
                t = np.tensordot(x, t, axes=(0, 0))
            total += c * complex(t)
        return total

    def klein_matrix(self) -> np.ndarray:
        P = self.power
        if P.ambient_dim > KLEIN_BUDGET:
            raise BudgetExceeded(f"Klein matrix of dimension {P.ambient_dim} exceeds the budget")
        v = self.site.grading_unitary
        B = self.site.basis
        out = np.zeros((P.ambient_dim, P.ambient_dim), dtype=complex)
        for c, l, p in self.terms:
            mats = []
            r = 0
            for x, q in zip(l[::-1], p[::-1]):
                a = np.tensordot(x, B, axes=1)
                mats.append(a @ v if r else a)
                r ^= q
            out += c * reduce(np.kron, mats[::-1])
        return out

    def support(self) -> tuple[int, ...]:
        """Sites carrying a letter that is not a multiple of the unit."""
        one = self.site.unit_coeffs
        sites = set()
        for _, l, _ in self.terms:
            for s, x in enumerate(l):
                k = np.vdot(one, x) / np.vdot(one, one)
                if np.linalg.norm(x - k * one) > 1e-14 * max(1.0, np.linalg.norm(x)):
                    sites.add(s)
        return tuple(sorted(sites))

    def allclose(self, other: "PowerElement", atol: float = 1e-12) -> bool:
        self._same(other)
        return bool(np.allclose(self.coeffs(), other.coeffs(), rtol=0, atol=atol))


def as_power_element(P: FermiPower, x: Any) -> PowerElement:
    if isinstance(x, PowerElement):
        if x.power is not P:
            raise ValueError("element belongs to a different power")
        return x
    c = np.asarray(x, dtype=complex).reshape(P.shape)
    eye = np.eye(P.m, dtype=complex)
    terms = []
    for idx in zip(*np.nonzero(c)):
        terms.append((c[idx], tuple(eye[w] for w in idx),
                      tuple(int(P.site_odd[w]) for w in idx)))
    return PowerElement(P, tuple(terms))


def _homogeneous_parts(B: GradedAlgebra, a: Element | np.ndarray) -> list[tuple[np.ndarray, int]]:
    x = B.coeffs_of(a)
    odd = B.grades < 0
    parts = []
    if np.any(x[~odd] != 0):
        parts.append((np.where(odd, 0, x), 0))
    if np.any(x[odd] != 0):
        parts.append((np.where(odd, x, 0), 1))
    return parts or [(np.zeros_like(x), 0)]


def power_unit(P: FermiPower) -> PowerElement:
    one = P.site.unit_coeffs
    return PowerElement(P, ((1.0 + 0j, (one,) * P.sites, (0,) * P.sites),))


def local_element(P: FermiPower, placed: dict[int, Element | np.ndarray]) -> PowerElement:
    """``a_{s_1} (F) a_{s_2} ...`` with units elsewhere; the letters may be mixed."""
    one = P.site.unit_coeffs
    for s in placed:
        if not 0 <= s < P.sites:
            raise SiteOutOfRange(f"site {s} outside 0..{P.sites - 1}")
    options = []
    for s in range(P.sites):
        options.append(_homogeneous_parts(P.site, placed[s]) if s in placed else [(one, 0)])
    terms = []
    for combo in itertools.product(*options):
        terms.append((1.0 + 0j, tuple(x for x, _ in combo), tuple(p for _, p in combo)))
    return PowerElement(P, tuple(terms))


def embed_site(a: Element | np.ndarray, j: int, P: FermiPower) -> PowerElement:
    """``iota_j(a)``: ``a`` at site ``j``, units elsewhere.

    Raises:
        SiteOutOfRange: ``j`` outside ``0..n-1``.
    """
    if not 0 <= j < P.sites:
        raise SiteOutOfRange(f"site {j} outside 0..{P.sites - 1}")
    return local_element(P, {j: a})


def extend(x: PowerElement, Q: FermiPower) -> PowerElement:
    """Embed an element of ``n`` sites into ``Q`` (more sites) as ``x (F) 1``."""
    P = x.power
    if Q.site is not P.site or Q.sites < P.sites:
        raise ValueError("target power must have the same site algebra and at least as many sites")
    one = P.site.unit_coeffs
    pad = Q.sites - P.sites
    return PowerElement(Q, tuple((c, l + (one,) * pad, p + (0,) * pad) for c, l, p in x.terms))


def random_power_element(P: FermiPower, rng: np.random.Generator, terms: int = 3) -> PowerElement:
    """Random sum of elementary tensors with homogeneous random letters."""
    odd = P.site.grades < 0
    out = []
    for _ in range(terms):
        letters, par = [], []
        for _ in range(P.sites):
            q = int(rng.integers(2))
            x = rng.standard_normal(P.m) + 1j * rng.standard_normal(P.m)
            x = np.where(odd == bool(q), x, 0)
            if not np.any(x):
                q = 0
            letters.append(x)
            par.append(q)
        c = complex(rng.standard_normal() + 1j * rng.standard_normal())
        out.append((c, tuple(letters), tuple(par)))
    return PowerElement(P, tuple(out))


# -- permutation action ---------------------------------------------------------------

def _check_perm(g: Permutation, P: FermiPower) -> None:
    if g.n != P.sites:
        raise SiteOutOfRange(f"permutation of {g.n} sites applied to {P.sites} sites")


def _permute_term(g: Permutation, term: Term) -> Term:
    c, l, p = term
    n = len(l)
    letters = [None] * n
    par = [0] * n
    for k in range(n):
        letters[g.images[k]] = l[k]
        par[g.images[k]] = p[k]
    inv = sum(p[k] * p[m] for k, m in g.inversions())
    return ((-1) ** (inv % 2) * c, tuple(letters), tuple(par))


def permute(g: Permutation, x: PowerElement, P: FermiPower | None = None,
            decomposition: Sequence[int] | None = None) -> PowerElement:
    """The signed action ``alpha_g``.

    With ``decomposition`` (``g = s_{j_1} ... s_{j_r}``) the result is built by
    applying adjacent signed flips right to left; otherwise the closed-form
    sign is used.  Both agree.
    """
    P = x.power if P is None else P
    _check_perm(g, P)
    if decomposition is None:
        return PowerElement(P, tuple(_permute_term(g, t) for t in x.terms))
    terms = x.terms
    for j in reversed(list(decomposition)):
        s = adjacent(P.sites, j)
        terms = tuple(_permute_term(s, t) for t in terms)
    return PowerElement(P, terms)


def permutation_matrix(g: Permutation, P: FermiPower) -> np.ndarray:
    """Matrix of ``alpha_g`` on word coordinates (a signed permutation matrix)."""
    _check_perm(g, P)
    N = P.size
    if N > GRAM_BUDGET:
        raise BudgetExceeded(f"permutation matrix on {N} words exceeds the budget")
    idx = np.arange(N).reshape(P.shape)
    target = np.transpose(idx, g.inverse().images).ravel()
    # word w goes to the word with letter w_k at slot g(k)
    sign = _inversion_sign_tensor(P.site_odd.astype(bool), g.inversions(), P.sites).ravel()
    M = np.zeros((N, N))
    dest = np.empty(N, dtype=int)
    dest[target] = np.arange(N)
    M[dest, np.arange(N)] = sign
    return M


# -- states on the power -------------------------------------------------------------

def _state(P: FermiPower, values: np.ndarray, certificate: str, tol: float,
           check: bool | None = None) -> State:
    check = (P.size <= 256) if check is None else check
    return state_from_values(P, values.ravel(), tol, certificate=None if check else certificate)


def product_state_power(phi: State, n: int | FermiPower, tol: float = STATE_TOL) -> State:
    """``phi x phi x ... x phi`` on ``n`` sites.

    Raises:
        NotEvenFactor: ``phi`` is not even.
    """
    P = n if isinstance(n, FermiPower) else fermi_power(phi.algebra, n)
    return mixed_product_state([phi] * P.sites, P, tol)


def mixed_product_state(states: Sequence[State], power: FermiPower | None = None,
                        tol: float = STATE_TOL) -> State:
    """``phi_0 x phi_1 x ...`` for even states on one site algebra.

    Raises:
        NotEvenFactor: some factor is not even.
    """
    if not states:
        raise ValueError("need at least one factor")
    B = states[0].algebra
    if any(s.algebra is not B for s in states):
        raise ValueError("factors live on different algebras")
    for k, s in enumerate(states):
        if not is_even(s, tol):
            raise NotEvenFactor(f"factor {k} is not even")
    P = power or fermi_power(B, len(states))
    if P.site is not B or P.sites != len(states):
        raise ValueError("power does not match the factors")
    values = reduce(np.multiply.outer, [s.values for s in states])
    return _state(P, values, "product of even states", tol)


def product_density_state(P: FermiPower, site_densities: Sequence[np.ndarray],
                          tol: float = STATE_TOL) -> State:
    """The state of the ambient density ``rho_0 (x) ... (x) rho_{n-1}`` in the Klein model.

    Unlike :func:`mixed_product_state` the site densities need not be even, so
    the result is in general not even.  Values are computed site by site from
    the right, tracking the parity of the odd letters already placed.
    """
    if len(site_densities) != P.sites:
        raise ValueError("need one density per site")
    B = P.site
    v = B.grading_unitary
    odd = P.site_odd
    # site tables tr(rho b_w v^r)
    tabs = [np.stack([np.einsum("ab,wba->w", r, B.basis),
                      np.einsum("ab,wba->w", r, B.basis @ v)]) for r in site_densities]
    # acc[r] : tensor over words of sites >= s, r = parity of their odd letters
    acc = [np.ones(()), np.zeros(())]
    for s in range(P.sites - 1, -1, -1):
        new = [None, None]
        for q in (0, 1):
            parts = []
            for r in (0, 1):
                # letter parity must equal q xor r for the new total parity q
                tab = np.where(odd == (q ^ r), tabs[s][r], 0)
                parts.append(np.multiply.outer(tab, acc[r]))
            new[q] = parts[0] + parts[1]
        acc = new
    values = (acc[0] + acc[1]).ravel()
    return _state(P, values, "ambient density", tol)


def compose_state(omega: State, g: Permutation) -> State:
    """``omega o alpha_g``."""
    P = omega.algebra
    _check_perm(g, P)
    return State(P, _compose_values(P, omega.values, g), omega.certificate)


def _compose_values(P: FermiPower, values: np.ndarray, g: Permutation) -> np.ndarray:
    t = np.transpose(np.asarray(values).reshape(P.shape), g.images)
    sign = _inversion_sign_tensor(P.site_odd.astype(bool), g.inversions(), P.sites)
    return (t * sign).ravel()


def symmetrize(omega: State, method: str = "cosets") -> State:
    """Average of ``omega o alpha_g`` over the symmetric group.

    ``"cosets"`` (default) is exact for every ``n`` and costs ``O(n^2)`` tensor
    transposes: ``S_n`` factors as ``T_{n-1} ... T_1`` with
    ``T_k = {e} u {(j k) : j < k}``, and the average is taken one factor at a
    time.  ``"enumerate"`` sums over all ``n!`` permutations and serves as the
    oracle.
    """
    P = omega.algebra
    n = P.sites
    if method == "enumerate":
        acc = np.zeros(P.size, dtype=complex)
        for im in itertools.permutations(range(n)):
            acc += _compose_values(P, omega.values, Permutation(im))
        values = acc / math.factorial(n)
    elif method == "cosets":
        values = np.asarray(omega.values, dtype=complex)
        for k in range(n - 1, 0, -1):
            acc = values.copy()
            for j in range(k):
                acc = acc + _compose_values(P, values, Permutation.transposition(n, j, k))
            values = acc / (k + 1)
    else:
        raise ValueError(f"unknown method {method!r}")
    return State(P, values, f"symmetrization of: {omega.certificate}")


def symmetry_defect(omega: State) -> float:
    """``max_j |omega o alpha_{s_j} - omega|`` over adjacent transpositions."""
    P = omega.algebra
    if not isinstance(P, FermiPower):
        raise TypeError("symmetry is defined for states on a FermiPower")
    worst = 0.0
    for j in range(P.sites - 1):
        d = np.max(np.abs(_compose_values(P, omega.values, adjacent(P.sites, j)) - omega.values))
        worst = max(worst, float(d))
    return worst


def is_symmetric(omega: State, tol: float = STATE_TOL) -> bool:
    return symmetry_defect(omega) <= tol


def require_symmetric(omega: State, tol: float = STATE_TOL) -> None:
    if not isinstance(omega.algebra, FermiPower):
        raise NotSymmetric("state is not defined on a Fermi power")
    d = symmetry_defect(omega)
    if d > tol:
        raise NotSymmetric(f"state is not permutation invariant (defect {d:.3e})")


def restrict(omega: State, k: int) -> State:
    """Restriction to the first ``k`` sites (units on the rest)."""
    P = omega.algebra
    if not 1 <= k <= P.sites:
        raise SiteOutOfRange(f"cannot restrict {P.sites} sites to {k}")
    Q = fermi_power(P.site, k)
    t = np.asarray(omega.values).reshape(P.shape)
    one = P.site.unit_coeffs
    for _ in range(P.sites - k):
        t = np.tensordot(t, one, axes=(t.ndim - 1, 0))
    return State(Q, t.ravel(), f"restriction of: {omega.certificate}")


# -- ergodic means -----------------------------------------------------------------------

@dataclass(frozen=True)
class MeanEstimate:
    value: complex
    stderr: float
    exact: bool
    count: int

    def __complex__(self) -> complex:
        return complex(self.value)


def all_permutations(n: int) -> Iterator[Permutation]:
    for im in itertools.permutations(range(n)):
        yield Permutation(im)


def ergodic_mean(f: Callable[[Permutation], complex], n: int, samples: int = 20000,
                 seed: int = 0, exact_limit: int = EXACT_LIMIT) -> MeanEstimate:
    """Mean of ``f`` over ``S_n``.

    Exact enumeration for ``n <= exact_limit`` (correctly rounded sums);
    above that, the mean of ``samples`` seeded uniform draws with its standard
    error.
    """
    if n <= exact_limit:
        vals = [complex(f(g)) for g in all_permutations(n)]
        count = len(vals)
        total = complex(math.fsum(v.real for v in vals), math.fsum(v.imag for v in vals))
        return MeanEstimate(total / count, 0.0, True, count)
    rng = np.random.default_rng(seed)
    vals = np.array([complex(f(Permutation.random(n, rng))) for _ in range(samples)])
    err = float(np.std(vals, ddof=1) / np.sqrt(samples)) if samples > 1 else float("nan")
    return MeanEstimate(complex(vals.mean()), err, False, samples)
