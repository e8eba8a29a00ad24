from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import E11, E12, E21, E22, diag_state, plus_state
from fermi_definetti.errors import NeitherEven
from fermi_definetti.fermi_product import (
    epsilon,
    faithful_even_pairs,
    fermi_tensor,
    klein_koszul_residual,
    klein_pullback_values,
    koszul_multiply,
    koszul_star,
    minimal_norm,
    minimal_norm_check,
    product_functional,
    product_functional_values,
    product_grading,
    sampled_gns_sup,
)
from fermi_definetti.graded import (
    basis_element,
    grading_apply,
    multiply,
    preset,
    random_element,
    star,
    unit,
)
from fermi_definetti.states import min_gram_eigenvalue, random_state

seeds = st.integers(0, 2**32 - 1)
Z = np.diag([1.0, -1.0])


@pytest.fixture(scope="module")
def P():
    A = preset("car(1)")
    return fermi_tensor(A, A)


def pair(P, i, j):
    return P.elementary(basis_element(P.left, i), basis_element(P.right, j))


def test_epsilon_table():
    assert epsilon(-1, -1) == -1
    assert epsilon(1, -1) == 1
    assert epsilon(-1, 1) == 1
    assert epsilon(1, 1) == 1


def test_klein_images(P):
    one = P.elementary(unit(P.left), basis_element(P.right, E12))
    assert np.allclose(one.matrix, np.kron(Z, basis_element(P.right, E12).matrix))
    left = P.elementary(basis_element(P.left, E12), unit(P.right))
    assert np.allclose(left.matrix, np.kron(basis_element(P.left, E12).matrix, np.eye(2)))


def test_trivial_grading_gives_ordinary_tensor_product():
    M = preset("m2_trivial")
    Q = fermi_tensor(M, M)
    for i in range(4):
        for j in range(4):
            assert np.allclose(Q.klein_map(i, j), np.kron(M.basis[i], M.basis[j]))


def test_koszul_sign_examples(P):
    x, y = pair(P, E12, E21), pair(P, E21, E12)
    expected = -pair(P, E11, E22)
    assert koszul_multiply(P, x, y).allclose(expected)
    assert multiply(x, y).allclose(expected)
    assert koszul_star(P, x).allclose(-pair(P, E21, E12))
    assert star(x).allclose(-pair(P, E21, E12))


@given(seeds)
def test_left_times_right_is_elementary(seed):
    rng = np.random.default_rng(seed)
    A = preset("car(1)")
    Q = fermi_tensor(A, A)
    a, b = random_element(A, rng), random_element(A, rng)
    lhs = koszul_multiply(Q, Q.elementary(a, unit(A)), Q.elementary(unit(A), b))
    assert lhs.allclose(Q.elementary(a, b), atol=1e-12)


def test_product_grading_examples(P):
    x = pair(P, E12, E21)
    assert product_grading(P, x).allclose(x)
    y = pair(P, E11, E12)
    assert product_grading(P, y).allclose(-y)


@pytest.mark.parametrize("right", ["car(1)", "c2_swap", "m2_trivial"])
def test_klein_matches_koszul(right, rng):
    Q = fermi_tensor(preset("car(1)"), preset(right))
    assert klein_koszul_residual(Q, rng, 200) <= 1e-12


@given(seeds)
def test_product_star_algebra_laws(seed):
    rng = np.random.default_rng(seed)
    A = preset("car(1)")
    Q = fermi_tensor(A, preset("c2_swap"))
    x, y, z = (random_element(Q.product, rng) for _ in range(3))
    km = lambda a, b: koszul_multiply(Q, a, b)  # noqa: E731
    assert km(km(x, y), z).allclose(km(x, km(y, z)), atol=1e-10)
    assert koszul_star(Q, koszul_star(Q, x)).allclose(x)
    assert koszul_star(Q, km(x, y)).allclose(km(koszul_star(Q, y), koszul_star(Q, x)), atol=1e-10)
    th = product_grading(Q, x)
    assert product_grading(Q, th).allclose(x)
    assert th.allclose(grading_apply(x))
    assert product_grading(Q, km(x, y)).allclose(km(th, product_grading(Q, y)), atol=1e-10)


def test_product_state_value(P):
    t = 0.3
    w = diag_state(P.left, t)
    s = product_functional(w, w, P)
    assert s(pair(P, E11, E22)) == pytest.approx(t * (1 - t))


def test_neither_even(P):
    psi = plus_state(P.left)
    with pytest.raises(NeitherEven):
        product_functional(psi, psi, P)
    lo, _ = min_gram_eigenvalue(P.product, product_functional_values(psi, psi))
    assert lo < -0.01


def test_one_even_factor_is_positive(P):
    psi = plus_state(P.left)
    trace = diag_state(P.left, 0.5)
    for pair_ in ((psi, trace), (trace, psi)):
        s = product_functional(*pair_, P)
        lo, nrm = min_gram_eigenvalue(P.product, s.values)
        assert lo >= -1e-10 * max(nrm, 1.0)


@given(seeds)
def test_klein_pullback_identity(seed):
    rng = np.random.default_rng(seed)
    A = preset("car(1)")
    Q = fermi_tensor(A, A)
    omega = random_state(A, rng)
    phi = diag_state(A, float(rng.random()))
    assert np.allclose(product_functional_values(omega, phi),
                       klein_pullback_values(omega.density, phi.density, Q), atol=1e-12)


@given(seeds)
def test_cauchy_schwarz(seed):
    rng = np.random.default_rng(seed)
    A = preset("car(1)")
    Q = fermi_tensor(A, A)
    s = product_functional(random_state(A, rng), diag_state(A, float(rng.random())), Q)
    x = random_element(Q.product, rng)
    assert abs(s(x)) <= np.sqrt(s(star(x) @ x).real) + 1e-10


def test_minimal_norm_examples(P):
    assert minimal_norm(pair(P, E12, E22) + pair(P, E12, E11)) == pytest.approx(1.0)
    assert minimal_norm(P.elementary(unit(P.left), unit(P.right))) == pytest.approx(1.0)


@given(seeds)
def test_minimal_norm_equals_sampled_sup(seed):
    rng = np.random.default_rng(seed)
    A = preset("car(1)")
    Q = fermi_tensor(A, A)
    c = random_element(Q.product, rng)
    klein, sampled = minimal_norm_check(c, Q, samples=3, seed=seed)
    assert sampled <= klein + 1e-10
    assert klein <= sampled + 1e-8


def test_sampled_sup_lower_bound_for_pure_states(P, rng):
    c = random_element(P.product, rng)
    pure = diag_state(P.left, 1.0)
    sup = sampled_gns_sup(c, P, [(pure, pure)])
    assert sup <= minimal_norm(c) + 1e-10
    pairs = faithful_even_pairs(P.left, P.right, 2, rng)
    assert all(min(np.linalg.eigvalsh(w.density)) > 0 for pr in pairs for w in pr)
