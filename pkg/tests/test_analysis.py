from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import E11, E12, E21, diag_state, plus_state
from fermi_definetti.analysis import (
    DecayReport,
    check_asymptotic_abelianness,
    check_strong_clustering,
    check_weak_clustering,
    definetti_fit,
    ergodic_operator_mean,
    even_state_grid,
    fitted_rate,
    invariant_projection,
    oddness_decay,
)
from fermi_definetti.errors import BudgetExceeded, EmptyGrid, NotOdd, NotSymmetric
from fermi_definetti.graded import basis_element, preset, unit
from fermi_definetti.power import (
    fermi_power,
    mixed_product_state,
    product_density_state,
    product_state_power,
    restrict,
    symmetrize,
)
from fermi_definetti.states import is_even, mixture

SITES = range(2, 7)


def prod(B, t):
    return lambda n: product_state_power(diag_state(B, t), n)


def mix(B):
    return lambda n: mixture([product_state_power(diag_state(B, t), n) for t in (0.2, 0.9)],
                             [0.3, 0.7])


def seed_family(B):
    rho = plus_state(B).density
    return lambda n: symmetrize(product_density_state(fermi_power(B, n), [rho] * n))


GAP = 0.3 * 0.2**2 + 0.7 * 0.9**2 - (0.3 * 0.2 + 0.7 * 0.9) ** 2


# -- reports -------------------------------------------------------------------------

def test_fitted_rate_recovers_power():
    pts = [(n, 3.0 * n**-1.5) for n in range(2, 9)]
    assert fitted_rate(pts) == pytest.approx(-1.5)
    assert np.isnan(fitted_rate([(2, 1.0)]))


def test_report_calibration_and_json():
    r = DecayReport.build("q", [(2, 1.0), (4, 0.5), (8, 0.3)], "1/n")
    assert not r.passed and r.constant == pytest.approx(2.0)
    assert DecayReport.build("q", [(2, 1.0), (4, 0.5)], "1/n").passed
    assert set(r.to_dict()) == {"quantity", "points", "fitted_rate", "passed"}
    with pytest.raises(ValueError):
        DecayReport.build("q", [], "1/n")
    with pytest.raises(ValueError):
        DecayReport.build("q", [(2, -1.0)], "1/n")


# -- weak clustering -------------------------------------------------------------------

def test_weak_clustering_product_closed_form(car1):
    e11 = basis_element(car1, E11)
    r = check_weak_clustering(prod(car1, 0.3), e11, e11, SITES)
    assert r.passed
    for n, v in r.values:
        assert v == pytest.approx(0.21 / n, abs=1e-14)
    assert r.fitted_rate == pytest.approx(-1.0)


def test_weak_clustering_mixture_does_not_decay(car1):
    e11 = basis_element(car1, E11)
    r = check_weak_clustering(mix(car1), e11, e11, SITES)
    # the mean tends to the covariance gap of the mixing measure
    for n, v in r.values:
        assert v >= GAP - 1e-12
    assert r.values[-1][1] > 0.1


def test_weak_clustering_unit(car1):
    r = check_weak_clustering(mix(car1), unit(car1), basis_element(car1, E11), SITES)
    assert max(v for _, v in r.values) <= 1e-12


def test_weak_clustering_needs_symmetry(car1):
    w = mixed_product_state([diag_state(car1, 0.1), diag_state(car1, 0.8)])
    with pytest.raises(NotSymmetric):
        check_weak_clustering(w, unit(car1), unit(car1))


# -- strong clustering -------------------------------------------------------------------

def test_strong_clustering_product_is_exact(car1):
    w = prod(car1, 0.3)(4)
    for a, b in ((E11, E11), (E12, E21), (E12, E12)):
        r = check_strong_clustering(w, basis_element(car1, a), basis_element(car1, b))
        assert r.passed and max(v for _, v in r.values) <= 1e-12


def test_strong_clustering_mixture_gap(car1):
    e11 = basis_element(car1, E11)
    r = check_strong_clustering(mix(car1)(4), e11, e11)
    assert not r.passed
    for _, v in r.values:
        assert v == pytest.approx(GAP, abs=1e-10)
    r1 = check_strong_clustering(mix(car1)(4), unit(car1), e11)
    assert max(v for _, v in r1.values) <= 1e-12


def test_strong_clustering_budget(car1):
    with pytest.raises(BudgetExceeded):
        check_strong_clustering(prod(car1, 0.3)(3), unit(car1), unit(car1), max_m=1)


# -- asymptotic abelianness ----------------------------------------------------------------

def test_commutator_vanishes_for_equal_operands(car1):
    e12 = basis_element(car1, E12)
    r = check_asymptotic_abelianness(seed_family(car1), e12, e12, unit(car1), unit(car1), SITES)
    assert max(v for _, v in r.values) <= 1e-12


def test_commutator_envelope_product_odd(car1):
    e12, e21 = basis_element(car1, E12), basis_element(car1, E21)
    one = unit(car1)
    r = check_asymptotic_abelianness(prod(car1, 0.3), e12, e21, one, one, SITES)
    assert r.passed
    # only g(0) = 0 contributes, with [e12, e21] = e11 - e22
    for n, v in r.values:
        assert v == pytest.approx(0.4 / n, abs=1e-14)


def test_commutator_seed_closed_form(car1):
    # for the symmetrized non-even seed the mean is (n-1)/n^2: O(1/n) but above
    # the 1/(n+1) envelope calibrated at n = 2
    e12, e21 = basis_element(car1, E12), basis_element(car1, E21)
    one = unit(car1)
    r = check_asymptotic_abelianness(seed_family(car1), e12, e21, one, one, SITES)
    for n, v in r.values:
        assert v == pytest.approx((n - 1) / n**2, abs=1e-13)
    assert not r.passed
    assert max(n * v for n, v in r.values) <= 1.0


@pytest.mark.parametrize("cd", [(E21, E12), (None, E21)])
def test_commutator_seed_other_operands(car1, cd):
    e12, e21 = basis_element(car1, E12), basis_element(car1, E21)
    c, d = (unit(car1) if i is None else basis_element(car1, i) for i in cd)
    r = check_asymptotic_abelianness(seed_family(car1), e12, e21, c, d, SITES)
    assert r.passed


# -- oddness ---------------------------------------------------------------------------------

def test_oddness_of_symmetrized_seed(car1):
    r = oddness_decay(seed_family(car1), basis_element(car1, E12), SITES)
    assert r.passed
    for n, v in r.values:
        assert v == pytest.approx(1 / (2 * n), abs=1e-14)


def test_oddness_of_even_families(car1):
    e12 = basis_element(car1, E12)
    r = oddness_decay(prod(car1, 0.4), e12, SITES)
    assert max(v for _, v in r.values) == 0
    rho = diag_state(car1, 0.6).density
    fam = lambda n: symmetrize(product_density_state(fermi_power(car1, n), [rho] * n))  # noqa: E731
    assert max(v for _, v in oddness_decay(fam, e12, SITES).values) <= 1e-12


def test_oddness_needs_odd_element(car1):
    with pytest.raises(NotOdd):
        oddness_decay(prod(car1, 0.4), basis_element(car1, E11), SITES)


# -- invariant projection ----------------------------------------------------------------------

@pytest.mark.parametrize("family", ["product", "seed"])
def test_invariant_projection_properties(car1, family):
    fam = prod(car1, 0.3) if family == "product" else seed_family(car1)
    norms = []
    for n in (2, 3):
        ip = invariant_projection(fam(n), samples=4)
        E = ip.E
        assert np.allclose(E, E.conj().T, atol=1e-10)
        assert np.allclose(E @ E, E, atol=1e-10)
        for U in ip.unitaries:
            assert np.allclose(U @ E, E, atol=1e-9)
            assert np.allclose(U @ E, E @ U, atol=1e-9)
        xi = ip.gns.cyclic_vector
        assert np.allclose(E @ xi, xi, atol=1e-9)
        norms.append(ip.commutator)
    assert norms[1] < norms[0]


def test_invariant_projection_budget(car1):
    with pytest.raises(BudgetExceeded):
        invariant_projection(prod(car1, 0.3)(6))


# -- ergodic operator mean -----------------------------------------------------------------------

def test_operator_mean_of_unit(car1):
    assert ergodic_operator_mean(prod(car1, 0.5)(3), unit(car1)) == pytest.approx(0, abs=1e-12)


def test_operator_mean_modes(car1):
    a = basis_element(car1, E11) - unit(car1) * 0.5
    norm_vals, cyc_vals = [], []
    for n in range(2, 6):
        w = prod(car1, 0.5)(n)
        norm_vals.append(ergodic_operator_mean(w, a, "norm"))
        cyc_vals.append(ergodic_operator_mean(w, a, "cyclic"))
    # the operator norm sees the all-occupied vector and stays at 1/2
    assert np.allclose(norm_vals, 0.5)
    assert np.allclose(cyc_vals, [1 / (2 * np.sqrt(n)) for n in range(2, 6)])
    assert all(y <= x + 1e-12 for x, y in zip(cyc_vals, cyc_vals[1:]))
    with pytest.raises(ValueError):
        ergodic_operator_mean(prod(car1, 0.5)(2), a, "other")


# -- grids and fits ---------------------------------------------------------------------------------

def test_car1_grid(car1):
    grid = even_state_grid(car1, 3)
    assert [g.label for g in grid] == [0.0, 0.5, 1.0]
    assert all(is_even(g) for g in grid)
    assert grid[0].gns.dim == 2 and grid[-1].gns.dim == 2


@pytest.mark.parametrize("name", ["car(2)", "c2_swap"])
def test_general_grid_is_even_and_deterministic(name):
    B = preset(name)
    g1, g2 = even_state_grid(B, 7), even_state_grid(B, 7)
    assert all(is_even(g) for g in g1)
    assert all(np.allclose(a.values, b.values) for a, b in zip(g1, g2))


def test_fit_recovers_mixture(car1):
    fit = definetti_fit(mix(car1)(3), even_state_grid(car1, 101))
    w = dict(zip(fit.grid_params, fit.weights))
    assert w[fit.grid_params[20]] == pytest.approx(0.3, abs=1e-6)
    assert w[fit.grid_params[90]] == pytest.approx(0.7, abs=1e-6)
    assert fit.residual <= 1e-8
    assert fit.weights.sum() == pytest.approx(1.0, abs=1e-8)


def test_fit_single_product(car1):
    grid = even_state_grid(car1, 11)
    fit = definetti_fit(product_state_power(grid[4], 3), grid)
    assert fit.weights[4] == pytest.approx(1.0, abs=1e-8)


def test_fit_coarse_grid(car1):
    fit = definetti_fit(prod(car1, 0.33)(3), even_state_grid(car1, 3))
    assert fit.residual > 1e-4
    assert fit.weights.min() >= 0 and fit.weights.sum() == pytest.approx(1.0, abs=1e-8)


@given(st.floats(0.05, 0.95), st.integers(3, 9))
def test_fit_refinement_and_restriction(t, res):
    B = preset("car(1)")
    w = product_state_power(diag_state(B, t), 3)
    coarse = even_state_grid(B, res)
    fine = even_state_grid(B, 2 * res - 1)  # contains the coarse nodes
    r_coarse = definetti_fit(w, coarse).residual
    assert definetti_fit(w, fine).residual <= r_coarse + 1e-9
    assert definetti_fit(restrict(w, 2), coarse).residual <= r_coarse + 1e-9


def test_fit_errors(car1):
    with pytest.raises(EmptyGrid):
        definetti_fit(prod(car1, 0.3)(2), [])
    w = mixed_product_state([diag_state(car1, 0.1), diag_state(car1, 0.8)])
    with pytest.raises(NotSymmetric):
        definetti_fit(w, even_state_grid(car1, 5))


def test_fit_json_keys(car1):
    fit = definetti_fit(prod(car1, 0.5)(2), even_state_grid(car1, 3))
    assert set(fit.to_dict()) == {"grid_params", "weights", "residual", "sites"}
