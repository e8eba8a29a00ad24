"""Property suites run by ``fermi-definetti verify``.

Each suite returns a list of :class:`PropertyResult`; a property passes when
its worst residual is within its threshold (or, for lower-bound properties,
beyond it).  All randomness comes from the seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .analysis import (
    DecayReport,
    check_asymptotic_abelianness,
    check_strong_clustering,
    check_weak_clustering,
    even_state_grid,
    oddness_decay,
)
from .fermi_product import (
    fermi_tensor,
    klein_koszul_residual,
    klein_pullback_values,
    koszul_multiply,
    koszul_star,
    product_functional_values,
    product_grading,
)
from .graded import basis_element, preset, random_element, star, unit
from .power import (
    Permutation,
    fermi_power,
    permute,
    product_density_state,
    product_state_power,
    random_decomposition,
    random_power_element,
    stormer_sequence,
    symmetrize,
    symmetry_defect,
)
from .states import min_gram_eigenvalue, mixture, random_state, state_from_density

__all__ = ["PropertyResult", "SUITES", "run_suite"]


@dataclass(frozen=True)
class PropertyResult:
    suite: str
    name: str
    passed: bool
    worst: float
    threshold: float
    detail: dict | None = None

    def to_dict(self) -> dict:
        out = {"property": self.name, "passed": self.passed,
               "worst_residual": self.worst, "threshold": self.threshold}
        if self.detail:
            out["detail"] = self.detail
        return out


def _upper(suite: str, name: str, worst: float, tol: float, detail: dict | None = None) -> PropertyResult:
    return PropertyResult(suite, name, bool(worst <= tol), float(worst), tol, detail)


def _max_diff(x, y) -> float:
    return float(np.max(np.abs(x.coeffs - y.coeffs)))


def suite_signs(rng: np.random.Generator, tol: float, draws: int, max_sites: int,
               samples: int, seed: int) -> list:
    A = preset("car(1)")
    P = fermi_tensor(A, A)
    C = fermi_tensor(A, preset("c2_swap"))
    out = []
    for label, Q in (("car(1)xcar(1)", P), ("car(1)xc2_swap", C)):
        assoc = involution = antimult = theta2 = theta_hom = theta_star = 0.0
        for _ in range(draws):
            x, y, z = (random_element(Q.product, rng) for _ in range(3))
            km = lambda a, b: koszul_multiply(Q, a, b)  # noqa: E731
            ks = lambda a: koszul_star(Q, a)  # noqa: E731
            th = lambda a: product_grading(Q, a)  # noqa: E731
            assoc = max(assoc, _max_diff(km(km(x, y), z), km(x, km(y, z))))
            involution = max(involution, _max_diff(ks(ks(x)), x))
            antimult = max(antimult, _max_diff(ks(km(x, y)), km(ks(y), ks(x))))
            theta2 = max(theta2, _max_diff(th(th(x)), x))
            theta_hom = max(theta_hom, _max_diff(th(km(x, y)), km(th(x), th(y))))
            theta_star = max(theta_star, _max_diff(th(ks(x)), ks(th(x))))
        out += [
            _upper("signs", f"{label}: associativity", assoc, tol),
            _upper("signs", f"{label}: x** = x", involution, tol),
            _upper("signs", f"{label}: (xy)* = y*x*", antimult, tol),
            _upper("signs", f"{label}: theta^2 = id", theta2, tol),
            _upper("signs", f"{label}: theta multiplicative", theta_hom, tol),
            _upper("signs", f"{label}: theta commutes with *", theta_star, tol),
        ]
    return out


def suite_klein(rng: np.random.Generator, tol: float, draws: int, max_sites: int,
               samples: int, seed: int) -> list:
    A = preset("car(1)")
    out = []
    for label, B in (("car(1)xcar(1)", A), ("car(1)xc2_swap", preset("c2_swap"))):
        P = fermi_tensor(A, B)
        out.append(_upper("klein", f"{label}: Klein products and stars match the sign rule",
                          klein_koszul_residual(P, rng, draws), tol))
    return out


def suite_states(rng: np.random.Generator, tol: float, draws: int, max_sites: int,
                samples: int, seed: int) -> list:
    A = preset("car(1)")
    P = fermi_tensor(A, A)
    psi = np.array([1.0, 1.0]) / np.sqrt(2)
    odd_state = state_from_density(A, np.outer(psi, psi))
    grid = even_state_grid(A, 11)
    raw = product_functional_values(odd_state, odd_state)
    lo_bad, _ = min_gram_eigenvalue(P.product, raw)
    worst_even = 0.0
    for phi in grid:
        for pair in ((odd_state, phi), (phi, odd_state)):
            lo, nrm = min_gram_eigenvalue(P.product, product_functional_values(*pair))
            worst_even = max(worst_even, -lo / max(nrm, 1.0))
    ident = 0.0
    for k in range(draws):
        omega = random_state(A, rng)
        phi = grid[k % len(grid)]
        lhs = product_functional_values(omega, phi)
        rhs = klein_pullback_values(omega.density, phi.density, P)
        ident = max(ident, float(np.max(np.abs(lhs - rhs))))
    gns_err = 0.0
    for _ in range(min(draws, 50)):
        phi = random_state(A, rng, rank=int(rng.integers(1, 3)))
        g = phi.gns
        x, y = random_element(A, rng), random_element(A, rng)
        gns_err = max(gns_err,
                      float(np.max(np.abs(g.pi(x @ y) - g.pi(x) @ g.pi(y)))),
                      float(np.max(np.abs(g.pi(star(x)) - g.pi(x).conj().T))),
                      abs(np.vdot(g.cyclic_vector, g.pi(x) @ g.cyclic_vector) - phi(x)))
    return [
        PropertyResult("states", "non-even pair: Gram eigenvalue below -0.01", bool(lo_bad < -0.01),
                       float(lo_bad), -0.01),
        _upper("states", "one even factor: Gram matrix PSD", worst_even, tol),
        _upper("states", "product state equals Klein pullback", ident, tol),
        _upper("states", "GNS: homomorphism, *-preserving, reproduces the state", gns_err,
               max(tol, 1e-9)),
    ]


def suite_action(rng: np.random.Generator, tol: float, draws: int, max_sites: int,
                samples: int, seed: int) -> list:
    A = preset("car(1)")
    P = fermi_power(A, 4)
    rep = dec = auto = 0.0
    for _ in range(draws):
        g, h = Permutation.random(4, rng), Permutation.random(4, rng)
        x, y = random_power_element(P, rng, 2), random_power_element(P, rng, 2)
        gx = permute(g, x).coeffs()
        rep = max(rep, float(np.max(np.abs(permute(g, permute(h, x)).coeffs()
                                           - permute(g @ h, x).coeffs()))))
        dec = max(dec, float(np.max(np.abs(
            permute(g, x, decomposition=random_decomposition(g, rng)).coeffs() - gx))))
        auto = max(auto, float(np.max(np.abs(permute(g, x @ y).coeffs()
                                              - (permute(g, x) @ permute(g, y)).coeffs()))),
                   float(np.max(np.abs(permute(g, x.star()).coeffs() - permute(g, x).star().coeffs()))),
                   float(np.max(np.abs(permute(g, x.grading()).coeffs() - permute(g, x).grading().coeffs()))))
    inv = 0.0
    phi = state_from_density(A, np.diag([0.3, 0.7]))
    for n in range(2, min(max_sites, 5) + 1):
        inv = max(inv, symmetry_defect(product_state_power(phi, n)))
    bij = all(sorted(stormer_sequence(m, 2 ** (m + 1)).images) == list(range(2 ** (m + 1)))
              for m in range(3))
    return [
        _upper("action", "alpha_g alpha_h = alpha_gh", rep, tol),
        _upper("action", "independent of the adjacent decomposition", dec, tol),
        _upper("action", "*-automorphism commuting with the grading", auto, tol),
        _upper("action", "product states are permutation invariant", inv, tol),
        PropertyResult("action", "block swaps are bijections", bij, 0.0, 0.0),
    ]


def clustering_reports(max_sites: int, samples: int, seed: int) -> dict[str, DecayReport]:
    A = preset("car(1)")
    e = [basis_element(A, i) for i in range(4)]
    phi = state_from_density(A, np.diag([0.3, 0.7]))
    phis = [state_from_density(A, np.diag([t, 1 - t])) for t in (0.2, 0.9)]
    psi = np.array([1.0, 1.0]) / np.sqrt(2)
    sites = range(2, max_sites + 1)
    prod = lambda n: product_state_power(phi, n)  # noqa: E731
    mix = lambda n: mixture([product_state_power(p, n) for p in phis], [0.3, 0.7])  # noqa: E731
    seed_fam = lambda n: symmetrize(  # noqa: E731
        product_density_state(fermi_power(A, n), [np.outer(psi, psi)] * n))
    n_strong = 4 if max_sites >= 4 else 2
    return {
        "weak_product": check_weak_clustering(prod, e[0], e[0], sites, samples, seed),
        "weak_mixture": check_weak_clustering(mix, e[0], e[0], sites, samples, seed),
        "strong_product": check_strong_clustering(prod(n_strong), e[1], e[2]),
        "strong_mixture": check_strong_clustering(mix(n_strong), e[0], e[0]),
        "abelian_product": check_asymptotic_abelianness(prod, e[1], e[2], unit(A), unit(A),
                                                        sites, samples, seed),
        "oddness_symmetrized": oddness_decay(seed_fam, e[1], sites),
    }


def suite_clustering(rng: np.random.Generator, tol: float, draws: int, max_sites: int,
                     samples: int, seed: int) -> list:
    reports = clustering_reports(max_sites, samples, seed)
    gap = 0.3 * 0.2 ** 2 + 0.7 * 0.9 ** 2 - (0.3 * 0.2 + 0.7 * 0.9) ** 2
    mix_strong = max(abs(v - gap) for _, v in reports["strong_mixture"].values)
    weak_mix_tail = reports["weak_mixture"].values[-1][1]
    out = []
    for key in ("weak_product", "strong_product", "abelian_product", "oddness_symmetrized"):
        r = reports[key]
        worst = max(v for _, v in r.values)
        out.append(PropertyResult("clustering", f"{key}: within envelope {r.envelope or '0'}",
                                  r.passed, worst, r.constant, r.to_dict()))
    out.append(_upper("clustering", "strong_mixture: equals the covariance gap", mix_strong,
                      max(tol, 1e-10), reports["strong_mixture"].to_dict()))
    out.append(PropertyResult("clustering", "weak_mixture: does not decay to zero",
                              bool(weak_mix_tail > gap / 2), weak_mix_tail, gap / 2,
                              reports["weak_mixture"].to_dict()))
    return out


SUITES: dict[str, Callable] = {
    "signs": suite_signs,
    "klein": suite_klein,
    "states": suite_states,
    "action": suite_action,
    "clustering": suite_clustering,
}


def run_suite(name: str, seed: int, tol: float, samples: int, max_sites: int,
              draws: int = 200) -> list[PropertyResult]:
    """Run one suite (or ``"all"``) with a fresh generator per suite.

    ``draws`` random inputs are used per randomized property; ``samples`` is
    the draw count of sampled permutation means (only used above eight sites).
    """
    names = list(SUITES) if name == "all" else [name]
    out = []
    for k, nm in enumerate(names):
        if nm not in SUITES:
            raise KeyError(nm)
        rng = np.random.default_rng([seed, k])
        out += SUITES[nm](rng, tol, draws, max_sites, samples, seed)
    return out
