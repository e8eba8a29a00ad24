"""Fermi tensor products of graded algebras, symmetric states on their powers,
and product-state (De Finetti) decompositions, checked numerically at finite size."""

from __future__ import annotations

from .analysis import (
    DecayReport,
    FitResult,
    InvariantProjection,
    check_asymptotic_abelianness,
    check_strong_clustering,
    check_weak_clustering,
    definetti_fit,
    ergodic_operator_mean,
    even_state_grid,
    invariant_projection,
    oddness_decay,
)
from . import errors
from .errors import *  # noqa: F401,F403
from .fermi_product import (
    FermiProduct,
    epsilon,
    fermi_tensor,
    klein_koszul_residual,
    koszul_multiply,
    koszul_star,
    minimal_norm,
    minimal_norm_check,
    product_functional,
    product_functional_values,
    sampled_gns_sup,
)
from .graded import (
    Element,
    GradedAlgebra,
    basis_element,
    build_algebra,
    grading_apply,
    is_homogeneous,
    multiply,
    preset,
    star,
    unit,
)
from .power import (
    FermiPower,
    Permutation,
    PowerElement,
    embed_site,
    ergodic_mean,
    fermi_power,
    mixed_product_state,
    permute,
    product_density_state,
    product_state_power,
    stormer_sequence,
    symmetrize,
)
from .states import (
    GNSData,
    State,
    covariant_unitary,
    gns,
    gns_norm,
    is_even,
    mixture,
    state_from_density,
    state_from_values,
)

__version__ = "0.1.0"

__all__ = [
    "DecayReport",
    "FitResult",
    "InvariantProjection",
    "check_asymptotic_abelianness",
    "check_strong_clustering",
    "check_weak_clustering",
    "definetti_fit",
    "ergodic_operator_mean",
    "even_state_grid",
    "invariant_projection",
    "oddness_decay",
    "FermiProduct",
    "epsilon",
    "fermi_tensor",
    "klein_koszul_residual",
    "koszul_multiply",
    "koszul_star",
    "minimal_norm",
    "minimal_norm_check",
    "product_functional",
    "product_functional_values",
    "sampled_gns_sup",
    "Element",
    "GradedAlgebra",
    "basis_element",
    "build_algebra",
    "grading_apply",
    "is_homogeneous",
    "multiply",
    "preset",
    "star",
    "unit",
    "FermiPower",
    "Permutation",
    "PowerElement",
    "embed_site",
    "ergodic_mean",
    "fermi_power",
    "mixed_product_state",
    "permute",
    "product_density_state",
    "product_state_power",
    "stormer_sequence",
    "symmetrize",
    "GNSData",
    "State",
    "covariant_unitary",
    "gns",
    "gns_norm",
    "is_even",
    "mixture",
    "state_from_density",
    "state_from_values",
]
__all__ += errors.__all__
