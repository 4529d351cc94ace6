"""Type-I blow-up analysis for asymptotically quasi-homogeneous ODEs.

The pipeline splits a rational vector field into its quasi-homogeneous part
and a lower-order residual, compactifies the phase space with a weighted
Poincare-type map, and relates roots of the balance law to equilibria on the
horizon of the desingularized flow.
"""

from .blowup import (
    build_correspondence,
    existence_verdict,
    find_horizon_equilibria,
    pair_up,
    solve_balance,
    stability_gap,
)
from .compactify import build_desingularized, compactify_point, decompactify_point, derive_beta
from .dynamics import dopri5, estimate_tmax, expansion_residual_order, integrate, monitor_lemma_G
from .errors import BlowupError
from .field import MultiPoly, RationalFn, RationalVectorField, decompose, polynomial_field, verify_qh_identity
from .problem import builtin_problem, load_problem, parse_problem, serialize_problem
from .spectral import eigen_decompose

__all__ = [
    "BlowupError",
    "MultiPoly",
    "RationalFn",
    "RationalVectorField",
    "build_correspondence",
    "build_desingularized",
    "builtin_problem",
    "compactify_point",
    "decompactify_point",
    "decompose",
    "derive_beta",
    "dopri5",
    "eigen_decompose",
    "estimate_tmax",
    "existence_verdict",
    "expansion_residual_order",
    "find_horizon_equilibria",
    "integrate",
    "load_problem",
    "monitor_lemma_G",
    "pair_up",
    "parse_problem",
    "polynomial_field",
    "serialize_problem",
    "solve_balance",
    "stability_gap",
    "verify_qh_identity",
]
