"""Curvature engine and ODE toolkit for conformally Einstein products.

Metrics are written in a small text language (``sphere(3)``,
``conformal(1/(cos(r) + cosh(r_2)), product(sphere(3), hyperbolic(3)))``),
differentiated exactly to second order with jets, and checked against the
Einstein condition on a deterministic grid.
"""

__version__ = "0.1.0"

from .catalog import CatalogEntry, catalog_list, catalog_names, catalog_verify, get_entry, load_entry
from .classify import classify_warp, drop_instance, drop_polynomial, positive_roots
from .conformal import (
    ConformalPair,
    conformal_ricci_delta,
    conformally_einstein_residual,
    direct_ricci_delta,
    main_theorem_constants,
    quasi_einstein_check,
)
from .curvature import (
    curvature_at,
    curvature_batch,
    einstein_residual,
    hessian_at,
    hessian_batch,
    make_grid,
    random_points,
)
from .dsl import MetricSpec, parse_expr, parse_metric, print_expr, print_metric
from .errors import DomainError, ForgeError, ParseError, PreconditionError, SingularMetricError
from .jets import Jet2, jet_apply, lift_coordinate, lift_point
from .odes import (
    BrinkmannProblem,
    ExtremalSurfaceParams,
    FtProblem,
    IteratedWarpProblem,
    conf_product_residual,
    corvino_residual,
    quadrature_x_of_u,
    solve_brinkmann,
    solve_extremal,
    solve_ft,
    solve_iterated_warp,
)
from .profiles import beltrami_profile, figure1_profile

__all__ = [
    "__version__",
    "BrinkmannProblem",
    "CatalogEntry",
    "ConformalPair",
    "DomainError",
    "ExtremalSurfaceParams",
    "ForgeError",
    "FtProblem",
    "IteratedWarpProblem",
    "Jet2",
    "MetricSpec",
    "ParseError",
    "PreconditionError",
    "SingularMetricError",
    "beltrami_profile",
    "catalog_list",
    "catalog_names",
    "catalog_verify",
    "classify_warp",
    "conf_product_residual",
    "conformal_ricci_delta",
    "conformally_einstein_residual",
    "corvino_residual",
    "curvature_at",
    "curvature_batch",
    "direct_ricci_delta",
    "drop_instance",
    "drop_polynomial",
    "einstein_residual",
    "figure1_profile",
    "get_entry",
    "hessian_at",
    "hessian_batch",
    "jet_apply",
    "lift_coordinate",
    "lift_point",
    "load_entry",
    "main_theorem_constants",
    "make_grid",
    "parse_expr",
    "parse_metric",
    "positive_roots",
    "print_expr",
    "print_metric",
    "quadrature_x_of_u",
    "quasi_einstein_check",
    "random_points",
    "solve_brinkmann",
    "solve_extremal",
    "solve_ft",
    "solve_iterated_warp",
]
