"""Geodesic motion on a four dimensional constant-curvature spacetime.

The spacetime is realized two ways at once: as a conformally flat
coordinate chart and as the pseudo-sphere <X, X> = -ell^2 inside a flat
five dimensional ambient space with signature (+, -, -, -, -).  Every
quantity can be computed along either route, and the pairs of routes
serve as cross-checks on each other.
"""
from .errors import (ChartSingularity, ConstraintViolated, DegenerateFit,
                     DeSitterError, InsufficientSamples, NoConvergence,
                     NorthPole, NotOnBrane, ScenarioError)
from .bulk import (BIVECTOR_NAMES, BIVECTOR_PAIRS, METRIC_SIGNS, CausalClass,
                   angular_momentum, bivector_components, bivector_invariant,
                   bivector_matrix, bulk_inner, classify,
                   pseudo_sphere_residual)
from .chart import (ChartPoint, christoffel, christoffel_fd, conformal_factor,
                    embed, embed_differential, embedding_jacobian, metric_norm,
                    pullback_metric, sigma_squared, unembed)
from .dynamics import (BulkState, ChartState, Connectability, Forcing,
                       IntegratorConfig, ShootingResult, Trajectory,
                       analytic_bulk_geodesic, bulk_constrained_rhs,
                       bulk_to_chart, chart_to_bulk, connectability,
                       geodesic_rhs, integrate, integrate_bulk,
                       integrate_geodesic, shoot_geodesic)
from .analysis import (ConservationReport, analytic_reference,
                       conservation_report, convergence_order,
                       geodesic_residual, l_drift, mac_residual,
                       mac_residual_max, maca_residual, maca_residual_max,
                       norm_drift, trajectory_agreement)
from .scenario import Scenario, load_scenario, parse_scenario

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "DeSitterError", "ChartSingularity", "NorthPole", "NotOnBrane",
    "ConstraintViolated", "NoConvergence", "InsufficientSamples",
    "DegenerateFit", "ScenarioError",
    # ambient-space geometry
    "METRIC_SIGNS", "BIVECTOR_PAIRS", "BIVECTOR_NAMES", "CausalClass",
    "bulk_inner", "pseudo_sphere_residual", "angular_momentum",
    "bivector_matrix", "bivector_components", "bivector_invariant",
    "classify",
    # chart geometry
    "ChartPoint", "sigma_squared", "conformal_factor", "embed", "unembed",
    "embedding_jacobian", "embed_differential", "pullback_metric",
    "metric_norm", "christoffel", "christoffel_fd",
    # dynamics
    "ChartState", "BulkState", "Forcing", "IntegratorConfig", "Trajectory",
    "geodesic_rhs", "bulk_constrained_rhs", "analytic_bulk_geodesic",
    "chart_to_bulk", "bulk_to_chart", "integrate", "integrate_geodesic",
    "integrate_bulk", "Connectability", "connectability", "ShootingResult",
    "shoot_geodesic",
    # analysis
    "mac_residual", "maca_residual", "mac_residual_max", "maca_residual_max",
    "geodesic_residual", "analytic_reference", "l_drift", "norm_drift",
    "trajectory_agreement", "convergence_order", "ConservationReport",
    "conservation_report",
    # scenarios
    "Scenario", "parse_scenario", "load_scenario",
]
