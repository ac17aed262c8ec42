"""Desk-scale extreme-value and return-statistics laboratory for the
two-branch baker family."""

from .symbolic import (BakerParams, Metric, SymbolicPoint, apply_map_coords,
                       apply_shift, distance, evaluate_coords, periodic_point)
from .measure import (Ball, EstimatorResult, SRBSampler, annulus_exponent,
                      annulus_ratio, ball_measure, dimension_formula,
                      draw_typical_center, exact_ball_measure,
                      local_dimension, sample_srb)
from .evt import (EIEstimate, EvtConfig, GumbelResult, block_maximum,
                  gumbel_experiment, lebesgue_start_experiment,
                  observable_phi, qk_estimator, survival_curve,
                  theta_from_survival, threshold_for_tau)
from .geometry import (PeriodicGeometry, ellipse_disk_ratio,
                       hat_alpha_reference, theta_sup)
from .pointprocess import (ClusterLaw, VisitHistogram, estimate_cluster_law,
                           geometric_cluster_test, gof_distance,
                           poisson_pmf, polya_aeppli_pmf, visit_counts)
from .ulam import (SpectralResult, UlamOperator, build_ulam,
                   leading_eigenvalue, punch_hole, punch_hole_bracket,
                   survival_probability)

__version__ = "0.1.0"

__all__ = [
    "BakerParams", "Metric", "SymbolicPoint", "apply_map_coords",
    "apply_shift", "distance", "evaluate_coords", "periodic_point",
    "Ball", "EstimatorResult", "SRBSampler", "annulus_exponent",
    "annulus_ratio", "ball_measure", "dimension_formula",
    "draw_typical_center", "exact_ball_measure", "local_dimension",
    "sample_srb",
    "EIEstimate", "EvtConfig", "GumbelResult", "block_maximum",
    "gumbel_experiment", "lebesgue_start_experiment", "observable_phi",
    "qk_estimator", "survival_curve", "theta_from_survival",
    "threshold_for_tau",
    "PeriodicGeometry", "ellipse_disk_ratio", "hat_alpha_reference",
    "theta_sup",
    "ClusterLaw", "VisitHistogram", "estimate_cluster_law",
    "geometric_cluster_test", "gof_distance", "poisson_pmf",
    "polya_aeppli_pmf", "visit_counts",
    "SpectralResult", "UlamOperator", "build_ulam", "leading_eigenvalue",
    "punch_hole", "punch_hole_bracket", "survival_probability",
    "__version__",
]
