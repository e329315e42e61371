"""Information matrices of 1D mixtures: quadrature, scaling limits and asymptotics."""

from .asymptotics import (
    delta2_asymptotic_ratio,
    delta2_integral,
    g2_integral,
    g_integral,
    g_prime_at_1,
    matching_point,
    matching_point_expansion,
    perturbation_lemma_check,
    perturbation_scaled,
)
from .limits import (
    InhomogeneousSpec,
    extended_limit,
    fisher_limit,
    inhomogeneous_limit,
    second_order_coefficient,
    second_order_limit,
    wasserstein_limit,
)
from .matrices import (
    M_TAIL,
    ExtendedMetric,
    MetricMatrix,
    Provenance,
    ScalingConstants,
    Variant,
    scaling_factor,
)
from .numeric import (
    between_means_integral,
    cross_block_numeric,
    diagonal_bounds,
    extended_matrix_numeric,
    fisher_matrix_numeric,
    mean_block_numeric,
    offdiagonal_bound,
    pair_matching_point,
    sigma_matrix,
    wasserstein_log_entries,
    wasserstein_matrix_numeric,
    wig_relation_check,
)

__all__ = [name for name in dir() if not name.startswith("_")]
