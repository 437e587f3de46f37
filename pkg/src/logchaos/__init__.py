"""Numerical laboratory for log-correlated fields and complex chaos measures.

The package is organized around one decomposition: the log kernel is split
into a bounded remainder plus a ladder of unit-variance scale layers, each
supported on separations below e^(-t0-n).  Everything else (sampling,
mollified fields, chaos integrals, phase boundaries, Monte Carlo checks)
is built on top of that ladder.
"""

from .chaos import (ChaosParams, ChaosValue, bump_function, chaos_integral,
                    q0_for, sobolev_diag, truncated_chaos,
                    truncation_indicator, wick_exp, wick_exp_flagged)
from .grids import Grid
from .kernels import (KernelSpec, MollifiedKernelTable, PdReport, exact_level,
                      export_table, gram, k_exact, k_mollified, k_partial,
                      kappa, mollified_table, pd_check, q_mollified, q_n)
from .mollifier import (Mollifier, ResolutionError, convolve_grid,
                        discrete_stencil, quad_cloud, shrink_domain, theta,
                        theta_eps, weight_matrix)
from .phase import (BOUNDARY, L2, LABELS, PHASE_II, PHASE_III, SUBCRITICAL,
                    PhaseError, classify, pick_lambda, scan)
from .sampler import (FieldSample, NumericError, TiltShift, apply_tilt,
                      increment_factors, load_sample, replica_normals,
                      sample_increments, sample_mollified, save_sample,
                      tilt_shift_rows)
from .verify import (Bench, KernelEstimateReport, LadderReport,
                     MomentEstimate, SupFieldReport, TailBoundReport,
                     TiltedEventReport, cauchy_ladder, field_stats,
                     kernel_estimate_check, ladder_from_values, mc_moment,
                     mollifier_independence, moment_from_values,
                     second_moment_oracle, sobolev_ladder, sup_field_prob,
                     tail_bound_check, tilted_event_prob, trend_verdict)

__version__ = "0.1.0"

__all__ = [
    "BOUNDARY", "Bench", "ChaosParams", "ChaosValue", "FieldSample", "Grid",
    "KernelEstimateReport", "KernelSpec", "L2", "LABELS", "LadderReport",
    "MollifiedKernelTable", "Mollifier", "MomentEstimate", "NumericError",
    "PHASE_II", "PHASE_III", "PdReport", "PhaseError", "ResolutionError",
    "SUBCRITICAL", "SupFieldReport", "TailBoundReport", "TiltShift",
    "TiltedEventReport", "apply_tilt", "bump_function", "cauchy_ladder",
    "chaos_integral", "classify", "convolve_grid", "discrete_stencil",
    "exact_level", "export_table", "field_stats", "gram",
    "increment_factors", "k_exact", "k_mollified", "k_partial", "kappa",
    "kernel_estimate_check", "ladder_from_values", "load_sample",
    "mc_moment", "mollified_table", "mollifier_independence",
    "moment_from_values", "pd_check", "pick_lambda", "q0_for", "q_mollified",
    "q_n", "quad_cloud", "replica_normals", "sample_increments",
    "sample_mollified", "save_sample", "scan", "second_moment_oracle",
    "shrink_domain", "sobolev_diag", "sobolev_ladder", "sup_field_prob",
    "tail_bound_check", "theta", "theta_eps", "tilt_shift_rows",
    "tilted_event_prob", "trend_verdict", "truncated_chaos",
    "truncation_indicator", "weight_matrix", "wick_exp", "wick_exp_flagged",
    "__version__",
]
