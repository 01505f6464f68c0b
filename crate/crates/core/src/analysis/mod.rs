//! Closed-form constants, probability bounds and the processes built from a
//! trace for assertion and measurement.

mod bounds;
mod constants;
mod processes;
mod telescoping;

pub use bounds::{
    azuma_bound, convergence_residual_check, convergence_time_multi, convergence_time_single, g_step_bound,
    g_tail_bound, queue_tail_bound, truncated_average_floor, xtail_bound, xtail_lambda, xtail_lambda_ceiling,
    ResidualCheck,
};
pub use constants::{calibrated_constants, compute_constants, drift_lemma_constants, BoundConstants};
pub use processes::{build_processes, first_exceedance, DerivedProcesses};
pub use telescoping::{check_telescoping, TelescopingReport};
