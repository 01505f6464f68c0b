//! Drift-plus-penalty control for stochastic optimization with time-average
//! constraints, with exact oracles, closed-form concentration bounds and a
//! Monte Carlo harness that checks sample paths against them.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod config;
pub mod controller;
pub mod error;
pub mod events;
pub mod model;
pub mod montecarlo;
pub mod oracle;

pub use controller::{run_path, run_path_with, select_action, ControlPolicy, DppState};
pub use error::{Error, Result};
pub use model::{ActionVector, EventOutcome, PathTrace, ProblemSpec, SlotRecord, Statistic, TieBreak};
