use serde::{Deserialize, Serialize};

use crate::analysis::bounds::truncated_average_floor;
use crate::analysis::constants::BoundConstants;
use crate::error::{invalid, Error, Result};
use crate::model::{scaled_tol, PathTrace};

/// Both single-constraint sum checks on one path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelescopingReport {
    /// Last slot in `1..=T+1` with `Q1 ≤ C0·V`.
    pub n_j: usize,
    /// `|Σ_{t<n_J} (Q1 ∧ C0V) z1 − ½ Q1[n_J]²|`
    pub lhs_gap: f64,
    /// `(5/2) B² (n_J − 1)`
    pub bound: f64,
    /// `(1/T) Σ_{t≤T} (Q1 ∧ C0V) z1`
    pub truncated_average: f64,
    /// `−(5/2) B²`
    pub average_floor: f64,
    pub pass: bool,
}

pub fn check_telescoping(trace: &PathTrace, constants: &BoundConstants) -> Result<TelescopingReport> {
    if trace.num_constraints() != 1 {
        return Err(invalid(format!("telescoping check needs L = 1, trace has L = {}", trace.num_constraints())));
    }
    if trace.is_empty() {
        return Err(invalid("telescoping check on an empty trace"));
    }
    if !constants.single_constraint_regime() {
        return Err(Error::OutOfRange(format!(
            "V = {} is below B/C0 = {}",
            constants.v,
            constants.b / constants.c0
        )));
    }
    let cap = constants.c0 * constants.v;
    let b = constants.b;
    let n = trace.len();

    // Q1[1] = 0 is always a visit, so n_J exists.
    let n_j = (1..=n + 1).rev().find(|&t| trace.queue_at(t)[0] <= cap).unwrap_or(1);

    let mut prefix = 0.0;
    let mut prefix_mag = 0.0;
    let mut total = 0.0;
    let mut total_mag = 0.0;
    for r in trace.records() {
        let term = r.q_before[0].min(cap) * r.z[0];
        if r.t < n_j {
            prefix += term;
            prefix_mag += term.abs();
        }
        total += term;
        total_mag += term.abs();
    }
    let q_nj = trace.queue_at(n_j)[0];
    let half_sq = 0.5 * q_nj * q_nj;
    let lhs_gap = (prefix - half_sq).abs();
    let bound = 2.5 * b * b * (n_j - 1) as f64;
    let truncated_average = total / n as f64;
    let average_floor = truncated_average_floor(b);

    let gap_ok = lhs_gap <= bound + scaled_tol(prefix_mag + half_sq);
    let avg_ok = truncated_average >= average_floor - scaled_tol(total_mag / n as f64);
    Ok(TelescopingReport { n_j, lhs_gap, bound, truncated_average, average_floor, pass: gap_ok && avg_ok })
}
