use crate::analysis::constants::BoundConstants;
use crate::model::{dot, norm, PathTrace};

/// `X`, `τ`, `Y` and (for one constraint) `G` and the visit slots of a trace.
///
/// Index `t` of every sequence is the value after `t` slots, so `x[0] = 0`
/// and `x.len() = T + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedProcesses {
    pub x: Vec<f64>,
    /// First slot in `1..=T+1` with `‖Q[t]‖ > c1`.
    pub tau: Option<usize>,
    /// `y[t] = x[min(t, τ − 1)]`.
    pub y: Vec<f64>,
    /// Increments use `min(Q1[t], C0·V)` in place of `Q1[t]`.
    pub g: Option<Vec<f64>>,
    /// Slots `t` in `1..=T+1` with `Q1[t] ∈ [0, C0·V]`.
    pub visit_slots: Option<Vec<usize>>,
}

impl DerivedProcesses {
    /// Largest `|y[t] − y[t−1]|`.
    pub fn max_y_step(&self) -> f64 {
        max_step(&self.y)
    }

    pub fn max_g_step(&self) -> Option<f64> {
        self.g.as_deref().map(max_step)
    }
}

fn max_step(s: &[f64]) -> f64 {
    s.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max)
}

/// First slot in `1..=T+1` at which the queue norm exceeds `c1`.
pub fn first_exceedance(trace: &PathTrace, c1: f64) -> Option<usize> {
    (1..=trace.len() + 1).find(|&t| norm(trace.queue_at(t)) > c1)
}

pub fn build_processes(trace: &PathTrace, z_opt: f64, constants: &BoundConstants) -> DerivedProcesses {
    let n = trace.len();
    let v = constants.v;
    let cap = constants.c0 * v;

    let mut x = Vec::with_capacity(n + 1);
    x.push(0.0);
    let mut acc = 0.0;
    for r in trace.records() {
        acc += v * (r.z0 - z_opt) + dot(r.q_before, r.z);
        x.push(acc);
    }

    let tau = first_exceedance(trace, constants.c1);
    let y = match tau {
        None => x.clone(),
        Some(tau) => {
            let stop = tau - 1;
            (0..=n).map(|t| x[t.min(stop)]).collect()
        }
    };

    let (g, visit_slots) = if trace.num_constraints() == 1 {
        let mut g = Vec::with_capacity(n + 1);
        g.push(0.0);
        let mut acc = 0.0;
        for r in trace.records() {
            acc += v * (r.z0 - z_opt) + r.q_before[0].min(cap) * r.z[0];
            g.push(acc);
        }
        let visits = (1..=n + 1).filter(|&t| trace.queue_at(t)[0] <= cap).collect();
        (Some(g), Some(visits))
    } else {
        (None, None)
    };

    DerivedProcesses { x, tau, y, g, visit_slots }
}
