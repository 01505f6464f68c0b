//! Ground truth that needs the event distribution: the randomized stationary
//! optimum `z_opt`, the maximal uniform slack `ξ*`, and exact one-step
//! conditional expectations of the drift-plus-penalty increment.
//!
//! The stationary program over per-event action distributions `π(a|w)` is
//!
//! ```text
//! minimize   Σ_w P(w) Σ_a π(a|w) z0(w,a)
//! subject to Σ_w P(w) Σ_a π(a|w) z_l(w,a) ≤ 0   for every constraint l
//!            Σ_a π(a|w) = 1, π ≥ 0               for every event w
//! ```

pub mod simplex;

use serde::{Deserialize, Deserializer, Serialize};

use crate::controller::select_action;
use crate::error::{Error, Result};
use crate::model::{dot, ActionVector, ProblemSpec};
use simplex::{LinearProgram, LpOutcome, Relation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

/// Optimal randomized stationary policy and the slack of the instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarySolution {
    /// `NaN` (JSON `null`) when the program is infeasible.
    #[serde(deserialize_with = "nullable_f64")]
    pub z_opt: f64,
    pub xi_star: f64,
    /// `policy[w][a]` is the probability of action `a` under event `w`.
    pub policy: Vec<Vec<f64>>,
    pub lp_status: LpStatus,
}

fn nullable_f64<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

impl StationarySolution {
    /// The slack used by every downstream bound: half of `ξ*`.
    pub fn xi(&self) -> f64 {
        self.xi_star / 2.0
    }

    /// `E[z0]` and `E[z]` under the policy.
    pub fn expected_action(&self, spec: &ProblemSpec) -> (f64, Vec<f64>) {
        let mut z0 = 0.0;
        let mut z = vec![0.0; spec.num_constraints()];
        for (e, pi) in spec.events().iter().zip(&self.policy) {
            for (a, &p) in e.actions.iter().zip(pi) {
                z0 += e.probability * p * a.z0;
                for (acc, zl) in z.iter_mut().zip(&a.z) {
                    *acc += e.probability * p * zl;
                }
            }
        }
        (z0, z)
    }

    /// Unconditional probability of each action index, when every event
    /// offers the same number of actions.
    pub fn action_marginals(&self, spec: &ProblemSpec) -> Option<Vec<f64>> {
        let k = spec.events().first()?.actions.len();
        if spec.events().iter().any(|e| e.actions.len() != k) {
            return None;
        }
        let mut out = vec![0.0; k];
        for (e, pi) in spec.events().iter().zip(&self.policy) {
            for (o, p) in out.iter_mut().zip(pi) {
                *o += e.probability * p;
            }
        }
        Some(out)
    }
}

fn num_policy_vars(spec: &ProblemSpec) -> usize {
    spec.events().iter().map(|e| e.actions.len()).sum()
}

/// Rows shared by both programs: simplex constraints per event and the
/// expected-constraint coefficients, each padded with `extra` trailing zeros.
fn constraint_rows(spec: &ProblemSpec, extra: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = num_policy_vars(spec);
    let l = spec.num_constraints();
    let mut simplex_rows = Vec::with_capacity(spec.events().len());
    let mut expect_rows = vec![vec![0.0; n + extra]; l];
    let mut col = 0;
    for e in spec.events() {
        let mut row = vec![0.0; n + extra];
        for a in &e.actions {
            row[col] = 1.0;
            for (k, zl) in a.z.iter().enumerate() {
                expect_rows[k][col] = e.probability * zl;
            }
            col += 1;
        }
        simplex_rows.push(row);
    }
    (simplex_rows, expect_rows)
}

fn unpack_policy(spec: &ProblemSpec, x: &[f64]) -> Vec<Vec<f64>> {
    let mut col = 0;
    spec.events()
        .iter()
        .map(|e| {
            let raw: Vec<f64> = x[col..col + e.actions.len()].iter().map(|p| p.max(0.0)).collect();
            col += e.actions.len();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|p| p / s).collect()
        })
        .collect()
}

/// Minimum expected objective subject to `E[z_l] ≤ −margin` for all `l`.
/// `None` when no stationary policy achieves the margin.
pub fn solve_stationary_with_margin(spec: &ProblemSpec, margin: f64) -> Result<Option<(f64, Vec<Vec<f64>>)>> {
    let objective: Vec<f64> = spec
        .events()
        .iter()
        .flat_map(|e| e.actions.iter().map(move |a| e.probability * a.z0))
        .collect();
    let (simplex_rows, expect_rows) = constraint_rows(spec, 0);
    let mut lp = LinearProgram::minimize(objective);
    for row in simplex_rows {
        lp.constrain(row, Relation::Eq, 1.0);
    }
    for row in expect_rows {
        lp.constrain(row, Relation::Le, -margin);
    }
    match lp.solve()? {
        LpOutcome::Optimal { x, value } => Ok(Some((value, unpack_policy(spec, &x)))),
        LpOutcome::Infeasible => Ok(None),
        LpOutcome::Unbounded => Err(Error::InternalConsistency("stationary program reported unbounded".into())),
    }
}

/// `max_π min_l (−E[z_l])`, without checking its sign.
fn max_uniform_slack(spec: &ProblemSpec) -> Result<f64> {
    let n = num_policy_vars(spec);
    // Free slack s = s⁺ − s⁻ in the last two columns.
    let mut objective = vec![0.0; n + 2];
    objective[n] = -1.0;
    objective[n + 1] = 1.0;
    let (simplex_rows, expect_rows) = constraint_rows(spec, 2);
    let mut lp = LinearProgram::minimize(objective);
    for row in simplex_rows {
        lp.constrain(row, Relation::Eq, 1.0);
    }
    for mut row in expect_rows {
        row[n] = 1.0;
        row[n + 1] = -1.0;
        lp.constrain(row, Relation::Le, 0.0);
    }
    match lp.solve()? {
        LpOutcome::Optimal { value, .. } => Ok(-value),
        other => Err(Error::InternalConsistency(format!("max-slack program reported {other:?}"))),
    }
}

/// `ξ*`, the largest uniform margin any stationary policy achieves on all
/// constraints. Fails when it is not positive.
pub fn solve_max_slackness(spec: &ProblemSpec) -> Result<f64> {
    let xi_star = max_uniform_slack(spec)?;
    if xi_star <= 0.0 {
        return Err(Error::Slackness { xi_star });
    }
    if xi_star > spec.b() * (1.0 + 1e-12) {
        return Err(Error::InternalConsistency(format!("slack {xi_star} exceeds B = {}", spec.b())));
    }
    Ok(xi_star)
}

/// Solves the stationary program and the max-slack program.
pub fn solve_stationary_optimum(spec: &ProblemSpec) -> Result<StationarySolution> {
    let xi_star = max_uniform_slack(spec)?;
    let Some((z_opt, policy)) = solve_stationary_with_margin(spec, 0.0)? else {
        return Ok(StationarySolution { z_opt: f64::NAN, xi_star, policy: Vec::new(), lp_status: LpStatus::Infeasible });
    };
    let sol = StationarySolution { z_opt, xi_star, policy, lp_status: LpStatus::Optimal };

    let (_, ez) = sol.expected_action(spec);
    if let Some(bad) = ez.iter().position(|&v| v > 1e-9) {
        return Err(Error::InternalConsistency(format!("optimal policy violates constraint {bad}: E[z] = {}", ez[bad])));
    }
    Ok(sol)
}

/// `Σ_w P(w)·[V(z0 − z_opt) + Σ_l weight_l z_l]` where the action under each
/// event is `choose(q, actions)`.
pub fn exact_conditional_increment<F>(spec: &ProblemSpec, q: &[f64], weight: &[f64], z_opt: f64, choose: F) -> f64
where
    F: Fn(&[f64], &[ActionVector]) -> usize,
{
    let v = spec.v();
    spec.events()
        .iter()
        .map(|e| {
            let a = &e.actions[choose(q, &e.actions)];
            e.probability * (v * (a.z0 - z_opt) + dot(weight, &a.z))
        })
        .sum()
}

/// Exact `E[V(z0[t] − z_opt) + Σ Q_l[t] z_l[t] | Q[t] = q]` under the
/// drift-plus-penalty choice.
pub fn exact_conditional_dpp_expectation(spec: &ProblemSpec, q: &[f64], z_opt: f64) -> f64 {
    exact_conditional_increment(spec, q, q, z_opt, |q, actions| {
        select_action(q, actions, spec.v(), spec.tie_break()).0
    })
}

/// The single-constraint increment with the queue weight capped at `cap`.
pub fn exact_truncated_dpp_expectation(spec: &ProblemSpec, q1: f64, cap: f64, z_opt: f64) -> f64 {
    exact_conditional_increment(spec, &[q1], &[q1.min(cap)], z_opt, |q, actions| {
        select_action(q, actions, spec.v(), spec.tie_break()).0
    })
}
