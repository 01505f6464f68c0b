//! Batches of independent sample paths: per-path invariant assertions,
//! empirical tails with Wilson intervals, and the fit-then-validate test of
//! the order-ε convergence claims.
//!
//! Results are collected in path order and summed with compensated
//! summation, so a summary does not depend on the worker count.

mod stats;

use std::collections::BTreeSet;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    build_processes, calibrated_constants, check_telescoping, compute_constants, g_step_bound, g_tail_bound,
    queue_tail_bound, xtail_bound, xtail_lambda, BoundConstants,
};
use crate::controller::{dpp_value, run_path_with, ControlPolicy};
use crate::error::{invalid, Error, Result};
use crate::events::derive_path_seed;
use crate::model::{norm, scaled_tol, PathTrace, ProblemSpec, Statistic};
use crate::oracle::{exact_conditional_increment, solve_max_slackness, solve_stationary_optimum, LpStatus};

pub use stats::{coverage_quantile, quantiles, wilson_interval, NeumaierSum, Quantile, REPORTED_QUANTILES, Z95};

/// Environment variable that sizes the worker pool.
pub const THREADS_ENV: &str = "DPP_LAB_THREADS";

/// Minimum number of traces for an empirical tail estimate.
pub const MIN_TAIL_TRACES: usize = 30;

/// Stream ids at or above this value seed the calibration batch.
const CALIBRATION_STREAM: u64 = 1 << 63;

/// Coverage used when fitting the hidden constant `M`.
const FIT_COVERAGE: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    KeyFeature,
    QueueTail,
    XTail,
    GTail,
    Telescoping,
    ConvergenceMulti,
    ConvergenceSingle,
}

impl Check {
    pub const ALL: [Check; 7] = [
        Check::KeyFeature,
        Check::QueueTail,
        Check::XTail,
        Check::GTail,
        Check::Telescoping,
        Check::ConvergenceMulti,
        Check::ConvergenceSingle,
    ];

    pub fn single_constraint_only(self) -> bool {
        matches!(self, Check::GTail | Check::Telescoping | Check::ConvergenceSingle)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchConfig {
    pub num_paths: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub master_seed: u64,
    pub epsilon: f64,
    pub delta: f64,
    pub checks: BTreeSet<Check>,
    /// Paths used to fit `M` for the convergence checks.
    pub calibration_paths: usize,
    /// Overrides the calibrated truncation level.
    pub c1: Option<f64>,
    /// Extra queue-tail levels, given as the per-slot bound they produce.
    pub tail_probabilities: Vec<f64>,
    pub policy: ControlPolicy,
    #[serde(skip)]
    pub dump_traces: Option<PathBuf>,
}

impl Default for BatchConfig {
    fn default() -> Self {
        Self {
            num_paths: 100,
            horizon: 10_000,
            master_seed: 0,
            epsilon: 0.1,
            delta: 0.05,
            checks: BTreeSet::new(),
            calibration_paths: 1000,
            c1: None,
            tail_probabilities: vec![0.5, 0.1, 0.01],
            policy: ControlPolicy::DriftPlusPenalty,
            dump_traces: None,
        }
    }
}

impl BatchConfig {
    pub fn validate(&self, spec: &ProblemSpec) -> Result<()> {
        if self.num_paths == 0 {
            return Err(invalid("num_paths must be at least 1"));
        }
        if self.horizon == 0 {
            return Err(invalid("T must be at least 1"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid(format!("δ must lie in (0,1), got {}", self.delta)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(invalid(format!("ε must be positive, got {}", self.epsilon)));
        }
        if let Some(c1) = self.c1 {
            if !(c1 > 0.0) {
                return Err(invalid(format!("c1 must be positive, got {c1}")));
            }
        }
        if let Some(&p) = self.tail_probabilities.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
            return Err(invalid(format!("tail probability {p} outside (0,1)")));
        }
        if spec.num_constraints() != 1 {
            if let Some(c) = self.checks.iter().find(|c| c.single_constraint_only()) {
                return Err(invalid(format!("check {c:?} requires L = 1, spec has L = {}", spec.num_constraints())));
            }
        }
        let needs_m = self.checks.contains(&Check::ConvergenceMulti) || self.checks.contains(&Check::ConvergenceSingle);
        if needs_m && self.calibration_paths == 0 {
            return Err(invalid("convergence checks need calibration_paths ≥ 1"));
        }
        Ok(())
    }
}

/// One reported comparison between an empirical frequency and a bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check: Check,
    pub label: String,
    pub threshold: Option<f64>,
    /// Upper bound on a tail frequency, or the target coverage for the
    /// convergence checks.
    pub theoretical_bound: f64,
    pub empirical_frequency: f64,
    pub hits: u64,
    pub samples: u64,
    pub num_paths: usize,
    pub wilson_lower: f64,
    pub wilson_upper: f64,
    /// False only when the Wilson interval lies entirely on the wrong side of
    /// the bound.
    pub pass: bool,
    /// True when the whole interval lies on the right side of the bound.
    pub conclusive: bool,
    pub vacuous: bool,
    pub fitted_m: Option<f64>,
}

impl CheckResult {
    fn upper_tail(check: Check, label: String, threshold: Option<f64>, bound: f64, hits: u64, samples: u64, num_paths: usize) -> Self {
        let (lo, hi) = wilson_interval(hits, samples);
        let vacuous = bound >= 1.0;
        Self {
            check,
            label,
            threshold,
            theoretical_bound: bound,
            empirical_frequency: hits as f64 / samples as f64,
            hits,
            samples,
            num_paths,
            wilson_lower: lo,
            wilson_upper: hi,
            pass: vacuous || lo <= bound,
            conclusive: hi <= bound,
            vacuous,
            fitted_m: None,
        }
    }

    fn deterministic(check: Check, label: &str, failures: u64, num_paths: usize) -> Self {
        let mut r = Self::upper_tail(check, label.into(), None, 0.0, failures, num_paths as u64, num_paths);
        r.pass = failures == 0;
        r.conclusive = failures == 0;
        r
    }

    fn coverage(check: Check, label: String, target: f64, hits: u64, num_paths: usize, m: f64) -> Self {
        let (lo, hi) = wilson_interval(hits, num_paths as u64);
        Self {
            check,
            label,
            threshold: None,
            theoretical_bound: target,
            empirical_frequency: hits as f64 / num_paths as f64,
            hits,
            samples: num_paths as u64,
            num_paths,
            wilson_lower: lo,
            wilson_upper: hi,
            pass: hi >= target,
            conclusive: lo >= target,
            vacuous: false,
            fitted_m: Some(m),
        }
    }
}

/// Counts of deterministic-law failures, summed over all paths.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvariantCounts {
    pub queue_update: u64,
    pub drift_value: u64,
    pub drift_bound: u64,
    pub step_bound: u64,
    pub minimality: u64,
    pub key_feature: u64,
    pub truncated_key_feature: u64,
    pub y_step: u64,
    pub g_step: u64,
    pub telescoping: u64,
    pub union_decomposition: u64,
}

impl InvariantCounts {
    pub fn total(&self) -> u64 {
        self.queue_update
            + self.drift_value
            + self.drift_bound
            + self.step_bound
            + self.minimality
            + self.key_feature
            + self.truncated_key_feature
            + self.y_step
            + self.g_step
            + self.telescoping
            + self.union_decomposition
    }

    fn merge(&mut self, o: &Self) {
        self.queue_update += o.queue_update;
        self.drift_value += o.drift_value;
        self.drift_bound += o.drift_bound;
        self.step_bound += o.step_bound;
        self.minimality += o.minimality;
        self.key_feature += o.key_feature;
        self.truncated_key_feature += o.truncated_key_feature;
        self.y_step += o.y_step;
        self.g_step += o.g_step;
        self.telescoping += o.telescoping;
        self.union_decomposition += o.union_decomposition;
    }
}

/// Where to replay the first failing law.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViolationSite {
    pub path_id: usize,
    pub seed: u64,
    pub slot: usize,
    pub what: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub spec_digest: String,
    pub master_seed: u64,
    pub num_paths: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub policy: ControlPolicy,
    pub z_opt: f64,
    pub xi_star: f64,
    pub xi: f64,
    pub constants: BoundConstants,
    pub vacuity_crossover_c1: f64,
    pub checks: Vec<CheckResult>,
    pub objective_mean: f64,
    pub objective_quantiles: Vec<Quantile>,
    /// Quantiles of `max_l (1/T) Σ z_l` across paths.
    pub constraint_violation_quantiles: Vec<Quantile>,
    pub max_queue_norm: f64,
    pub invariant_violations: u64,
    pub invariant_counts: InvariantCounts,
    pub first_violation: Option<ViolationSite>,
    #[serde(rename = "fitted_M")]
    pub fitted_m: Option<f64>,
}

impl BatchSummary {
    pub fn statistical_failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.pass)
    }

    /// `Err` carrying the replay site when any deterministic law failed.
    pub fn ensure_invariants(&self) -> Result<()> {
        match &self.first_violation {
            None => Ok(()),
            Some(site) => Err(Error::InvariantViolation {
                seed: site.seed,
                slot: site.slot,
                what: format!("path {}: {} ({} violations in total)", site.path_id, site.what, self.invariant_violations),
            }),
        }
    }

    pub fn check(&self, check: Check) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(move |c| c.check == check)
    }
}

/// Frequency of a per-trace statistic beyond a threshold, with its 95%
/// Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub frequency: f64,
    pub hits: u64,
    pub num_traces: usize,
    pub wilson_lower: f64,
    pub wilson_upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TailStatistic {
    /// `X[T] ≥ threshold`
    XT,
    /// `G[T] ≥ threshold` (one constraint)
    GT,
    /// `max_{t ≤ T} ‖Q[t]‖ > threshold`
    QueueNormMax,
}

pub fn empirical_tail(
    traces: &[PathTrace],
    statistic: TailStatistic,
    threshold: f64,
    z_opt: f64,
    constants: &BoundConstants,
) -> Result<TailEstimate> {
    if traces.len() < MIN_TAIL_TRACES {
        return Err(invalid(format!("empirical tail needs at least {MIN_TAIL_TRACES} traces, got {}", traces.len())));
    }
    let mut hits = 0u64;
    for trace in traces {
        let hit = match statistic {
            TailStatistic::XT => *build_processes(trace, z_opt, constants).x.last().unwrap() >= threshold,
            TailStatistic::GT => {
                let p = build_processes(trace, z_opt, constants);
                let g = p.g.ok_or_else(|| invalid("G[T] needs a single-constraint trace"))?;
                *g.last().unwrap() >= threshold
            }
            TailStatistic::QueueNormMax => (1..=trace.len()).any(|t| norm(trace.queue_at(t)) > threshold),
        };
        hits += hit as u64;
    }
    let (lo, hi) = wilson_interval(hits, traces.len() as u64);
    Ok(TailEstimate {
        frequency: hits as f64 / traces.len() as f64,
        hits,
        num_traces: traces.len(),
        wilson_lower: lo,
        wilson_upper: hi,
    })
}

/// Runs `f` in a pool sized by `DPP_LAB_THREADS` when set.
pub fn with_worker_pool<R: Send>(f: impl FnOnce() -> R + Send) -> Result<R> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
            if n == 0 {
                return Err(Error::Config(format!("{THREADS_ENV} must be at least 1")));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
            Ok(pool.install(f))
        }
        Err(_) => Ok(f()),
    }
}

/// Everything a worker needs to evaluate one path.
struct PathContext<'a> {
    spec: &'a ProblemSpec,
    config: &'a BatchConfig,
    z_opt: f64,
    constants: BoundConstants,
    /// Truncation levels for the queue-tail check; the first is `constants.c1`.
    levels: Vec<f64>,
    x_lambda: f64,
    g_lambda: Option<f64>,
    single_regime: bool,
}

#[derive(Debug, Clone, Default)]
struct PathOutcome {
    avg_objective: f64,
    avg_constraints: Vec<f64>,
    max_norm: f64,
    /// Slots `t ≤ T` with `‖Q[t]‖` above each level.
    slot_hits: Vec<u64>,
    x_hit: bool,
    g_hit: bool,
    telescoping_fail: bool,
    counts: InvariantCounts,
    first_violation: Option<(usize, String)>,
}

impl PathOutcome {
    fn flag(&mut self, slot: usize, what: impl FnOnce() -> String) {
        if self.first_violation.is_none() {
            self.first_violation = Some((slot, what()));
        }
    }

    /// `max(avg z0 − z_opt, max_l avg z_l) / ε`: the smallest `M` for which
    /// this path meets both order-ε targets.
    fn required_m(&self, z_opt: f64, epsilon: f64) -> f64 {
        let worst = self.avg_constraints.iter().copied().fold(self.avg_objective - z_opt, f64::max);
        worst / epsilon
    }
}

fn averages(trace: &PathTrace) -> (f64, Vec<f64>) {
    let obj = trace.time_average(Statistic::Objective).expect("nonempty trace");
    let cons = (0..trace.num_constraints())
        .map(|l| trace.time_average(Statistic::Constraint(l)).expect("index in range"))
        .collect();
    (obj, cons)
}

impl PathContext<'_> {
    fn simulate(&self, seed: u64) -> Result<PathTrace> {
        run_path_with(self.spec, seed, self.config.horizon, self.config.policy)
    }

    fn evaluate(&self, path_id: usize, seed: u64) -> Result<PathOutcome> {
        let trace = self.simulate(seed)?;
        if let Some(dir) = &self.config.dump_traces {
            let file = std::fs::File::create(dir.join(format!("path_{path_id:06}.csv")))?;
            trace.write_csv(std::io::BufWriter::new(file))?;
        }
        let spec = self.spec;
        let k = &self.constants;
        let v = spec.v();
        let b = spec.b();
        let cap = k.c0 * v;
        let check_key = self.config.checks.contains(&Check::KeyFeature);

        let (avg_objective, avg_constraints) = averages(&trace);
        let mut out = PathOutcome {
            avg_objective,
            avg_constraints,
            slot_hits: vec![0; self.levels.len()],
            ..Default::default()
        };

        for r in trace.records() {
            let t = r.t;
            if !r.queue_update_exact() {
                out.counts.queue_update += 1;
                out.flag(t, || "queue update law".into());
            }
            let drift_now = 0.5 * (crate::model::squared_norm(r.q_after) - crate::model::squared_norm(r.q_before));
            if r.drift != drift_now {
                out.counts.drift_value += 1;
                out.flag(t, || format!("drift {} differs from recomputed {drift_now}", r.drift));
            }
            if !crate::model::drift_upper_bound_check(&r, b) {
                out.counts.drift_bound += 1;
                out.flag(t, || "drift upper bound".into());
            }
            if !r.step_within(b) {
                out.counts.step_bound += 1;
                out.flag(t, || "queue norm step exceeds B".into());
            }
            let actions = &spec.events()[r.event_id].actions;
            let chosen = dpp_value(r.q_before, &actions[r.action_index], v);
            if let Some(better) = actions.iter().position(|a| dpp_value(r.q_before, a, v) < chosen) {
                out.counts.minimality += 1;
                out.flag(t, || format!("action {better} beats chosen action {}", r.action_index));
            }

            let qn = norm(r.q_before);
            out.max_norm = out.max_norm.max(qn);
            for (hits, &level) in out.slot_hits.iter_mut().zip(&self.levels) {
                *hits += (qn > level) as u64;
            }

            if check_key {
                let tol = scaled_tol(v * spec.z_max() + qn * b);
                let policy = self.config.policy;
                let choose = |q: &[f64], a: &[crate::model::ActionVector]| policy.choose(q, a, v, spec.tie_break());
                let e = exact_conditional_increment(spec, r.q_before, r.q_before, self.z_opt, choose);
                if e > tol {
                    out.counts.key_feature += 1;
                    out.flag(t, || format!("conditional drift-plus-penalty expectation {e} > 0"));
                }
                if self.single_regime {
                    let e = exact_conditional_increment(spec, r.q_before, &[r.q_before[0].min(cap)], self.z_opt, choose);
                    if e > tol {
                        out.counts.truncated_key_feature += 1;
                        out.flag(t, || format!("truncated conditional expectation {e} > 0"));
                    }
                }
            }
        }
        out.max_norm = out.max_norm.max(norm(trace.final_queue()));

        let p = build_processes(&trace, self.z_opt, k);
        let horizon = trace.len();
        for t in 1..=horizon {
            let dy = (p.y[t] - p.y[t - 1]).abs();
            if dy > k.c2 + scaled_tol(p.y[t].abs()) {
                out.counts.y_step += 1;
                out.flag(t, || format!("stopped process step {dy} exceeds c2 = {}", k.c2));
            }
        }
        let x_t = p.x[horizon];
        if x_t != p.y[horizon] {
            let crossed = (1..=horizon).any(|t| norm(trace.queue_at(t)) > k.c1);
            if !crossed {
                out.counts.union_decomposition += 1;
                out.flag(horizon, || "X[T] ≠ Y[T] without a queue exceedance".into());
            }
        }
        out.x_hit = x_t >= self.x_lambda;

        if let (Some(g), true) = (&p.g, self.single_regime) {
            let bound = g_step_bound(k);
            for t in 1..=horizon {
                let dg = (g[t] - g[t - 1]).abs();
                if dg > bound + scaled_tol(g[t].abs()) {
                    out.counts.g_step += 1;
                    out.flag(t, || format!("truncated process step {dg} exceeds {bound}"));
                }
            }
            if let Some(lambda) = self.g_lambda {
                out.g_hit = g[horizon] >= lambda;
            }
            let rep = check_telescoping(&trace, k)?;
            if !rep.pass {
                out.telescoping_fail = true;
                out.counts.telescoping += 1;
                out.flag(rep.n_j, || format!("telescoping gap {} > {} or average {} below floor", rep.lhs_gap, rep.bound, rep.truncated_average));
            }
        }
        Ok(out)
    }

    fn required_m(&self, seed: u64) -> Result<f64> {
        let trace = self.simulate(seed)?;
        let (avg_objective, avg_constraints) = averages(&trace);
        let o = PathOutcome { avg_objective, avg_constraints, ..Default::default() };
        Ok(o.required_m(self.z_opt, self.config.epsilon))
    }
}

/// Runs the batch and evaluates every requested check.
///
/// Deterministic-law failures do not abort the batch; they are counted in the
/// summary, and [`BatchSummary::ensure_invariants`] turns them into an error
/// with the replay seed and slot.
pub fn run_batch(spec: &ProblemSpec, config: &BatchConfig) -> Result<BatchSummary> {
    config.validate(spec)?;
    let sol = solve_stationary_optimum(spec)?;
    if sol.lp_status == LpStatus::Infeasible {
        return Err(invalid("the stationary program is infeasible; no optimum to compare against"));
    }
    let xi_star = solve_max_slackness(spec)?;
    let xi = xi_star / 2.0;
    let constants = match config.c1 {
        Some(c1) => compute_constants(spec, xi, c1)?,
        None => calibrated_constants(spec, xi, config.horizon, config.delta)?,
    };
    let single_regime = spec.num_constraints() == 1 && constants.single_constraint_regime();
    if !single_regime && (config.checks.contains(&Check::Telescoping) || config.checks.contains(&Check::GTail)) {
        return Err(Error::OutOfRange(format!("V = {} is below B/C0 = {}", spec.v(), spec.b() / constants.c0)));
    }
    if let Some(dir) = &config.dump_traces {
        std::fs::create_dir_all(dir)?;
    }

    let mut levels = vec![constants.c1];
    levels.extend(config.tail_probabilities.iter().map(|&p| constants.c1_for_tail_probability(p)));
    let ctx = PathContext {
        spec,
        config,
        z_opt: sol.z_opt,
        constants,
        levels,
        x_lambda: xtail_lambda(&constants, config.horizon, config.delta)?,
        g_lambda: if single_regime { Some(g_tail_bound(&constants, config.horizon, config.delta)?) } else { None },
        single_regime,
    };

    let outcomes: Vec<PathOutcome> = with_worker_pool(|| {
        (0..config.num_paths)
            .into_par_iter()
            .map(|i| ctx.evaluate(i, derive_path_seed(config.master_seed, i as u64)))
            .collect::<Result<Vec<_>>>()
    })??;

    let needs_m = config.checks.contains(&Check::ConvergenceMulti) || config.checks.contains(&Check::ConvergenceSingle);
    let fitted_m = if needs_m {
        let calib: Vec<f64> = with_worker_pool(|| {
            (0..config.calibration_paths)
                .into_par_iter()
                .map(|i| ctx.required_m(derive_path_seed(config.master_seed, CALIBRATION_STREAM | i as u64)))
                .collect::<Result<Vec<_>>>()
        })??;
        Some(coverage_quantile(&calib, FIT_COVERAGE))
    } else {
        None
    };

    Ok(summarize(&ctx, &sol.z_opt, xi_star, outcomes, fitted_m))
}

fn summarize(ctx: &PathContext<'_>, z_opt: &f64, xi_star: f64, outcomes: Vec<PathOutcome>, fitted_m: Option<f64>) -> BatchSummary {
    let config = ctx.config;
    let k = ctx.constants;
    let n = outcomes.len();
    let horizon = config.horizon;

    let mut counts = InvariantCounts::default();
    let mut first_violation = None;
    for (i, o) in outcomes.iter().enumerate() {
        counts.merge(&o.counts);
        if first_violation.is_none() {
            if let Some((slot, what)) = &o.first_violation {
                first_violation = Some(ViolationSite {
                    path_id: i,
                    seed: derive_path_seed(config.master_seed, i as u64),
                    slot: *slot,
                    what: what.clone(),
                });
            }
        }
    }

    let mut checks = Vec::new();
    for &check in &config.checks {
        match check {
            Check::KeyFeature => {
                let failing = outcomes
                    .iter()
                    .filter(|o| o.counts.key_feature + o.counts.truncated_key_feature > 0)
                    .count() as u64;
                checks.push(CheckResult::deterministic(check, "conditional increment ≤ 0 at every visited state", failing, n));
            }
            Check::QueueTail => {
                for (j, &level) in ctx.levels.iter().enumerate() {
                    let pooled: u64 = outcomes.iter().map(|o| o.slot_hits[j]).sum();
                    let per_path = outcomes.iter().filter(|o| o.slot_hits[j] > 0).count() as u64;
                    let name = if j == 0 { "calibrated".to_string() } else { format!("p={}", config.tail_probabilities[j - 1]) };
                    checks.push(CheckResult::upper_tail(
                        check,
                        format!("per-slot ‖Q[t]‖ > c1 ({name})"),
                        Some(level),
                        queue_tail_bound(&k, level),
                        pooled,
                        (n * horizon) as u64,
                        n,
                    ));
                    let union = (queue_tail_bound(&k, level) * horizon as f64).min(1.0);
                    checks.push(CheckResult::upper_tail(
                        check,
                        format!("max over t of ‖Q[t]‖ > c1 ({name})"),
                        Some(level),
                        union,
                        per_path,
                        n as u64,
                        n,
                    ));
                }
            }
            Check::XTail => {
                let hits = outcomes.iter().filter(|o| o.x_hit).count() as u64;
                checks.push(CheckResult::upper_tail(
                    check,
                    "X[T] ≥ λ".into(),
                    Some(ctx.x_lambda),
                    xtail_bound(&k, horizon, ctx.x_lambda),
                    hits,
                    n as u64,
                    n,
                ));
            }
            Check::GTail => {
                let hits = outcomes.iter().filter(|o| o.g_hit).count() as u64;
                checks.push(CheckResult::upper_tail(check, "G[T] ≥ λ".into(), ctx.g_lambda, config.delta, hits, n as u64, n));
            }
            Check::Telescoping => {
                let failing = outcomes.iter().filter(|o| o.telescoping_fail).count() as u64;
                checks.push(CheckResult::deterministic(check, "truncated partial sums telescope", failing, n));
            }
            Check::ConvergenceMulti | Check::ConvergenceSingle => {
                let m = fitted_m.expect("fitted when a convergence check is requested");
                let hits = outcomes.iter().filter(|o| o.required_m(*z_opt, config.epsilon) <= m).count() as u64;
                checks.push(CheckResult::coverage(
                    check,
                    format!("objective within z_opt + Mε and constraints within Mε (M = {m:.6})"),
                    1.0 - 2.0 * config.delta,
                    hits,
                    n,
                    m,
                ));
            }
        }
    }

    let mut objectives: Vec<f64> = outcomes.iter().map(|o| o.avg_objective).collect();
    let objective_mean = objectives.iter().copied().collect::<NeumaierSum>().total() / n as f64;
    let mut violations: Vec<f64> = outcomes
        .iter()
        .map(|o| o.avg_constraints.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();

    BatchSummary {
        spec_digest: ctx.spec.digest(),
        master_seed: config.master_seed,
        num_paths: n,
        horizon,
        policy: config.policy,
        z_opt: *z_opt,
        xi_star,
        xi: k.xi,
        constants: k,
        vacuity_crossover_c1: k.vacuity_crossover(),
        checks,
        objective_mean,
        objective_quantiles: quantiles(&mut objectives, &REPORTED_QUANTILES),
        constraint_violation_quantiles: quantiles(&mut violations, &REPORTED_QUANTILES),
        max_queue_norm: outcomes.iter().map(|o| o.max_norm).fold(0.0, f64::max),
        invariant_violations: counts.total(),
        invariant_counts: counts,
        first_violation,
        fitted_m,
    }
}
