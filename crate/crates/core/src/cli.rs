//! `dpp-lab` command line: `simulate`, `bounds`, `verify` and `sweep`.
//!
//! Exit codes: 0 success, 1 configuration error, 2 invariant violation,
//! 3 statistical failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::analysis::{
    calibrated_constants, convergence_residual_check, convergence_time_multi, convergence_time_single, g_tail_bound,
    queue_tail_bound, xtail_lambda, xtail_lambda_ceiling, BoundConstants, ResidualCheck,
};
use crate::config::{default_checks, RunConfigFile};
use crate::controller::{run_path_with, ControlPolicy};
use crate::error::{Error, Result};
use crate::model::{norm, ProblemSpec, Statistic};
use crate::montecarlo::{run_batch, BatchSummary, NeumaierSum};
use crate::oracle::{solve_max_slackness, solve_stationary_optimum, LpStatus};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_INVARIANT: u8 = 2;
pub const EXIT_STATISTICAL: u8 = 3;

const DEFAULT_CHECKPOINTS: usize = 25;

#[derive(Debug, Parser)]
#[command(name = "dpp-lab", version, about = "Drift-plus-penalty simulation and sample-path bound verification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Overrides the number of Monte Carlo paths.
    #[arg(long, global = true, value_name = "N")]
    pub paths: Option<usize>,
    #[arg(long, global = true, value_name = "F")]
    pub epsilon: Option<f64>,
    #[arg(long, global = true, value_name = "F")]
    pub delta: Option<f64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Write one CSV per Monte Carlo path under `<out>/traces`.
    #[arg(long, global = true)]
    pub dump_traces: bool,
    /// Fault injection for negative controls.
    #[arg(long, global = true, value_enum, hide = true, value_name = "MODE")]
    pub chaos: Option<ChaosMode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChaosMode {
    SkipMinimization,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one path; write its trace CSV and a summary JSON.
    Simulate,
    /// Print every constant and both convergence times.
    Bounds,
    /// Run a Monte Carlo batch and check it against the bounds.
    Verify,
    /// Time averages at log-spaced checkpoints for a list of V values.
    Sweep {
        #[arg(long, value_delimiter = ',', value_name = "V,...")]
        v_list: Vec<f64>,
        /// Sweep V = 1/ε instead.
        #[arg(long, value_delimiter = ',', value_name = "EPS,...", conflicts_with = "v_list")]
        epsilon_list: Vec<f64>,
        #[arg(long, value_name = "N")]
        checkpoints: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub spec_digest: String,
    pub seed: u64,
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub time_avg_objective: f64,
    pub time_avg_constraints: Vec<f64>,
    pub final_queue_norm: f64,
    pub z_opt: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub spec_digest: String,
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub z_opt: f64,
    pub xi_star: f64,
    pub xi: f64,
    pub constants: BoundConstants,
    pub vacuity_crossover_c1: f64,
    pub queue_tail_bound_at_c1: f64,
    pub x_tail_lambda: f64,
    pub x_tail_lambda_ceiling: f64,
    pub g_tail_threshold: Option<f64>,
    #[serde(rename = "T_multi")]
    pub t_multi: usize,
    #[serde(rename = "T_single")]
    pub t_single: Option<usize>,
    #[serde(rename = "T_single_note")]
    pub t_single_note: Option<String>,
    pub convergence_residual: ResidualCheck,
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::InvariantViolation { seed, slot, .. } = &e {
                eprintln!("replay: path seed {seed}, slot {slot}");
            }
            ExitCode::from(exit_code(&e))
        }
    }
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvariantViolation { .. } | Error::InternalConsistency(_) => EXIT_INVARIANT,
        _ => EXIT_CONFIG,
    }
}

struct Resolved {
    cfg: RunConfigFile,
    spec: ProblemSpec,
    seed: u64,
    policy: ControlPolicy,
}

fn resolve(common: &CommonArgs) -> Result<Resolved> {
    let path = common.config.as_ref().ok_or_else(|| Error::Config("--config PATH is required".into()))?;
    let cfg = RunConfigFile::load(path)?;
    let spec = cfg.problem_spec()?;
    let policy = match common.chaos {
        Some(ChaosMode::SkipMinimization) => ControlPolicy::SkipMinimization,
        None => ControlPolicy::DriftPlusPenalty,
    };
    Ok(Resolved { seed: common.seed.unwrap_or(cfg.seed), cfg, spec, policy })
}

fn out_dir(common: &CommonArgs, cfg: &RunConfigFile) -> Result<PathBuf> {
    let dir = common.out.clone().unwrap_or_else(|| cfg.output_dir());
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<u8> {
    let r = resolve(&cli.common)?;
    match &cli.command {
        Command::Simulate => cmd_simulate(&cli.common, &r),
        Command::Bounds => cmd_bounds(&cli.common, &r),
        Command::Verify => cmd_verify(&cli.common, &r),
        Command::Sweep { v_list, epsilon_list, checkpoints } => {
            cmd_sweep(&cli.common, &r, v_list, epsilon_list, *checkpoints)
        }
    }
}

fn optimum(spec: &ProblemSpec) -> Result<f64> {
    let sol = solve_stationary_optimum(spec)?;
    if sol.lp_status == LpStatus::Infeasible {
        return Err(Error::InvalidInput("the stationary program is infeasible".into()));
    }
    Ok(sol.z_opt)
}

fn cmd_simulate(common: &CommonArgs, r: &Resolved) -> Result<u8> {
    let z_opt = optimum(&r.spec)?;
    let trace = run_path_with(&r.spec, r.seed, r.cfg.horizon, r.policy)?;
    let dir = out_dir(common, &r.cfg)?;
    trace.write_csv(BufWriter::new(File::create(dir.join("trace.csv"))?))?;

    let time_avg_objective = trace.time_average(Statistic::Objective)?;
    let summary = SimulateSummary {
        spec_digest: trace.spec_digest.clone(),
        seed: r.seed,
        v: r.spec.v(),
        horizon: trace.len(),
        time_avg_objective,
        time_avg_constraints: (0..trace.num_constraints())
            .map(|l| trace.time_average(Statistic::Constraint(l)))
            .collect::<Result<_>>()?,
        final_queue_norm: norm(trace.final_queue()),
        z_opt,
        gap: time_avg_objective - z_opt,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(EXIT_OK)
}

pub fn bounds_report(spec: &ProblemSpec, horizon: usize, epsilon: f64, delta: f64) -> Result<BoundsReport> {
    let z_opt = optimum(spec)?;
    let xi_star = solve_max_slackness(spec)?;
    let xi = xi_star / 2.0;
    let k = calibrated_constants(spec, xi, horizon, delta)?;
    let t_multi = convergence_time_multi(epsilon, delta)?;
    let (t_single, t_single_note) = if spec.num_constraints() != 1 {
        (None, Some("not applicable: requires L = 1".to_string()))
    } else {
        match convergence_time_single(&k, epsilon, delta) {
            Ok(t) => (Some(t), None),
            Err(Error::OutOfRange(msg)) => (None, Some(format!("not applicable: {msg}"))),
            Err(e) => return Err(e),
        }
    };
    let g_tail_threshold = if spec.num_constraints() == 1 && k.single_constraint_regime() {
        Some(g_tail_bound(&k, horizon, delta)?)
    } else {
        None
    };
    Ok(BoundsReport {
        spec_digest: spec.digest(),
        v: spec.v(),
        horizon,
        epsilon,
        delta,
        z_opt,
        xi_star,
        xi,
        constants: k,
        vacuity_crossover_c1: k.vacuity_crossover(),
        queue_tail_bound_at_c1: queue_tail_bound(&k, k.c1),
        x_tail_lambda: xtail_lambda(&k, horizon, delta)?,
        x_tail_lambda_ceiling: xtail_lambda_ceiling(&k, horizon, delta)?,
        g_tail_threshold,
        t_multi,
        t_single,
        t_single_note,
        convergence_residual: convergence_residual_check(k.big_c, epsilon, delta)?,
    })
}

fn cmd_bounds(common: &CommonArgs, r: &Resolved) -> Result<u8> {
    let batch = r.cfg.batch_config();
    let epsilon = common.epsilon.unwrap_or(batch.epsilon);
    let delta = common.delta.unwrap_or(batch.delta);
    let report = bounds_report(&r.spec, r.cfg.horizon, epsilon, delta)?;
    if common.out.is_some() || r.cfg.output.is_some() {
        write_json(&out_dir(common, &r.cfg)?.join("bounds.json"), &report)?;
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(EXIT_OK)
}

fn print_table(summary: &BatchSummary) {
    println!(
        "{} paths, T = {}, z_opt = {}, xi = {}, c1 = {:.6}",
        summary.num_paths, summary.horizon, summary.z_opt, summary.xi, summary.constants.c1
    );
    for c in &summary.checks {
        let verdict = if c.pass { "PASS" } else { "FAIL" };
        println!(
            "{verdict}  {:<12} {:<55} freq {:.6e}  bound {:.6e}  wilson [{:.3e}, {:.3e}]",
            serde_json::to_value(c.check).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default(),
            c.label,
            c.empirical_frequency,
            c.theoretical_bound,
            c.wilson_lower,
            c.wilson_upper
        );
    }
    println!("invariant violations: {}", summary.invariant_violations);
}

fn cmd_verify(common: &CommonArgs, r: &Resolved) -> Result<u8> {
    let mut batch = r.cfg.batch_config();
    batch.master_seed = r.seed;
    batch.policy = r.policy;
    if let Some(n) = common.paths {
        batch.num_paths = n;
    }
    if let Some(e) = common.epsilon {
        batch.epsilon = e;
    }
    if let Some(d) = common.delta {
        batch.delta = d;
    }
    let dir = out_dir(common, &r.cfg)?;
    if common.dump_traces {
        batch.dump_traces = Some(dir.join("traces"));
    }
    if batch.checks.is_empty() {
        let xi = solve_max_slackness(&r.spec)? / 2.0;
        let k = calibrated_constants(&r.spec, xi, batch.horizon, batch.delta)?;
        let single = r.spec.num_constraints() == 1 && k.single_constraint_regime();
        batch.checks = default_checks(&r.spec, single);
    }

    let summary = run_batch(&r.spec, &batch)?;
    write_json(&dir.join("batch_summary.json"), &summary)?;
    print_table(&summary);
    if let Err(e) = summary.ensure_invariants() {
        eprintln!("error: {e}");
        if let Some(site) = &summary.first_violation {
            eprintln!("replay: path {} seed {} slot {}", site.path_id, site.seed, site.slot);
        }
        return Ok(EXIT_INVARIANT);
    }
    if summary.statistical_failures().next().is_some() {
        return Ok(EXIT_STATISTICAL);
    }
    Ok(EXIT_OK)
}

/// About `n` log-spaced slot counts in `1..=horizon`, strictly increasing and
/// ending at `horizon`.
pub fn log_checkpoints(horizon: usize, n: usize) -> Vec<usize> {
    if n <= 1 || horizon == 1 {
        return vec![horizon];
    }
    let top = (horizon as f64).ln();
    let mut out: Vec<usize> = (0..n)
        .map(|i| ((top * i as f64 / (n - 1) as f64).exp().round() as usize).clamp(1, horizon))
        .collect();
    out.dedup();
    *out.last_mut().unwrap() = horizon;
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub time_avg_objective: f64,
    pub time_avg_queue_sum: f64,
}

/// Time averages of the objective and of `Σ_l Q_l[t]` at each checkpoint.
pub fn sweep_rows(
    spec: &ProblemSpec,
    v_values: &[f64],
    seed: u64,
    horizon: usize,
    checkpoints: usize,
    policy: ControlPolicy,
) -> Result<Vec<SweepRow>> {
    if v_values.is_empty() {
        return Err(Error::Config("sweep needs at least one V".into()));
    }
    let marks = log_checkpoints(horizon, checkpoints);
    let mut rows = Vec::with_capacity(v_values.len() * marks.len());
    for &v in v_values {
        let spec_v = spec.with_v(v).map_err(|e| Error::Config(e.to_string()))?;
        let trace = run_path_with(&spec_v, seed, horizon, policy)?;
        let mut obj = NeumaierSum::default();
        let mut qsum = NeumaierSum::default();
        let mut next = marks.iter().peekable();
        for r in trace.records() {
            obj.add(r.z0);
            qsum.add(r.q_before.iter().sum());
            if next.peek() == Some(&&r.t) {
                next.next();
                rows.push(SweepRow {
                    v,
                    horizon: r.t,
                    time_avg_objective: obj.total() / r.t as f64,
                    time_avg_queue_sum: qsum.total() / r.t as f64,
                });
            }
        }
    }
    Ok(rows)
}

fn cmd_sweep(
    common: &CommonArgs,
    r: &Resolved,
    v_list: &[f64],
    epsilon_list: &[f64],
    checkpoints: Option<usize>,
) -> Result<u8> {
    let section = r.cfg.sweep.clone().unwrap_or_default();
    let from_eps = |eps: &[f64]| -> Result<Vec<f64>> {
        eps.iter()
            .map(|&e| if e > 0.0 { Ok(1.0 / e) } else { Err(Error::Config(format!("ε must be positive, got {e}"))) })
            .collect()
    };
    let v_values = if !v_list.is_empty() {
        v_list.to_vec()
    } else if !epsilon_list.is_empty() {
        from_eps(epsilon_list)?
    } else if let Some(v) = section.v {
        v
    } else if let Some(e) = section.epsilon {
        from_eps(&e)?
    } else {
        vec![r.spec.v()]
    };
    let checkpoints = checkpoints.or(section.checkpoints).unwrap_or(DEFAULT_CHECKPOINTS);
    if checkpoints == 0 {
        return Err(Error::Config("checkpoints must be at least 1".into()));
    }
    let rows = sweep_rows(&r.spec, &v_values, r.seed, r.cfg.horizon, checkpoints, r.policy)?;

    let dir = out_dir(common, &r.cfg)?;
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(dir.join("sweep.csv"))?));
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;
    for &v in &v_values {
        if let Some(last) = rows.iter().rev().find(|row| row.v == v) {
            println!(
                "V = {v}: T = {}, objective {:.6}, queue sum {:.6}",
                last.horizon, last.time_avg_objective, last.time_avg_queue_sum
            );
        }
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoints_are_increasing_and_end_at_t() {
        let c = log_checkpoints(1_000_000, 25);
        assert!(c.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(*c.last().unwrap(), 1_000_000);
        assert_eq!(c[0], 1);
        assert_eq!(log_checkpoints(100, 1), vec![100]);
        assert_eq!(log_checkpoints(1, 10), vec![1]);
        let c = log_checkpoints(5, 50);
        assert_eq!(c, vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn clap_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
