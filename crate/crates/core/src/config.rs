//! TOML run configuration.
//!
//! ```toml
//! problem = "server-scheduling-3x2"   # builtin name, or an inline [problem] table
//! arrival_means = [0.5, 0.7, 0.4]     # builtins only
//! V = 10.0
//! T = 10000
//! seed = 1
//! output = "out"
//!
//! [batch]
//! num_paths = 100
//! epsilon = 0.1
//! delta = 0.05
//! checks = ["key-feature", "queue-tail", "x-tail"]
//!
//! [sweep]
//! V = [1.0, 10.0, 100.0]
//! checkpoints = 25
//! ```
//!
//! Unknown keys anywhere are rejected.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::events::{builtin, DEFAULT_ARRIVAL_MEANS};
use crate::model::ProblemSpec;
use crate::montecarlo::{BatchConfig, Check};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    /// Builtin name or inline problem table.
    pub problem: toml::Value,
    pub arrival_means: Option<[f64; 3]>,
    #[serde(rename = "V")]
    pub v: Option<f64>,
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(default)]
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub batch: Option<BatchSection>,
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchSection {
    pub num_paths: Option<usize>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub checks: Option<BTreeSet<Check>>,
    pub calibration_paths: Option<usize>,
    pub c1: Option<f64>,
    pub tail_probabilities: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(rename = "V")]
    pub v: Option<Vec<f64>>,
    pub epsilon: Option<Vec<f64>>,
    pub checkpoints: Option<usize>,
}

fn config_err(msg: impl std::fmt::Display) -> Error {
    Error::Config(msg.to_string())
}

impl RunConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(config_err)?;
        if cfg.horizon == 0 {
            return Err(config_err("T must be at least 1"));
        }
        if let Some(v) = cfg.v {
            if !(v.is_finite() && v > 0.0) {
                return Err(config_err(format!("V must be a positive finite real, got {v}")));
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => config_err(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// The validated problem, with `V` taken from the top level when given.
    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        match &self.problem {
            toml::Value::String(name) => {
                let v = self.v.ok_or_else(|| config_err("a builtin problem needs a top-level V"))?;
                builtin(name, self.arrival_means.unwrap_or(DEFAULT_ARRIVAL_MEANS), v).map_err(config_err)
            }
            toml::Value::Table(_) => {
                if self.arrival_means.is_some() {
                    return Err(config_err("arrival_means applies only to builtin problems"));
                }
                let spec: ProblemSpec =
                    self.problem.clone().try_into().map_err(|e| config_err(format!("[problem]: {e}")))?;
                match self.v {
                    Some(v) => spec.with_v(v),
                    None => Ok(spec),
                }
            }
            other => Err(config_err(format!("problem must be a builtin name or a table, got {}", other.type_str()))),
        }
    }

    /// Batch settings from the `[batch]` section on top of the defaults.
    pub fn batch_config(&self) -> BatchConfig {
        let d = BatchConfig::default();
        let b = self.batch.clone().unwrap_or_default();
        BatchConfig {
            num_paths: b.num_paths.unwrap_or(d.num_paths),
            horizon: self.horizon,
            master_seed: self.seed,
            epsilon: b.epsilon.unwrap_or(d.epsilon),
            delta: b.delta.unwrap_or(d.delta),
            checks: b.checks.unwrap_or_default(),
            calibration_paths: b.calibration_paths.unwrap_or(d.calibration_paths),
            c1: b.c1,
            tail_probabilities: b.tail_probabilities.unwrap_or(d.tail_probabilities),
            policy: d.policy,
            dump_traces: None,
        }
    }

    /// Output directory, defaulting to the working directory.
    pub fn output_dir(&self) -> PathBuf {
        self.output.clone().unwrap_or_else(|| PathBuf::from("."))
    }
}

/// Every check that applies to `spec`.
pub fn default_checks(spec: &ProblemSpec, single_regime: bool) -> BTreeSet<Check> {
    Check::ALL
        .into_iter()
        .filter(|c| match c {
            Check::GTail | Check::Telescoping => single_regime,
            Check::ConvergenceSingle => spec.num_constraints() == 1,
            Check::ConvergenceMulti => spec.num_constraints() > 1,
            _ => true,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_config() {
        let cfg = RunConfigFile::parse("problem = \"server-scheduling-3x2\"\nV = 10.0\nT = 100\n").unwrap();
        let spec = cfg.problem_spec().unwrap();
        assert_eq!(spec.v(), 10.0);
        assert_eq!(spec.num_constraints(), 3);
        let batch = cfg.batch_config();
        assert_eq!(batch.horizon, 100);
        assert_eq!(batch.num_paths, 100);
    }

    #[test]
    fn inline_problem() {
        let text = r#"
T = 5
[problem]
L = 1
z_max = 1.0
B = 1.0
V = 2.0
[[problem.events]]
probability = 1.0
actions = [{ z0 = 0.5, z = [-1.0] }]
"#;
        let cfg = RunConfigFile::parse(text).unwrap();
        let spec = cfg.problem_spec().unwrap();
        assert_eq!(spec.v(), 2.0);
        assert_eq!(spec.events().len(), 1);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = RunConfigFile::parse("problem = \"server-scheduling-3x2\"\nV = 1.0\nT = 10\ncolour = 3\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 4"), "{msg}");
        assert!(msg.contains("colour"), "{msg}");

        let err = RunConfigFile::parse("problem = \"server-scheduling-3x2\"\nV = 1.0\nT = 0\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));

        let err = RunConfigFile::parse("problem = \"x\"\nT = 10\n[batch]\nchecks = [\"nope\"]\n").unwrap_err();
        assert!(err.to_string().contains("line 4"), "{err}");
    }

    #[test]
    fn invalid_inline_problem_is_rejected() {
        let text = "T = 5\n[problem]\nL = 1\nz_max = 1.0\nB = 1.0\nV = 2.0\n[[problem.events]]\nprobability = 0.5\nactions = [{ z0 = 0.5, z = [-1.0] }]\n";
        let cfg = RunConfigFile::parse(text).unwrap();
        assert!(cfg.problem_spec().unwrap_err().to_string().contains("sum to"));
    }

    #[test]
    fn builtin_needs_v() {
        let cfg = RunConfigFile::parse("problem = \"server-scheduling-3x2\"\nT = 10\n").unwrap();
        assert!(cfg.problem_spec().is_err());
        let cfg = RunConfigFile::parse("problem = \"nope\"\nV = 1.0\nT = 10\n").unwrap();
        assert!(cfg.problem_spec().is_err());
    }
}
