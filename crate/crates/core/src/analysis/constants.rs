use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::ProblemSpec;

/// Every closed-form constant of the concentration analysis for one instance.
///
/// With slack `ξ`, step bound `B`, objective bound `z_max` and weight `V`:
///
/// ```text
/// C0 = (4 z_max + B²/V − ξ²/(4V)) / ξ
/// r  = 3ξ / (6B² + Bξ)          ρ = 1 − rξ/4
/// D  = (4e^{rB} + rξ − 4) e^{r C0 V} / (rξ)
/// c2 = 2 V z_max + B c1
/// C  = 2√2 (2 z_max + B/(rV) + (B/(rV)) ln((8e^{rB} + 2rξ − 8)/(rξ)) + B C0)
/// C2 = 2 z_max + C0 B
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    #[serde(rename = "C0")]
    pub c0: f64,
    pub r: f64,
    pub rho: f64,
    /// Overflows to `+∞` for large `V`; written as JSON `null`.
    #[serde(rename = "D", deserialize_with = "null_as_infinity")]
    pub d: f64,
    /// Queue-norm truncation level.
    pub c1: f64,
    /// Difference bound of the stopped process.
    pub c2: f64,
    #[serde(rename = "C")]
    pub big_c: f64,
    #[serde(rename = "C2")]
    pub c2_single: f64,
    pub xi: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub z_max: f64,
    #[serde(rename = "V")]
    pub v: f64,
}

fn null_as_infinity<'de, De: serde::Deserializer<'de>>(de: De) -> std::result::Result<f64, De::Error> {
    Ok(Option::<f64>::deserialize(de)?.unwrap_or(f64::INFINITY))
}

/// `(r, ρ, D)` for a process with step bound `γ`, drift `−β` above `σ`.
pub fn drift_lemma_constants(gamma: f64, beta: f64, sigma: f64) -> (f64, f64, f64) {
    let r = beta / (gamma * gamma + gamma * beta / 3.0);
    let rho = 1.0 - r * beta / 2.0;
    let d = ((r * gamma).exp() - rho) * (r * sigma).exp() / (1.0 - rho);
    (r, rho, d)
}

impl BoundConstants {
    pub fn from_parts(z_max: f64, b: f64, v: f64, xi: f64, c1: f64) -> Result<Self> {
        if !(xi > 0.0) {
            return Err(Error::Slackness { xi_star: xi });
        }
        if xi > b {
            return Err(Error::OutOfRange(format!("slack ξ = {xi} exceeds B = {b}")));
        }
        if !(c1 > 0.0) {
            return Err(invalid(format!("truncation level c1 must be positive, got {c1}")));
        }
        if !(z_max > 0.0 && b > 0.0 && v > 0.0) {
            return Err(invalid("z_max, B and V must be positive"));
        }

        let c0 = (4.0 * z_max + b * b / v - xi * xi / (4.0 * v)) / xi;
        let r = 3.0 * xi / (6.0 * b * b + b * xi);
        let rho = 1.0 - r * xi / 4.0;
        let rxi = r * xi;
        let d = (4.0 * (r * b).exp_m1() + rxi) * (r * c0 * v).exp() / rxi;
        let c2 = 2.0 * v * z_max + b * c1;
        let log_term = ((8.0 * (r * b).exp_m1() + 2.0 * rxi) / rxi).ln();
        let brv = b / (r * v);
        let big_c = 2.0 * std::f64::consts::SQRT_2 * (2.0 * z_max + brv + brv * log_term + b * c0);
        let c2_single = 2.0 * z_max + c0 * b;

        let out = Self { c0, r, rho, d, c1, c2, big_c, c2_single, xi, b, z_max, v };
        out.validate()?;
        Ok(out)
    }

    fn validate(&self) -> Result<()> {
        let fail = |what: String| Err(Error::InternalConsistency(what));
        if !(self.c0 > 0.0 && self.c0.is_finite()) {
            return fail(format!("C0 = {} is not positive and finite", self.c0));
        }
        if !(self.r > 0.0) {
            return fail(format!("r = {} is not positive", self.r));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return fail(format!("ρ = {} outside (0,1)", self.rho));
        }
        if !(self.d >= 1.0) {
            // D = ∞ is still a (vacuous) bound; NaN is not.
            return fail(format!("D = {} is below 1", self.d));
        }
        Ok(())
    }

    /// Same constants with a different truncation level `c1`.
    pub fn with_c1(&self, c1: f64) -> Result<Self> {
        if !(c1 > 0.0) {
            return Err(invalid(format!("truncation level c1 must be positive, got {c1}")));
        }
        Ok(Self { c1, c2: 2.0 * self.v * self.z_max + self.b * c1, ..*self })
    }

    /// `ln D`, computed without forming `D` (which overflows for large `V`).
    pub fn ln_d(&self) -> f64 {
        let rxi = self.r * self.xi;
        ((4.0 * (self.r * self.b).exp_m1() + rxi) / rxi).ln() + self.r * self.c0 * self.v
    }

    /// `c1` below which the queue tail bound `D e^{−r c1}` exceeds one.
    pub fn vacuity_crossover(&self) -> f64 {
        self.ln_d() / self.r
    }

    /// Truncation level with `D T e^{−r c1} = δ/2`.
    pub fn calibrated_c1(&self, horizon: usize, delta: f64) -> f64 {
        (self.ln_d() + (2.0 * horizon as f64 / delta).ln()) / self.r
    }

    /// Level `c1` at which the per-slot queue tail bound equals `p`.
    pub fn c1_for_tail_probability(&self, p: f64) -> f64 {
        (self.ln_d() - p.ln()) / self.r
    }

    /// Whether the deterministic-truncation analysis applies (`V ≥ B/C0`).
    pub fn single_constraint_regime(&self) -> bool {
        self.v >= self.b / self.c0
    }
}

/// Constants for `spec` at slack `xi` and truncation level `c1`.
pub fn compute_constants(spec: &ProblemSpec, xi: f64, c1: f64) -> Result<BoundConstants> {
    BoundConstants::from_parts(spec.z_max(), spec.b(), spec.v(), xi, c1)
}

/// Constants with `c1` set to the calibration `(1/r) ln(2DT/δ)`.
pub fn calibrated_constants(spec: &ProblemSpec, xi: f64, horizon: usize, delta: f64) -> Result<BoundConstants> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("δ must lie in (0,1), got {delta}")));
    }
    let provisional = compute_constants(spec, xi, 1.0)?;
    provisional.with_c1(provisional.calibrated_c1(horizon, delta))
}
