//! Probability bounds and convergence times. Natural logarithms throughout.

use serde::{Deserialize, Serialize};

use crate::analysis::constants::BoundConstants;
use crate::error::{invalid, Error, Result};

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("δ must lie in (0,1), got {delta}")));
    }
    Ok(())
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(invalid(format!("ε must be positive, got {epsilon}")));
    }
    Ok(())
}

/// `exp(−λ²/(2 T c2²))` clamped to `[0, 1]`.
pub fn azuma_bound(horizon: usize, c2: f64, lambda: f64) -> f64 {
    (-lambda * lambda / (2.0 * horizon as f64 * c2 * c2)).exp().clamp(0.0, 1.0)
}

/// `min(1, D e^{−r c1})`.
pub fn queue_tail_bound(constants: &BoundConstants, c1: f64) -> f64 {
    (constants.ln_d() - constants.r * c1).exp().min(1.0)
}

/// `T D e^{−r c1}` with the truncation level stored in `constants`.
fn bad_event_mass(constants: &BoundConstants, horizon: usize) -> f64 {
    (constants.ln_d() - constants.r * constants.c1 + (horizon as f64).ln()).exp()
}

/// `min(1, azuma + T D e^{−r c1})`: the tail of `X[T]` at `λ`.
pub fn xtail_bound(constants: &BoundConstants, horizon: usize, lambda: f64) -> f64 {
    (azuma_bound(horizon, constants.c2, lambda) + bad_event_mass(constants, horizon)).min(1.0)
}

/// `λ = c2 √(2 T ln(2/δ))`, which makes the Azuma term equal `δ/2`.
pub fn xtail_lambda(constants: &BoundConstants, horizon: usize, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    Ok(constants.c2 * (2.0 * horizon as f64 * (2.0 / delta).ln()).sqrt())
}

/// `C V √T max{ln T · ln^{1/2}(2/δ), ln^{3/2}(2/δ)}`, the closed-form ceiling on
/// [`xtail_lambda`] at the calibrated `c1`.
pub fn xtail_lambda_ceiling(constants: &BoundConstants, horizon: usize, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let t = horizon as f64;
    let l = (2.0 / delta).ln();
    Ok(constants.big_c * constants.v * t.sqrt() * (t.ln() * l.sqrt()).max(l.powf(1.5)))
}

/// `(1/ε²) max{ln²(1/ε) ln(2/δ), ln³(2/δ)}`, rounded up.
pub fn convergence_time_multi(epsilon: f64, delta: f64) -> Result<usize> {
    check_epsilon(epsilon)?;
    check_delta(delta)?;
    let le = (1.0 / epsilon).ln();
    let ld = (2.0 / delta).ln();
    let t = (le * le * ld).max(ld.powi(3)) / (epsilon * epsilon);
    Ok(t.ceil() as usize)
}

/// `(1/ε²) ln²(1/δ)`, rounded up. Requires `ε ≤ C0/B`.
pub fn convergence_time_single(constants: &BoundConstants, epsilon: f64, delta: f64) -> Result<usize> {
    check_epsilon(epsilon)?;
    check_delta(delta)?;
    let limit = constants.c0 / constants.b;
    if epsilon > limit {
        return Err(Error::OutOfRange(format!("ε = {epsilon} exceeds C0/B = {limit}")));
    }
    let ld = (1.0 / delta).ln();
    Ok((ld * ld / (epsilon * epsilon)).ceil() as usize)
}

/// `2 C2 V √T ln(1/δ)`.
pub fn g_tail_bound(constants: &BoundConstants, horizon: usize, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    Ok(2.0 * constants.c2_single * constants.v * (horizon as f64).sqrt() * (1.0 / delta).ln())
}

/// Bound on one step of the truncated single-constraint process.
pub fn g_step_bound(constants: &BoundConstants) -> f64 {
    2.0 * constants.v * constants.z_max + constants.c0 * constants.v * constants.b
}

/// Lower bound on `(1/T) Σ (Q1 ∧ C0V) z1` over any path.
pub fn truncated_average_floor(b: f64) -> f64 {
    -2.5 * b * b
}

/// Both sides of the convergence-time substitution check at `(ε, δ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualCheck {
    pub epsilon: f64,
    pub delta: f64,
    pub horizon: usize,
    /// `C max{ln T ln^{1/2}(2/δ), ln^{3/2}(2/δ)} / √T`
    pub lhs: f64,
    /// `6 C ε`
    pub rhs: f64,
    pub pass: bool,
}

/// Substitutes `T = convergence_time_multi(ε, δ)` into the normalized
/// deviation and compares with `6Cε` at relative tolerance `1e-9`.
pub fn convergence_residual_check(big_c: f64, epsilon: f64, delta: f64) -> Result<ResidualCheck> {
    let horizon = convergence_time_multi(epsilon, delta)?;
    let t = horizon as f64;
    let l = (2.0 / delta).ln();
    let lhs = big_c * (t.ln() * l.sqrt()).max(l.powf(1.5)) / t.sqrt();
    let rhs = 6.0 * big_c * epsilon;
    Ok(ResidualCheck { epsilon, delta, horizon, lhs, rhs, pass: lhs <= rhs * (1.0 + 1e-9) })
}
