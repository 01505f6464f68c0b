//! Domain types and exact virtual-queue dynamics.
//!
//! A [`ProblemSpec`] is a finite-support i.i.d. event distribution where each
//! event carries a finite, nonempty list of [`ActionVector`]s. Validation at
//! construction guarantees that the stated `z_max` and `B` really bound every
//! action, since every downstream constant is computed from them.

use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};

/// Absolute tolerance for per-slot assertions.
pub const ASSERT_TOL: f64 = 1e-9;

/// Tolerance that tracks the magnitude of the quantities compared.
pub(crate) fn scaled_tol(scale: f64) -> f64 {
    ASSERT_TOL * scale.abs().max(1.0)
}

const PROBABILITY_SUM_TOL: f64 = 1e-12;
const BOUND_REL_TOL: f64 = 1e-12;

/// One decision `(z0, z_1..z_L)`: objective cost and constraint processes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionVector {
    pub z0: f64,
    pub z: Vec<f64>,
}

impl ActionVector {
    pub fn new(z0: f64, z: Vec<f64>) -> Self {
        Self { z0, z }
    }

    pub fn constraint_norm(&self) -> f64 {
        norm(&self.z)
    }
}

/// One atom of the event distribution with the actions available under it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventOutcome {
    pub id: usize,
    pub probability: f64,
    pub actions: Vec<ActionVector>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum TieBreak {
    /// Among exactly equal minimizers, the lowest action index wins.
    #[default]
    LowestIndex,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblemSpec {
    events: Vec<RawEvent>,
    #[serde(rename = "L")]
    num_constraints: usize,
    z_max: f64,
    #[serde(rename = "B")]
    b: f64,
    #[serde(rename = "V")]
    v: f64,
    #[serde(default)]
    tie_break: TieBreak,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvent {
    #[serde(default)]
    id: Option<usize>,
    probability: f64,
    actions: Vec<ActionVector>,
}

/// A validated stochastic optimization instance together with the trade-off
/// parameter `V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProblemSpec")]
pub struct ProblemSpec {
    events: Vec<EventOutcome>,
    #[serde(rename = "L")]
    num_constraints: usize,
    z_max: f64,
    #[serde(rename = "B")]
    b: f64,
    #[serde(rename = "V")]
    v: f64,
    tie_break: TieBreak,
}

impl TryFrom<RawProblemSpec> for ProblemSpec {
    type Error = Error;

    fn try_from(raw: RawProblemSpec) -> Result<Self> {
        let mut events = Vec::with_capacity(raw.events.len());
        for (i, e) in raw.events.into_iter().enumerate() {
            if let Some(id) = e.id {
                if id != i {
                    return Err(invalid(format!("event {i} declares id {id}; ids must be 0..n in order")));
                }
            }
            events.push((e.probability, e.actions));
        }
        let mut spec = ProblemSpec::new(events, raw.num_constraints, raw.z_max, raw.b, raw.v)?;
        spec.tie_break = raw.tie_break;
        Ok(spec)
    }
}

impl ProblemSpec {
    /// Builds a spec from `(probability, actions)` pairs. Event ids are the
    /// positions in `events`.
    pub fn new(
        events: Vec<(f64, Vec<ActionVector>)>,
        num_constraints: usize,
        z_max: f64,
        b: f64,
        v: f64,
    ) -> Result<Self> {
        if num_constraints == 0 {
            return Err(invalid("number of constraints L must be positive"));
        }
        if !(z_max.is_finite() && z_max > 0.0) {
            return Err(invalid(format!("z_max must be a positive finite real, got {z_max}")));
        }
        if !(b.is_finite() && b > 0.0) {
            return Err(invalid(format!("B must be a positive finite real, got {b}")));
        }
        if !(v.is_finite() && v > 0.0) {
            return Err(invalid(format!("V must be a positive finite real, got {v}")));
        }
        if events.is_empty() {
            return Err(invalid("event support is empty"));
        }

        let mut total = 0.0;
        let mut out = Vec::with_capacity(events.len());
        for (id, (probability, actions)) in events.into_iter().enumerate() {
            if !(probability.is_finite() && probability > 0.0 && probability <= 1.0) {
                return Err(invalid(format!("event {id}: probability {probability} not in (0,1]")));
            }
            if actions.is_empty() {
                return Err(invalid(format!("event {id}: action set is empty")));
            }
            for (a, action) in actions.iter().enumerate() {
                if action.z.len() != num_constraints {
                    return Err(invalid(format!(
                        "event {id} action {a}: constraint vector has length {}, expected {num_constraints}",
                        action.z.len()
                    )));
                }
                if !action.z0.is_finite() || action.z.iter().any(|x| !x.is_finite()) {
                    return Err(invalid(format!("event {id} action {a}: non-finite component")));
                }
                if action.z0.abs() > z_max * (1.0 + BOUND_REL_TOL) {
                    return Err(invalid(format!(
                        "event {id} action {a}: |z0| = {} exceeds z_max = {z_max}",
                        action.z0.abs()
                    )));
                }
                let n = action.constraint_norm();
                if n > b * (1.0 + BOUND_REL_TOL) {
                    return Err(invalid(format!(
                        "event {id} action {a}: constraint norm {n} exceeds B = {b}"
                    )));
                }
            }
            total += probability;
            out.push(EventOutcome { id, probability, actions });
        }
        if (total - 1.0).abs() > PROBABILITY_SUM_TOL {
            return Err(invalid(format!("event probabilities sum to {total}, expected 1")));
        }

        Ok(Self { events: out, num_constraints, z_max, b, v, tie_break: TieBreak::LowestIndex })
    }

    pub fn events(&self) -> &[EventOutcome] {
        &self.events
    }

    pub fn event(&self, id: usize) -> Option<&EventOutcome> {
        self.events.get(id)
    }

    /// `L`, the number of time-average constraints.
    pub fn num_constraints(&self) -> usize {
        self.num_constraints
    }

    pub fn z_max(&self) -> f64 {
        self.z_max
    }

    /// `B`, the bound on the euclidean norm of the constraint vector.
    pub fn b(&self) -> f64 {
        self.b
    }

    /// `V`, the objective weight in the per-slot minimization.
    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn tie_break(&self) -> TieBreak {
        self.tie_break
    }

    /// Same instance with a different `V`.
    pub fn with_v(&self, v: f64) -> Result<Self> {
        if !(v.is_finite() && v > 0.0) {
            return Err(invalid(format!("V must be a positive finite real, got {v}")));
        }
        Ok(Self { v, ..self.clone() })
    }

    /// SHA-256 of the canonical JSON encoding, hex encoded.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("ProblemSpec serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// `Q[t]`: the virtual queue vector at the start of slot `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualQueueState {
    q: Vec<f64>,
    t: usize,
}

impl VirtualQueueState {
    /// All-empty queues at slot 1.
    pub fn new(num_constraints: usize) -> Self {
        Self { q: vec![0.0; num_constraints], t: 1 }
    }

    pub fn queues(&self) -> &[f64] {
        &self.q
    }

    pub fn slot(&self) -> usize {
        self.t
    }

    pub fn norm(&self) -> f64 {
        norm(&self.q)
    }

    /// Applies the queue update for one slot and returns the drift.
    pub(crate) fn advance(&mut self, z: &[f64]) -> f64 {
        debug_assert_eq!(z.len(), self.q.len());
        let mut before = 0.0;
        let mut after = 0.0;
        for (q, &zl) in self.q.iter_mut().zip(z) {
            before += *q * *q;
            *q = (*q + zl).max(0.0);
            after += *q * *q;
        }
        self.t += 1;
        0.5 * (after - before)
    }
}

/// `max{q + z, 0}` componentwise.
pub fn queue_update(q: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    if q.len() != z.len() {
        return Err(invalid(format!("queue has {} components but z has {}", q.len(), z.len())));
    }
    Ok(q.iter().zip(z).map(|(&ql, &zl)| (ql + zl).max(0.0)).collect())
}

/// `½(‖q_after‖² − ‖q_before‖²)`.
pub fn drift(q_before: &[f64], q_after: &[f64]) -> Result<f64> {
    if q_before.len() != q_after.len() {
        return Err(invalid(format!(
            "queue vectors differ in length: {} vs {}",
            q_before.len(),
            q_after.len()
        )));
    }
    Ok(0.5 * (squared_norm(q_after) - squared_norm(q_before)))
}

pub fn squared_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

pub fn norm(v: &[f64]) -> f64 {
    squared_norm(v).sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One slot of a sample path, borrowed from a [`PathTrace`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotRecord<'a> {
    pub t: usize,
    pub event_id: usize,
    pub action_index: usize,
    pub z0: f64,
    pub z: &'a [f64],
    /// `Q[t]`
    pub q_before: &'a [f64],
    /// `Q[t+1]`
    pub q_after: &'a [f64],
    pub drift: f64,
}

impl SlotRecord<'_> {
    /// Exact queue-update law for this slot.
    pub fn queue_update_exact(&self) -> bool {
        self.q_before
            .iter()
            .zip(self.z)
            .zip(self.q_after)
            .all(|((&q, &z), &qa)| qa == (q + z).max(0.0))
    }

    /// Step bound `|‖Q[t+1]‖ − ‖Q[t]‖| ≤ B`.
    pub fn step_within(&self, b: f64) -> bool {
        (norm(self.q_after) - norm(self.q_before)).abs() <= b + ASSERT_TOL
    }
}

/// Checks `Δ[t] ≤ B²/2 + Σ Q_l[t] z_l[t]` on one slot.
pub fn drift_upper_bound_check(record: &SlotRecord<'_>, b: f64) -> bool {
    let rhs = 0.5 * b * b + dot(record.q_before, record.z);
    // The drift is a difference of squared norms; its rounding error scales with them.
    let scale = squared_norm(record.q_after).max(squared_norm(record.q_before));
    record.drift <= rhs + scaled_tol(scale)
}

/// Per-slot quantity averaged by [`PathTrace::time_average`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    Objective,
    /// Zero-based constraint index.
    Constraint(usize),
    /// `Σ_l Q_l[t]` with the queue observed at the start of the slot.
    QueueSum,
}

/// Full record of one simulated sample path, stored column-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct PathTrace {
    pub spec_digest: String,
    pub seed: u64,
    num_constraints: usize,
    event_ids: Vec<u32>,
    action_indices: Vec<u32>,
    z0: Vec<f64>,
    z: Vec<f64>,
    /// `Q[1..=T+1]`, row-major with `L` columns.
    q: Vec<f64>,
    drift: Vec<f64>,
}

impl PathTrace {
    pub(crate) fn with_capacity(spec_digest: String, seed: u64, num_constraints: usize, slots: usize) -> Self {
        let mut q = Vec::with_capacity((slots + 1) * num_constraints);
        q.extend(std::iter::repeat_n(0.0, num_constraints));
        Self {
            spec_digest,
            seed,
            num_constraints,
            event_ids: Vec::with_capacity(slots),
            action_indices: Vec::with_capacity(slots),
            z0: Vec::with_capacity(slots),
            z: Vec::with_capacity(slots * num_constraints),
            q,
            drift: Vec::with_capacity(slots),
        }
    }

    pub(crate) fn push(&mut self, event_id: usize, action_index: usize, action: &ActionVector, q_after: &[f64], drift: f64) {
        self.event_ids.push(event_id as u32);
        self.action_indices.push(action_index as u32);
        self.z0.push(action.z0);
        self.z.extend_from_slice(&action.z);
        self.q.extend_from_slice(q_after);
        self.drift.push(drift);
    }

    /// Number of slots `T`.
    pub fn len(&self) -> usize {
        self.z0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z0.is_empty()
    }

    pub fn num_constraints(&self) -> usize {
        self.num_constraints
    }

    /// Record of slot `t` (one-based).
    pub fn record(&self, t: usize) -> SlotRecord<'_> {
        assert!(t >= 1 && t <= self.len(), "slot {t} outside 1..={}", self.len());
        let i = t - 1;
        let l = self.num_constraints;
        SlotRecord {
            t,
            event_id: self.event_ids[i] as usize,
            action_index: self.action_indices[i] as usize,
            z0: self.z0[i],
            z: &self.z[i * l..(i + 1) * l],
            q_before: &self.q[i * l..(i + 1) * l],
            q_after: &self.q[(i + 1) * l..(i + 2) * l],
            drift: self.drift[i],
        }
    }

    pub fn records(&self) -> impl ExactSizeIterator<Item = SlotRecord<'_>> + '_ {
        (0..self.len()).map(move |i| self.record(i + 1))
    }

    /// `Q[t]` for `t` in `1..=T+1`.
    pub fn queue_at(&self, t: usize) -> &[f64] {
        let l = self.num_constraints;
        &self.q[(t - 1) * l..t * l]
    }

    pub fn final_queue(&self) -> &[f64] {
        self.queue_at(self.len() + 1)
    }

    pub fn objective(&self) -> &[f64] {
        &self.z0
    }

    /// `(1/T) Σ_t` of the selected per-slot quantity.
    pub fn time_average(&self, which: Statistic) -> Result<f64> {
        if self.is_empty() {
            return Err(invalid("time average of an empty trace"));
        }
        let l = self.num_constraints;
        let total: f64 = match which {
            Statistic::Objective => self.z0.iter().sum(),
            Statistic::Constraint(k) => {
                if k >= l {
                    return Err(invalid(format!("constraint index {k} out of range for L = {l}")));
                }
                self.z.chunks_exact(l).map(|z| z[k]).sum()
            }
            Statistic::QueueSum => self.q.chunks_exact(l).take(self.len()).map(|q| q.iter().sum::<f64>()).sum(),
        };
        Ok(total / self.len() as f64)
    }

    pub fn csv_header(num_constraints: usize) -> Vec<String> {
        let mut h = vec!["t".to_string(), "event_id".into(), "action_index".into(), "z0".into()];
        h.extend((1..=num_constraints).map(|l| format!("z_{l}")));
        h.extend((1..=num_constraints).map(|l| format!("q_{l}")));
        h.push("drift".into());
        h
    }

    /// One row per slot; `q_l` columns hold `Q[t]`. Floats use the shortest
    /// decimal that round-trips.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::csv_header(self.num_constraints))?;
        let mut row = Vec::with_capacity(5 + 2 * self.num_constraints);
        for r in self.records() {
            row.clear();
            row.push(r.t.to_string());
            row.push(r.event_id.to_string());
            row.push(r.action_index.to_string());
            row.push(fmt_f64(r.z0));
            row.extend(r.z.iter().map(|&x| fmt_f64(x)));
            row.extend(r.q_before.iter().map(|&x| fmt_f64(x)));
            row.push(fmt_f64(r.drift));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest round-trip decimal (Rust's `Display` for `f64`), with `-0` kept.
pub(crate) fn fmt_f64(x: f64) -> String {
    if x == 0.0 && x.is_sign_negative() {
        "-0".to_string()
    } else {
        format!("{x}")
    }
}
