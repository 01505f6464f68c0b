//! The drift-plus-penalty decision rule and the per-slot simulation loop.
//!
//! The controller sees only the realized event's action list and the current
//! queues. Event probabilities stay with the sampler and the oracle.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::events::EventStream;
use crate::model::{dot, ActionVector, PathTrace, ProblemSpec, SlotRecord, TieBreak, VirtualQueueState};

/// Which decision rule drives the queues.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlPolicy {
    #[default]
    DriftPlusPenalty,
    /// Fault injection for negative controls: always takes action 0.
    SkipMinimization,
}

impl ControlPolicy {
    /// Action index this policy takes for `actions` at queues `q`.
    pub fn choose(self, q: &[f64], actions: &[ActionVector], v: f64, tie_break: TieBreak) -> usize {
        match self {
            ControlPolicy::DriftPlusPenalty => select_action(q, actions, v, tie_break).0,
            ControlPolicy::SkipMinimization => 0,
        }
    }
}

/// `V·z0 + Σ q_l z_l`, the per-slot quantity the controller minimizes.
#[inline]
pub fn dpp_value(q: &[f64], action: &ActionVector, v: f64) -> f64 {
    v * action.z0 + dot(q, &action.z)
}

/// Index and value of the minimizer of `V·z0 + Σ q_l z_l` over `actions`.
pub fn select_action(q: &[f64], actions: &[ActionVector], v: f64, tie_break: TieBreak) -> (usize, f64) {
    let TieBreak::LowestIndex = tie_break;
    let mut best = (0, dpp_value(q, &actions[0], v));
    for (i, a) in actions.iter().enumerate().skip(1) {
        let val = dpp_value(q, a, v);
        if val < best.1 {
            best = (i, val);
        }
    }
    best
}

/// Owned copy of one slot, as returned by [`DppState::step`].
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecordBuf {
    pub t: usize,
    pub event_id: usize,
    pub action_index: usize,
    pub action: ActionVector,
    pub q_before: Vec<f64>,
    pub q_after: Vec<f64>,
    pub drift: f64,
}

impl SlotRecordBuf {
    pub fn as_record(&self) -> SlotRecord<'_> {
        SlotRecord {
            t: self.t,
            event_id: self.event_id,
            action_index: self.action_index,
            z0: self.action.z0,
            z: &self.action.z,
            q_before: &self.q_before,
            q_after: &self.q_after,
            drift: self.drift,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DppState<'a> {
    spec: &'a ProblemSpec,
    queues: VirtualQueueState,
    policy: ControlPolicy,
}

impl<'a> DppState<'a> {
    pub fn new(spec: &'a ProblemSpec) -> Self {
        Self::with_policy(spec, ControlPolicy::DriftPlusPenalty)
    }

    pub fn with_policy(spec: &'a ProblemSpec, policy: ControlPolicy) -> Self {
        Self { spec, queues: VirtualQueueState::new(spec.num_constraints()), policy }
    }

    pub fn queues(&self) -> &VirtualQueueState {
        &self.queues
    }

    /// Action index the active policy picks for `actions` at the current queues.
    fn choose(&self, actions: &[ActionVector]) -> usize {
        self.policy.choose(self.queues.queues(), actions, self.spec.v(), self.spec.tie_break())
    }

    /// Observes event `event_id` at slot `t`, acts, and updates the queues.
    pub fn step(&mut self, event_id: usize, t: usize) -> Result<SlotRecordBuf> {
        let event = self
            .spec
            .event(event_id)
            .ok_or_else(|| invalid(format!("unknown event id {event_id}")))?;
        if t != self.queues.slot() {
            return Err(invalid(format!("state is at slot {} but step was asked for slot {t}", self.queues.slot())));
        }
        let idx = self.choose(&event.actions);
        let action = &event.actions[idx];
        let q_before = self.queues.queues().to_vec();
        let drift = self.queues.advance(&action.z);
        Ok(SlotRecordBuf {
            t,
            event_id,
            action_index: idx,
            action: action.clone(),
            q_before,
            q_after: self.queues.queues().to_vec(),
            drift,
        })
    }

    fn advance_into(&mut self, event_id: usize, trace: &mut PathTrace) {
        let event = &self.spec.events()[event_id];
        let idx = self.choose(&event.actions);
        let action = &event.actions[idx];
        let drift = self.queues.advance(&action.z);
        trace.push(event_id, idx, action, self.queues.queues(), drift);
    }
}

/// Simulates `slots` slots of the drift-plus-penalty algorithm from empty queues.
pub fn run_path(spec: &ProblemSpec, seed: u64, slots: usize) -> Result<PathTrace> {
    run_path_with(spec, seed, slots, ControlPolicy::DriftPlusPenalty)
}

pub fn run_path_with(spec: &ProblemSpec, seed: u64, slots: usize, policy: ControlPolicy) -> Result<PathTrace> {
    if slots == 0 {
        return Err(invalid("path length T must be at least 1"));
    }
    let mut stream = EventStream::new(spec, seed);
    let mut state = DppState::with_policy(spec, policy);
    let mut trace = PathTrace::with_capacity(stream.spec_digest().to_string(), seed, spec.num_constraints(), slots);
    for t in 1..=slots as u64 {
        let w = stream.sample(t);
        state.advance_into(w, &mut trace);
    }
    Ok(trace)
}
