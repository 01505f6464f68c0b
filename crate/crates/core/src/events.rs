//! Seeded i.i.d. event sampling and the 3-queue/2-server benchmark builder.
//!
//! Randomness is counter based: the draw for slot `t` is word pair `t − 1` of
//! a ChaCha8 keystream keyed by the path seed, so any slot can be replayed
//! without generating its predecessors. Path seeds are themselves drawn from
//! a per-path ChaCha stream of the master seed.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::model::{ActionVector, ProblemSpec};

/// Name of the built-in 3-queue/2-server benchmark.
pub const SERVER_SCHEDULING: &str = "server-scheduling-3x2";
/// Name of its single-constraint reduction.
pub const SERVER_SCHEDULING_SINGLE: &str = "server-scheduling-single";

pub const DEFAULT_ARRIVAL_MEANS: [f64; 3] = [0.5, 0.7, 0.4];

/// Service vectors in the order the action lists use them.
pub const SERVICE_OPTIONS: [[f64; 3]; 3] = [[1.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 1.0]];
/// Energy of each service option.
pub const SERVICE_ENERGY: [f64; 3] = [1.0, 1.0, 2.0];

/// Seed of path `path_id` under `master_seed`. Independent of how many
/// workers run the batch.
pub fn derive_path_seed(master_seed: u64, path_id: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(path_id);
    rng.next_u64()
}

/// Top 53 bits as a uniform in `[0, 1)`.
fn unit_interval(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Replayable stream of event ids for one sample path.
#[derive(Debug, Clone)]
pub struct EventStream {
    spec_digest: String,
    seed: u64,
    cursor: u64,
    rng: ChaCha8Rng,
    cdf: Vec<f64>,
}

impl EventStream {
    pub fn new(spec: &ProblemSpec, seed: u64) -> Self {
        let mut acc = 0.0;
        let cdf = spec
            .events()
            .iter()
            .map(|e| {
                acc += e.probability;
                acc
            })
            .collect();
        Self { spec_digest: spec.digest(), seed, cursor: 1, rng: ChaCha8Rng::seed_from_u64(seed), cdf }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn spec_digest(&self) -> &str {
        &self.spec_digest
    }

    /// Event id for slot `t ≥ 1`; a pure function of `(seed, t)`.
    pub fn sample(&mut self, t: u64) -> usize {
        assert!(t >= 1, "slots start at 1");
        if self.cursor != t {
            self.rng.set_word_pos(2 * (t as u128 - 1));
        }
        let u = unit_interval(self.rng.next_u64());
        self.cursor = t + 1;
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }
}

fn check_means(arrival_means: &[f64; 3]) -> Result<()> {
    for (i, &m) in arrival_means.iter().enumerate() {
        if !(m > 0.0 && m < 1.0) {
            return Err(invalid(format!("arrival mean {i} is {m}, must lie in (0,1)")));
        }
    }
    Ok(())
}

/// All eight Bernoulli arrival triples with their product probabilities, in
/// binary order `(a1 a2 a3)` = 000, 001, …, 111.
pub fn arrival_outcomes(arrival_means: &[f64; 3]) -> Vec<([f64; 3], f64)> {
    (0..8u32)
        .map(|bits| {
            let a = [((bits >> 2) & 1) as f64, ((bits >> 1) & 1) as f64, (bits & 1) as f64];
            let p = a
                .iter()
                .zip(arrival_means)
                .map(|(&ai, &m)| if ai == 1.0 { m } else { 1.0 - m })
                .product();
            (a, p)
        })
        .collect()
}

/// The 3-queue/2-server benchmark: events are arrival triples `a`, actions
/// are `a − b` for the three service options with energies 1, 1, 2.
pub fn build_server_scheduling_spec(arrival_means: [f64; 3], v: f64) -> Result<ProblemSpec> {
    check_means(&arrival_means)?;
    let events = arrival_outcomes(&arrival_means)
        .into_iter()
        .map(|(a, p)| {
            let actions = SERVICE_OPTIONS
                .iter()
                .zip(SERVICE_ENERGY)
                .map(|(b, energy)| ActionVector::new(energy, (0..3).map(|i| a[i] - b[i]).collect()))
                .collect();
            (p, actions)
        })
        .collect();
    ProblemSpec::new(events, 3, 2.0, 3f64.sqrt(), v)
}

/// Single-constraint reduction of the benchmark: one virtual queue for the
/// pooled backlog of queues 2 and 3, `z_1 = (a_2 + a_3) − (b_2 + b_3)`.
///
/// Only the energy-2 option serves both pooled queues, so the reduction keeps
/// the optimum of 1.1 at the default means while giving the controller a real
/// trade-off between energy and backlog.
pub fn build_single_constraint_spec(arrival_means: [f64; 3], v: f64) -> Result<ProblemSpec> {
    check_means(&arrival_means)?;
    let events = arrival_outcomes(&arrival_means)
        .into_iter()
        .map(|(a, p)| {
            let actions = SERVICE_OPTIONS
                .iter()
                .zip(SERVICE_ENERGY)
                .map(|(b, energy)| ActionVector::new(energy, vec![(a[1] + a[2]) - (b[1] + b[2])]))
                .collect();
            (p, actions)
        })
        .collect();
    ProblemSpec::new(events, 1, 2.0, 2.0, v)
}

/// Looks up a built-in problem by name.
pub fn builtin(name: &str, arrival_means: [f64; 3], v: f64) -> Result<ProblemSpec> {
    match name {
        SERVER_SCHEDULING => build_server_scheduling_spec(arrival_means, v),
        SERVER_SCHEDULING_SINGLE => build_single_constraint_spec(arrival_means, v),
        other => Err(invalid(format!(
            "unknown builtin problem `{other}` (expected `{SERVER_SCHEDULING}` or `{SERVER_SCHEDULING_SINGLE}`)"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_event_always_sampled() {
        let spec = ProblemSpec::new(vec![(1.0, vec![ActionVector::new(0.0, vec![-1.0])])], 1, 1.0, 1.0, 1.0).unwrap();
        let mut s = EventStream::new(&spec, 99);
        assert!((1..1000).all(|t| s.sample(t) == 0));
    }

    #[test]
    fn sample_is_pure_in_seed_and_slot() {
        let a = vec![ActionVector::new(0.0, vec![0.0])];
        let spec = ProblemSpec::new(vec![(0.5, a.clone()), (0.5, a)], 1, 1.0, 1.0, 1.0).unwrap();
        let mut s = EventStream::new(&spec, 12345);
        let first = s.sample(7);
        for _ in 0..5 {
            assert_eq!(s.sample(7), first);
        }
        let sequential: Vec<usize> = {
            let mut s = EventStream::new(&spec, 12345);
            (1..=200).map(|t| s.sample(t)).collect()
        };
        let mut s = EventStream::new(&spec, 12345);
        for t in (1..=200u64).rev() {
            assert_eq!(s.sample(t), sequential[t as usize - 1]);
        }
        assert_eq!(sequential[6], first);
    }

    #[test]
    fn path_seeds_differ() {
        let a = derive_path_seed(1, 0);
        let b = derive_path_seed(1, 1);
        let c = derive_path_seed(2, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, derive_path_seed(1, 0));
    }

    #[test]
    fn benchmark_structure() {
        let spec = build_server_scheduling_spec(DEFAULT_ARRIVAL_MEANS, 10.0).unwrap();
        assert_eq!(spec.events().len(), 8);
        // a = (1,1,0): 0.5 * 0.7 * 0.6
        let e = &spec.events()[0b110];
        assert!((e.probability - 0.21).abs() < 1e-15);
        // a = (0,0,0), action (1,1,0)
        let a0 = &spec.events()[0].actions[0];
        assert_eq!(a0.z0, 1.0);
        assert_eq!(a0.z, vec![-1.0, -1.0, 0.0]);
        assert_eq!(spec.events()[0].actions[2].z0, 2.0);
        assert_eq!(spec.z_max(), 2.0);
        assert_eq!(spec.b(), 3f64.sqrt());
    }

    #[test]
    fn b_is_the_largest_action_norm() {
        // Enumerate all 24 (a, b) pairs independently of the builder.
        let mut best: f64 = 0.0;
        for bits in 0..8u32 {
            for b in SERVICE_OPTIONS {
                let a = [(bits >> 2) & 1, (bits >> 1) & 1, bits & 1].map(|x| x as f64);
                let n = (0..3).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>().sqrt();
                best = best.max(n);
            }
        }
        assert_eq!(best, 3f64.sqrt());
    }

    #[test]
    fn binary_fraction_means_sum_exactly() {
        let spec = build_server_scheduling_spec([0.5, 0.25, 0.75], 1.0).unwrap();
        let total: f64 = spec.events().iter().map(|e| e.probability).sum();
        assert_eq!(total, 1.0);
        let spec = build_server_scheduling_spec(DEFAULT_ARRIVAL_MEANS, 1.0).unwrap();
        let total: f64 = spec.events().iter().map(|e| e.probability).sum();
        assert!((total - 1.0).abs() <= 2.0 * f64::EPSILON);
    }

    #[test]
    fn rejects_bad_means() {
        assert!(build_server_scheduling_spec([0.0, 0.5, 0.5], 1.0).is_err());
        assert!(build_server_scheduling_spec([0.5, 1.0, 0.5], 1.0).is_err());
        assert!(build_single_constraint_spec([0.5, 0.5, -0.1], 1.0).is_err());
        assert!(builtin("nope", DEFAULT_ARRIVAL_MEANS, 1.0).is_err());
    }

    #[test]
    fn single_constraint_reduction_bounds() {
        let spec = build_single_constraint_spec(DEFAULT_ARRIVAL_MEANS, 10.0).unwrap();
        assert_eq!(spec.num_constraints(), 1);
        let max = spec
            .events()
            .iter()
            .flat_map(|e| e.actions.iter().map(|a| a.z[0].abs()))
            .fold(0.0, f64::max);
        assert_eq!(max, spec.b());
    }
}
