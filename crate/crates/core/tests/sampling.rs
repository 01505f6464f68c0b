use dpp_lab::analysis::{calibrated_constants, check_telescoping};
use dpp_lab::events::{arrival_outcomes, build_server_scheduling_spec, build_single_constraint_spec, EventStream, DEFAULT_ARRIVAL_MEANS};
use dpp_lab::montecarlo::{empirical_tail, TailStatistic};
use dpp_lab::oracle::solve_stationary_optimum;
use dpp_lab::{run_path, ActionVector, ProblemSpec, Statistic};
use statrs::distribution::{ChiSquared, ContinuousCDF};

const SAMPLES: u64 = 1_000_000;

fn event_counts(spec: &ProblemSpec, seed: u64) -> Vec<u64> {
    let mut stream = EventStream::new(spec, seed);
    let mut counts = vec![0u64; spec.events().len()];
    for t in 1..=SAMPLES {
        counts[stream.sample(t)] += 1;
    }
    counts
}

#[test]
fn arrival_means_match_at_a_million_samples() {
    let spec = build_server_scheduling_spec(DEFAULT_ARRIVAL_MEANS, 10.0).unwrap();
    let counts = event_counts(&spec, 17);
    let outcomes = arrival_outcomes(&DEFAULT_ARRIVAL_MEANS);
    for (i, &mean) in DEFAULT_ARRIVAL_MEANS.iter().enumerate() {
        let hits: u64 = counts.iter().zip(&outcomes).filter(|(_, (a, _))| a[i] == 1.0).map(|(c, _)| c).sum();
        let empirical = hits as f64 / SAMPLES as f64;
        assert!((empirical - mean).abs() < 0.005, "queue {i}: {empirical} vs {mean}");
    }
}

#[test]
fn event_frequencies_pass_chi_square() {
    let spec = build_server_scheduling_spec(DEFAULT_ARRIVAL_MEANS, 10.0).unwrap();
    for seed in [1, 2, 3] {
        let counts = event_counts(&spec, seed);
        let stat: f64 = counts
            .iter()
            .zip(spec.events())
            .map(|(&c, e)| {
                let expected = e.probability * SAMPLES as f64;
                (c as f64 - expected).powi(2) / expected
            })
            .sum();
        let dist = ChiSquared::new((spec.events().len() - 1) as f64).unwrap();
        let p = 1.0 - dist.cdf(stat);
        assert!(p > 0.001, "seed {seed}: chi-square {stat}, p = {p}");
    }
}

#[test]
fn single_event_support_always_returns_it() {
    let spec = ProblemSpec::new(vec![(1.0, vec![ActionVector::new(1.0, vec![-1.0])])], 1, 1.0, 1.0, 1.0).unwrap();
    let mut s = EventStream::new(&spec, 5);
    assert!((1..=1000).all(|t| s.sample(t) == 0));
}

#[test]
fn long_benchmark_path_reaches_the_optimum() {
    let spec = build_server_scheduling_spec(DEFAULT_ARRIVAL_MEANS, 100.0).unwrap();
    for seed in [3, 4] {
        let trace = run_path(&spec, seed, 1_000_000).unwrap();
        let avg = trace.time_average(Statistic::Objective).unwrap();
        assert!((1.08..=1.14).contains(&avg), "seed {seed}: {avg}");
        for l in 0..3 {
            // asymptotic feasibility: Q_l[T]/T ends near zero
            assert!(trace.final_queue()[l] / 1e6 < 1e-3);
        }
    }
}

#[test]
fn larger_v_means_larger_queues() {
    let small = build_server_scheduling_spec(DEFAULT_ARRIVAL_MEANS, 10.0).unwrap();
    let large = small.with_v(100.0).unwrap();
    let q = |spec: &ProblemSpec| run_path(spec, 8, 200_000).unwrap().time_average(Statistic::QueueSum).unwrap();
    assert!(q(&large) > q(&small));
}

#[test]
fn truncated_tail_and_telescoping_on_the_reduction() {
    let spec = build_single_constraint_spec(DEFAULT_ARRIVAL_MEANS, 10.0).unwrap();
    let sol = solve_stationary_optimum(&spec).unwrap();
    let horizon = 10_000;
    let k = calibrated_constants(&spec, sol.xi(), horizon, 0.05).unwrap();
    let traces: Vec<_> = (0..500).map(|s| run_path(&spec, 1000 + s, horizon).unwrap()).collect();
    for t in &traces {
        assert!(check_telescoping(t, &k).unwrap().pass);
    }
    let lambda = dpp_lab::analysis::g_tail_bound(&k, horizon, 0.05).unwrap();
    let est = empirical_tail(&traces, TailStatistic::GT, lambda, sol.z_opt, &k).unwrap();
    assert!(est.frequency <= 0.05 + 0.01, "{est:?}");
    assert!(empirical_tail(&traces[..10], TailStatistic::GT, lambda, sol.z_opt, &k).is_err());
}
