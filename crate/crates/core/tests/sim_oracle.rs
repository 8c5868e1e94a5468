mod common;

use common::{instance, random_policy, reference, rel_err, rng};
use linksched::{empirical_distribution, evaluate, simulate, solve, Policy, SimConfig, SteadyState};

#[test]
fn always_transmitting_keeps_the_queue_empty() {
    let inst = reference(0.5, 100, 1.0);
    let policy = Policy::always(100, 3);
    let report = simulate(&policy, &inst, &SimConfig::with_slots(1_000_000, 1).unwrap()).unwrap();
    assert!(
        rel_err(report.empirical_power, 1.0) <= 0.01,
        "power {}",
        report.empirical_power
    );
    assert!(report.mean_queue <= 0.01, "queue {}", report.mean_queue);
    let (pi, _) = evaluate(&policy, &inst).unwrap();
    let emp: SteadyState<f64> = empirical_distribution(&report).unwrap();
    assert!(emp.tv_distance(&pi) < 0.01);
}

#[test]
fn never_transmitting_drops_at_the_arrival_rate() {
    let inst = instance(&[0.25, 0.5, 0.25], &[1.0, 2.0, 3.0], 0.3, 5, 1.0);
    let policy = Policy::never(5, 3);
    let cfg = SimConfig::with_slots(1_000_000, 2).unwrap();
    let report = simulate(&policy, &inst, &cfg).unwrap();
    assert!(
        rel_err(report.drop_rate(), 0.3) <= 0.02,
        "drop rate {}",
        report.drop_rate()
    );
    let emp: SteadyState<f64> = empirical_distribution(&report).unwrap();
    assert_eq!(emp.probs()[5], 1.0);
}

#[test]
fn random_policy_matches_the_chain() {
    let mut r = rng(31);
    for trial in 0..5 {
        let inst = instance(&[0.3, 0.45, 0.25], &[0.5, 1.5, 4.0], 0.45, 10, 1.0);
        let policy = random_policy(&mut r, 10, 3, 0.2, 0.9);
        let (mut g, f) = policy.into_tables();
        // no decision is ever drawn at a full buffer's own row
        for m in 0..3 {
            g[(10, m)] = 0.0;
        }
        let policy = Policy::new(g, f).unwrap();
        let (pi, m) = evaluate(&policy, &inst).unwrap();
        let report = simulate(&policy, &inst, &SimConfig::with_slots(1_000_000, 100 + trial).unwrap()).unwrap();
        let emp: SteadyState<f64> = empirical_distribution(&report).unwrap();
        assert!(
            emp.tv_distance(&pi) < 0.01,
            "trial {trial}: tv {}",
            emp.tv_distance(&pi)
        );
        // these chains mix slowly near the full buffer, so the moments get a wider band
        assert!(
            rel_err(report.empirical_delay, m.avg_delay) <= 0.05,
            "trial {trial}: {} vs {}",
            report.empirical_delay,
            m.avg_delay
        );
        assert!(
            rel_err(report.empirical_power, m.avg_power) <= 0.05,
            "trial {trial}: {} vs {}",
            report.empirical_power,
            m.avg_power
        );
        assert!(
            (report.drop_rate() - m.loss_prob).abs() <= 2e-3,
            "trial {trial}: {} vs {}",
            report.drop_rate(),
            m.loss_prob
        );
    }
}

#[test]
fn optimal_policy_matches_its_analytics() {
    let inst = reference(0.5, 100, 0.8);
    let sol = solve(&inst).unwrap();
    let report = simulate(&sol.policy, &inst, &SimConfig::with_slots(1_000_000, 42).unwrap()).unwrap();
    assert!(
        rel_err(report.empirical_delay, sol.delay) <= 0.02,
        "delay {} vs {}",
        report.empirical_delay,
        sol.delay
    );
    assert!(
        rel_err(report.empirical_power, 0.8) <= 0.02,
        "power {}",
        report.empirical_power
    );
    assert_eq!(report.drop_count, 0);
}

#[test]
fn error_shrinks_with_the_horizon() {
    let inst = reference(0.5, 30, 0.85);
    let sol = solve(&inst).unwrap();
    let horizons = [10_000u64, 100_000, 1_000_000];
    let trials = 20;
    let mut rms = [0.0f64; 3];
    for seed in 0..trials {
        for (k, &n) in horizons.iter().enumerate() {
            let cfg = SimConfig::new(n, 500 + seed, 1_000).unwrap();
            let report = simulate(&sol.policy, &inst, &cfg).unwrap();
            rms[k] +=
                rel_err(report.empirical_delay, sol.delay).powi(2) + rel_err(report.empirical_power, sol.power).powi(2);
        }
    }
    let rms = rms.map(|s| (s / trials as f64).sqrt());
    assert!(rms[0] >= rms[1] && rms[1] >= rms[2], "{rms:?}");
    // ten times the slots should cut the error by roughly sqrt(10)
    assert!(rms[0] / rms[2] > 3.0, "{rms:?}");
}

#[test]
fn same_seed_same_report() {
    let inst = reference(0.5, 100, 0.8);
    let sol = solve(&inst).unwrap();
    let cfg = SimConfig::with_slots(200_000, 9).unwrap();
    let a = simulate(&sol.policy, &inst, &cfg).unwrap();
    let b = simulate(&sol.policy, &inst, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.empirical_power.to_bits(), b.empirical_power.to_bits());
    assert_eq!(a.empirical_delay, a.mean_queue / a.alpha);
    assert_eq!(a.arrivals_accepted, a.departures + a.final_queue);
    assert_eq!(a.occupancy.iter().sum::<u64>(), a.measured_slots);
}
