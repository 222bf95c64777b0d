mod common;

use common::*;
use queuetoll_core::sim::{compare_to_analytic, simulate, Discipline, SimConfig};
use queuetoll_core::{aggregate_rates, social_cost, Execution};

fn config(horizon: f64) -> SimConfig {
    let mut c = SimConfig::new(horizon);
    c.replications = 10;
    c.seed = 77;
    c
}

#[test]
fn published_optimum_matches_mean_delays() {
    let spec = five_queue_mean_delay();
    let p = published_optimum();
    let (report, cmp) = compare_to_analytic(&spec, &p, &config(1e6)).unwrap();
    for c in &cmp {
        let z = c.z_score.unwrap();
        assert!(z.abs() <= 3.0, "queue {}: {:?} vs {} (z = {z})", c.queue, c.empirical, c.analytic);
    }
    let u = social_cost(&spec, &p).unwrap();
    let e = report.social_cost.unwrap();
    assert!((e.mean - u).abs() <= 0.02 * u, "{e:?} vs {u}");
    // Published delays, two to three significant digits.
    for (c, d) in cmp.iter().zip([0.998, 0.679, 0.806, 1.62, 1.3]) {
        assert!(
            (c.empirical.unwrap().mean - d).abs() <= 0.02 * d + 0.005,
            "queue {}: {:?}",
            c.queue,
            c.empirical
        );
    }
}

#[test]
fn published_tail_optimum_matches_wait_tails() {
    let spec = five_queue_tail();
    let p = published_tail_optimum();
    let (report, cmp) = compare_to_analytic(&spec, &p, &config(2e5)).unwrap();
    for c in &cmp {
        assert_eq!(c.measure, "wait_tail");
        let z = c.z_score.unwrap();
        assert!(z.abs() <= 3.5, "queue {}: {:?} vs {} (z = {z})", c.queue, c.empirical, c.analytic);
    }
    let u = social_cost(&spec, &p).unwrap();
    assert!(report.social_cost.unwrap().z_score(u).abs() <= 3.5);
}

#[test]
fn arrival_rates_follow_thinning() {
    let spec = five_queue_mean_delay();
    let p = published_equilibrium();
    let gamma = aggregate_rates(&spec, &p).unwrap();
    let report = simulate(&spec, &p, &config(2e5)).unwrap();
    for (j, q) in report.queues.iter().enumerate() {
        let z = q.arrival_rate.unwrap().z_score(gamma[j]);
        assert!(z.abs() <= 3.5, "queue {j}: z = {z}");
        assert!(q.little_z.unwrap().abs() <= 3.5, "queue {j}: little z = {:?}", q.little_z);
    }
}

#[test]
fn disciplines_share_means_on_published_optimum() {
    let spec = five_queue_mean_delay();
    let p = published_optimum();
    for d in [Discipline::Ps, Discipline::LcfsPr] {
        let mut c = config(2e5);
        c.discipline = d;
        let (_, cmp) = compare_to_analytic(&spec, &p, &c).unwrap();
        for x in &cmp {
            assert!(
                x.z_score.unwrap().abs() <= 3.5,
                "{d:?} queue {}: {:?} vs {}",
                x.queue,
                x.empirical,
                x.analytic
            );
        }
    }
}

#[test]
fn parallel_and_sequential_replications_agree() {
    let spec = five_queue_mean_delay();
    let p = published_optimum();
    let mut c = config(2e4);
    let a = simulate(&spec, &p, &c).unwrap();
    c.execution = Execution::Sequential;
    let b = simulate(&spec, &p, &c).unwrap();
    assert_eq!(a, b);
}
