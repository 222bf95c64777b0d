mod common;

use common::round_trip_suite;
use proptest::prelude::*;
use queuetoll_core::continuum::*;
use queuetoll_core::rng::{self, Purpose, StreamKey};
use queuetoll_core::wardrop::PriceVector;
use queuetoll_core::CostModel;
use rand::Rng;

fn uniform(low: f64, high: f64) -> SensitivityDistribution {
    SensitivityDistribution::Uniform { low, high }
}

fn two_queue_cost(s: &ContinuumSpec, order: [usize; 2], t: f64) -> f64 {
    let (lo, hi) = s.sensitivity().support();
    if t <= lo || t >= hi {
        let j = if t <= lo { order[0] } else { order[1] };
        let a = ThresholdAllocation::new(s, vec![j], vec![lo]).unwrap();
        return continuum_cost(s, &a).unwrap();
    }
    let a = ThresholdAllocation::new(s, order.to_vec(), vec![t, lo]).unwrap();
    continuum_cost(s, &a).unwrap()
}

#[test]
fn optimum_matches_dense_threshold_grid() {
    let s = ContinuumSpec::new(1.0, uniform(0.0, 10.0), vec![CostModel::mm1(2.0), CostModel::mm1(1.2)]).unwrap();
    let opt = solve_continuum_optimum(&s, &ContinuumOptions::default()).unwrap();
    let mut best = f64::INFINITY;
    for order in [[0, 1], [1, 0]] {
        for k in 0..=100_000 {
            best = best.min(two_queue_cost(&s, order, k as f64 * 1e-4));
        }
    }
    assert!(opt.converged);
    assert!(opt.cost <= best + 1e-9, "{} vs grid {best}", opt.cost);
    assert!((opt.cost - best).abs() <= 1e-3);
}

#[test]
fn two_queue_equilibrium_matches_grid() {
    let s = ContinuumSpec::new(1.0, uniform(0.0, 10.0), vec![CostModel::mm1(2.0), CostModel::mm1(1.2)]).unwrap();
    let prices = PriceVector::new(vec![0.5, 0.0]).unwrap();
    let eq = solve_continuum_equilibrium(&s, &prices, &Default::default()).unwrap();
    assert!(eq.residual <= 1e-8);
    // Indifference gap at the cutoff over a dense grid.
    let gap = |t: f64| {
        let d1 = s.queues()[0].value(1.0 - t / 10.0);
        let d2 = s.queues()[1].value(t / 10.0);
        (0.5 + t * d1 - t * d2).abs()
    };
    let grid_t = (1..100_000)
        .map(|k| k as f64 * 1e-4)
        .min_by(|a, b| gap(*a).total_cmp(&gap(*b)))
        .unwrap();
    assert_eq!(eq.allocation.used_queue_order, vec![0, 1]);
    assert!(
        (eq.allocation.thresholds[0] - grid_t).abs() <= 2e-4,
        "{:?} vs {grid_t}",
        eq.allocation
    );
}

#[test]
fn cost_agrees_with_monte_carlo() {
    let cases = [
        (
            ContinuumSpec::new(1.5, uniform(0.0, 4.0), vec![CostModel::mm1(1.0), CostModel::mm1(2.0)]).unwrap(),
            vec![1, 0],
            vec![1.7, 0.0],
        ),
        (
            ContinuumSpec::new(
                2.0,
                SensitivityDistribution::TruncatedExponential { rate: 1.0, upper: 5.0 },
                vec![CostModel::mm1(2.0), CostModel::mm1(1.5), CostModel::mm1_tail(1.0, 1.0)],
            )
            .unwrap(),
            vec![2, 0, 1],
            vec![2.0, 0.6, 0.0],
        ),
    ];
    for (k, (s, order, cuts)) in cases.into_iter().enumerate() {
        let a = ThresholdAllocation::new(&s, order, cuts).unwrap();
        let exact = continuum_cost(&s, &a).unwrap();
        let d: Vec<f64> = s.queues().iter().zip(a.flows.as_slice()).map(|(q, &g)| q.value(g)).collect();
        let mut r = rng::stream(7, StreamKey::new(k as u32, 0, Purpose::Instance));
        let n = 1_000_000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..n {
            let beta = s.sensitivity().quantile(r.random::<f64>());
            let pos = a.thresholds.iter().position(|&t| beta >= t).unwrap();
            let x = s.total_rate() * beta * d[a.used_queue_order[pos]];
            sum += x;
            sq += x * x;
        }
        let mean = sum / n as f64;
        let se = ((sq / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - exact).abs() <= 3.0 * se, "case {k}: {mean} ± {se} vs {exact}");
    }
}

#[test]
fn optimum_orders_intervals_by_delay() {
    for s in round_trip_suite() {
        let opt = solve_continuum_optimum(&s, &ContinuumOptions::default()).unwrap();
        let a = &opt.allocation;
        let d: Vec<f64> = a.used_queue_order.iter().map(|&j| s.queues()[j].value(a.flows[j])).collect();
        for w in d.windows(2) {
            assert!(w[0] < w[1] + 1e-8, "{d:?}");
        }
        // Unused queues would be no better than the worst used queue.
        for j in (0..s.num_queues()).filter(|j| !a.used_queue_order.contains(j)) {
            assert!(s.queues()[j].value(0.0) >= d.last().unwrap() - 1e-8);
        }
    }
}

#[test]
fn pigouvian_round_trip() {
    for (k, s) in round_trip_suite().into_iter().enumerate() {
        let opt = solve_continuum_optimum(&s, &ContinuumOptions::default()).unwrap();
        assert!(opt.converged, "instance {k}: kkt {}", opt.kkt_residual);
        let prices = continuum_pigouvian_prices(&s, &opt.allocation).unwrap();
        let eq = solve_continuum_equilibrium(&s, &prices.by_queue, &Default::default()).unwrap();
        assert!(eq.residual <= 1e-8, "instance {k}: residual {}", eq.residual);
        assert_eq!(eq.allocation.used_queue_order, opt.allocation.used_queue_order, "instance {k}");
        for (a, b) in eq.allocation.thresholds.iter().zip(&opt.allocation.thresholds) {
            assert!((a - b).abs() <= 1e-4, "instance {k}: {:?} vs {:?}", eq.allocation, opt.allocation);
        }
    }
}

proptest! {
    #[test]
    fn flows_conserve_mass(
        lam in 0.1f64..3.0,
        a in 0.0f64..2.0,
        width in 0.1f64..5.0,
        cuts in proptest::collection::vec(0.0f64..1.0, 0..4),
    ) {
        let s = ContinuumSpec::new(lam, uniform(a, a + width), vec![CostModel::mm1(10.0); 5]).unwrap();
        let mut u: Vec<f64> = cuts.into_iter().map(|c| a + c * width).filter(|&t| t > a).collect();
        u.sort_by(|x, y| y.total_cmp(x));
        u.dedup();
        u.push(a);
        let order: Vec<usize> = (0..u.len()).collect();
        let alloc = ThresholdAllocation::new(&s, order, u).unwrap();
        let total: f64 = alloc.flows.as_slice().iter().sum();
        prop_assert!((total - lam).abs() <= 1e-12 * lam.max(1.0));
    }
}
