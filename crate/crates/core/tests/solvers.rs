mod common;

use common::*;
use queuetoll_core::pricing::{certify_prices, pigouvian_prices, price_shift};
use queuetoll_core::social_opt::{check_optimal_structure, grid_oracle, solve_social_optimum, OptimizeOptions};
use queuetoll_core::wardrop::{check_equilibrium_structure, solve_equilibrium, wardrop_residual, EquilibriumOptions, PriceVector};
use queuetoll_core::{social_cost, CostModel, Execution, RoutingMatrix, SystemSpec};

fn sizes(k: u64) -> (usize, usize) {
    (2 + (k % 3) as usize, 2 + ((k / 3) % 3) as usize)
}

#[test]
fn optimum_beats_random_feasible_routings() {
    for k in 0..12 {
        let (m, n) = sizes(k);
        let spec = random_instance(100 + k, m, n);
        let opt = solve_social_optimum(&spec, &OptimizeOptions::default()).unwrap();
        for s in 0..50 {
            if let Some(p) = random_feasible_routing(&spec, 1000 * k + s) {
                let u = social_cost(&spec, &p).unwrap();
                assert!(opt.u_star <= u + 1e-9, "instance {k}: {} > {u}", opt.u_star);
            }
        }
    }
}

#[test]
fn optimum_has_sorted_structure_on_random_instances() {
    let mut converged = 0;
    for k in 0..30 {
        let (m, n) = sizes(k);
        let spec = random_instance(200 + k, m, n);
        let opt = solve_social_optimum(&spec, &OptimizeOptions::default()).unwrap();
        if !opt.converged {
            continue;
        }
        converged += 1;
        let report = check_optimal_structure(&spec, &opt.p_star, 1e-6).unwrap();
        assert!(report.is_consistent, "instance {k}: {:?}", report.violations);
    }
    assert!(converged >= 27, "only {converged} of 30 converged");
}

#[test]
fn prices_from_optimum_certify_it() {
    for k in 0..20 {
        let (m, n) = sizes(k);
        let spec = random_instance(300 + k, m, n);
        let opt = solve_social_optimum(&spec, &OptimizeOptions::default()).unwrap();
        if opt.kkt_residual.is_nan() || opt.kkt_residual > 1e-8 {
            continue;
        }
        let prices = pigouvian_prices(&spec, &opt.p_star).unwrap();
        let cert = certify_prices(&spec, &opt.p_star, &prices.by_queue, 1e-6).unwrap();
        assert!(cert.certified, "instance {k}: residual {}", cert.residual);
        // Any common shift certifies too.
        let shifted = price_shift(&prices.by_queue, 0.75).unwrap();
        assert!(certify_prices(&spec, &opt.p_star, &shifted, 1e-6).unwrap().certified);
    }
}

#[test]
fn small_instances_agree_with_grid() {
    for k in 0..6 {
        let spec = random_instance(400 + k, 2, 2);
        let opt = solve_social_optimum(&spec, &OptimizeOptions::default()).unwrap();
        let grid = grid_oracle(&spec, 5e-3, Execution::Parallel).unwrap();
        assert!(opt.u_star <= grid.u_star + 1e-9);
        assert!(grid.u_star - opt.u_star <= 2e-2, "instance {k}: {} vs {}", opt.u_star, grid.u_star);
    }
}

/// One class, two M/M/1 queues: the split solves `c_0 + beta D_0 = c_1 + beta D_1`.
#[test]
fn one_class_equilibrium_matches_indifference() {
    let (lambda, beta, mu) = (1.5, 2.0, [2.0, 1.0]);
    let spec = SystemSpec::from_parts(&[lambda], &[beta], mu.iter().map(|&m| CostModel::mm1(m)).collect()).unwrap();
    for c0 in [0.05, 0.3, 0.8] {
        let prices = PriceVector::new(vec![c0, 0.0]).unwrap();
        let gap = |x: f64| c0 + beta / (mu[0] - x) - beta / (mu[1] - (lambda - x));
        let (mut lo, mut hi) = (lambda - mu[1] + 1e-12, lambda);
        let x = if gap(hi) <= 0.0 {
            hi
        } else {
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if gap(mid) > 0.0 {
                    hi = mid
                } else {
                    lo = mid
                }
            }
            0.5 * (lo + hi)
        };
        let eq = solve_equilibrium(&spec, &prices, &EquilibriumOptions::default()).unwrap();
        assert!(eq.converged);
        assert!((eq.gamma_w[0] - x).abs() <= 1e-5, "c0 = {c0}: {} vs {x}", eq.gamma_w[0]);
    }
}

#[test]
fn equilibria_on_random_instances_are_sorted_by_price() {
    for k in 0..15 {
        let (m, n) = sizes(k);
        let spec = random_instance(500 + k, m, n);
        let prices: Vec<f64> = (0..n).map(|j| 0.4 * (n - 1 - j) as f64 + 0.05 * k as f64).collect();
        let prices = PriceVector::new(prices).unwrap();
        let eq = solve_equilibrium(&spec, &prices, &EquilibriumOptions::default()).unwrap();
        assert!(eq.converged, "instance {k}: residual {}", eq.residual);
        let r = wardrop_residual(&spec, &prices, &eq.p_w, 1e-7).unwrap();
        assert!((r - eq.residual).abs() <= 1e-12);
        let s = check_equilibrium_structure(&spec, &prices, &eq.p_w, 1e-4).unwrap();
        assert!(s.is_consistent, "instance {k}: {:?}", s.violations);
    }
}

#[test]
fn shuffled_optimum_fails_structure() {
    let spec = five_queue_mean_delay();
    let mut rows = published_optimum().to_rows();
    // The most sensitive class moves to the slowest queue.
    rows[0].swap(1, 3);
    let p = RoutingMatrix::new(rows).unwrap();
    let r = check_optimal_structure(&spec, &p, 1e-6).unwrap();
    assert!(!r.is_consistent);
    assert!(r.violations.iter().any(|v| v.classes.0 == 0));
}
