#![allow(dead_code)]

use queuetoll_core::continuum::{ContinuumSpec, SensitivityDistribution};
use queuetoll_core::rng::{self, Purpose, StreamKey};
use queuetoll_core::{CostModel, RoutingMatrix, SystemSpec};
use rand::Rng;

pub const FIVE_QUEUE_MU: [f64; 5] = [2.0, 3.0, 2.5, 1.1, 1.5];
pub const FIVE_QUEUE_BETA: [f64; 5] = [5.0, 4.0, 3.0, 2.0, 1.0];
/// Original queue index of each column of the published optimum tables,
/// which list queues in increasing order of delay.
pub const SORTED_TO_ORIG: [usize; 5] = [1, 2, 0, 4, 3];

pub fn five_queue_mean_delay() -> SystemSpec {
    SystemSpec::from_parts(
        &[1.0; 5],
        &FIVE_QUEUE_BETA,
        FIVE_QUEUE_MU.iter().map(|&m| CostModel::mm1(m)).collect(),
    )
    .unwrap()
}

pub fn five_queue_tail() -> SystemSpec {
    SystemSpec::from_parts(
        &[1.0; 5],
        &FIVE_QUEUE_BETA,
        FIVE_QUEUE_MU.iter().map(|&m| CostModel::mm1_tail(m, 1.0)).collect(),
    )
    .unwrap()
}

fn from_sorted(sorted: [[f64; 5]; 5]) -> RoutingMatrix {
    let rows = sorted
        .iter()
        .map(|r| {
            let mut row = vec![0.0; 5];
            for (k, &j) in SORTED_TO_ORIG.iter().enumerate() {
                row[j] = r[k];
            }
            row
        })
        .collect();
    RoutingMatrix::new(rows).unwrap()
}

/// Published optimum for mean delay, in original queue order.
pub fn published_optimum() -> RoutingMatrix {
    from_sorted([
        [1.0, 0.0, 0.0, 0.0, 0.0],
        [0.528, 0.472, 0.0, 0.0, 0.0],
        [0.0, 0.788, 0.212, 0.0, 0.0],
        [0.0, 0.0, 0.786, 0.214, 0.0],
        [0.0, 0.0, 0.0, 0.517, 0.483],
    ])
}

/// Published optimum for the waiting-time tail cost, in original queue order.
pub fn published_tail_optimum() -> RoutingMatrix {
    from_sorted([
        [1.0, 0.0, 0.0, 0.0, 0.0],
        [0.42, 0.58, 0.0, 0.0, 0.0],
        [0.0, 0.61, 0.39, 0.0, 0.0],
        [0.0, 0.0, 0.59, 0.41, 0.0],
        [0.0, 0.0, 0.0, 0.37, 0.63],
    ])
}

pub const PUBLISHED_PRICES: [f64; 5] = [2.57, 1.53, 0.7, 0.42, 0.0];

/// Published equilibrium at [`PUBLISHED_PRICES`]; columns are already in
/// original order.
pub fn published_equilibrium() -> RoutingMatrix {
    RoutingMatrix::new(vec![
        vec![0.4, 0.6, 0.0, 0.0, 0.0],
        vec![0.0, 1.0, 0.0, 0.0, 0.0],
        vec![0.0, 0.2, 0.8, 0.0, 0.0],
        vec![0.0, 0.0, 0.8, 0.2, 0.0],
        vec![0.0, 0.0, 0.0, 0.1, 0.9],
    ])
    .unwrap()
}

/// Reproducible random M/M/1 instance with `m` classes and `n` queues,
/// loaded to a fraction in `[0.3, 0.85]` of total capacity.
pub fn random_instance(seed: u64, m: usize, n: usize) -> SystemSpec {
    let mut r = rng::stream(seed, StreamKey::new(0, 0, Purpose::Instance));
    let mus: Vec<f64> = (0..n).map(|_| r.random_range(0.5..3.0)).collect();
    let cap: f64 = mus.iter().sum();
    let raw: Vec<f64> = (0..m).map(|_| r.random_range(0.2..1.0)).collect();
    let load = r.random_range(0.3..0.85) * cap;
    let total: f64 = raw.iter().sum();
    let rates: Vec<f64> = raw.iter().map(|x| x / total * load).collect();
    let mut betas: Vec<f64> = (0..m).map(|_| r.random_range(0.5..6.0)).collect();
    betas.sort_by(|a, b| b.total_cmp(a));
    for k in 1..m {
        if betas[k] >= betas[k - 1] - 0.05 {
            betas[k] = betas[k - 1] - 0.05;
        }
    }
    let shift = (0.2 - betas[m - 1]).max(0.0);
    let betas: Vec<f64> = betas.iter().map(|b| b + shift).collect();
    SystemSpec::from_parts(&rates, &betas, mus.into_iter().map(CostModel::mm1).collect()).unwrap()
}

/// A feasible random routing matrix for `spec`, or `None` after 100 tries.
pub fn random_feasible_routing(spec: &SystemSpec, seed: u64) -> Option<RoutingMatrix> {
    let mut r = rng::stream(seed, StreamKey::new(1, 0, Purpose::Instance));
    let (m, n) = (spec.num_classes(), spec.num_queues());
    for _ in 0..100 {
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|_| {
                let row: Vec<f64> = (0..n).map(|_| -r.random::<f64>().max(1e-300).ln()).collect();
                let s: f64 = row.iter().sum();
                row.into_iter().map(|v| v / s).collect()
            })
            .collect();
        let p = RoutingMatrix::new(rows).unwrap();
        if queuetoll_core::social_cost(spec, &p).unwrap().is_finite() {
            return Some(p);
        }
    }
    None
}

/// Round-trip instances: uniform sensitivities, every queue used.
pub fn round_trip_suite() -> Vec<ContinuumSpec> {
    let cases: [(f64, (f64, f64), &[f64]); 10] = [
        (1.0, (0.0, 10.0), &[2.0, 1.2]),
        (1.0, (0.0, 2.0), &[2.0, 2.0]),
        (1.5, (0.0, 5.0), &[1.0, 2.0, 0.8]),
        (2.0, (0.0, 1.0), &[3.0, 1.0]),
        (0.8, (0.5, 4.0), &[1.0, 1.1]),
        (2.5, (0.0, 3.0), &[1.5, 1.0, 1.2, 0.6]),
        (3.0, (1.0, 2.0), &[2.0, 2.5]),
        (1.2, (0.0, 8.0), &[0.9, 0.7, 0.5]),
        (0.6, (0.0, 1.0), &[1.0, 1.0, 1.0]),
        (4.0, (0.2, 6.0), &[2.0, 1.5, 1.0, 1.8, 0.9]),
    ];
    cases
        .iter()
        .map(|&(lam, (a, b), mus)| {
            ContinuumSpec::new(
                lam,
                SensitivityDistribution::Uniform { low: a, high: b },
                mus.iter().map(|&m| CostModel::mm1(m)).collect(),
            )
            .unwrap()
        })
        .collect()
}
