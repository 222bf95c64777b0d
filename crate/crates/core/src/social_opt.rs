//! Welfare minimisation over right-stochastic routing matrices and
//! structural certificates for candidate optima.
//!
//! The objective is not convex, so [`solve_social_optimum`] runs a
//! multi-start spectral projected gradient: one proportional-to-capacity
//! start plus Dirichlet draws, each restart independent and seeded from its
//! own stream. The best final value wins, lowest restart index on ties.

use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::model::{self, FlowVector, RoutingMatrix, SystemSpec};
use crate::rng::{self, Purpose, StreamKey};
use crate::simplex::{self, SpgOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeOptions {
    pub restarts: usize,
    pub max_iters: usize,
    pub kkt_tol: f64,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            restarts: 32,
            max_iters: 5000,
            kkt_tol: 1e-8,
            seed: 0x5eed,
            execution: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimumResult {
    pub p_star: RoutingMatrix,
    pub gamma_star: FlowVector,
    pub u_star: f64,
    /// NaN when not computed (grid oracle).
    pub kkt_residual: f64,
    pub restarts_used: usize,
    pub converged: bool,
}

/// Start for restart `k`: restart 0 splits every class proportionally to
/// queue capacity, later restarts draw rows from a flat Dirichlet and pull
/// them toward the proportional split until all flows are feasible.
pub(crate) fn starting_point(spec: &SystemSpec, seed: u64, k: usize) -> Option<Vec<f64>> {
    let (m, n) = (spec.num_classes(), spec.num_queues());
    let caps = spec.capacities();
    let base = RoutingMatrix::proportional(m, &caps);
    let base = base.as_slice();
    let feasible = |p: &[f64]| {
        let g = model::flows_raw(spec.classes(), n, p);
        g.iter().zip(&caps).all(|(gj, c)| gj < c)
    };
    if k == 0 || n == 1 {
        return feasible(base).then(|| base.to_vec());
    }
    let mut rng = rng::stream(seed, StreamKey::new(k as u32, 0, Purpose::Restart));
    // Normalised unit exponentials are flat-Dirichlet rows.
    let mut draw = Vec::with_capacity(m * n);
    for _ in 0..m {
        let row: Vec<f64> = (0..n).map(|_| Exp1.sample(&mut rng)).collect();
        let s: f64 = row.iter().sum();
        draw.extend(row.into_iter().map(|v: f64| v / s));
    }
    let mut t = 1.0;
    for _ in 0..60 {
        let mix: Vec<f64> = draw.iter().zip(base).map(|(r, b)| t * r + (1.0 - t) * b).collect();
        if feasible(&mix) {
            return Some(mix);
        }
        t *= 0.5;
    }
    feasible(base).then(|| base.to_vec())
}

pub fn solve_social_optimum(spec: &SystemSpec, options: &OptimizeOptions) -> Result<OptimumResult> {
    let (m, n) = (spec.num_classes(), spec.num_queues());
    let restarts = options.restarts.max(1);
    let spg = SpgOptions {
        max_iters: options.max_iters,
        kkt_tol: options.kkt_tol,
        ..SpgOptions::default()
    };
    let classes = spec.classes();
    let queues = spec.queues();
    let runs = exec::map_indexed(options.execution, restarts, |k| {
        let x0 = starting_point(spec, options.seed, k)?;
        Some(simplex::minimize(
            x0,
            n,
            |p| model::social_cost_raw(classes, queues, p),
            |p, out| model::gradient_raw(classes, queues, p, out),
            &spg,
        ))
    });
    let values: Vec<f64> = runs.iter().map(|r| r.as_ref().map_or(f64::NAN, |o| o.value)).collect();
    let lowest = exec::argmin_by_key(&values).ok_or(Error::NoFeasibleStart)?;
    // Restarts that reach the same optimum differ in value only by rounding;
    // among those, keep the most stationary one.
    let floor = values[lowest] + 64.0 * f64::EPSILON * values[lowest].abs().max(1.0);
    let kkts: Vec<f64> = runs
        .iter()
        .zip(&values)
        .map(|(r, &v)| match r {
            Some(o) if v <= floor => o.kkt,
            _ => f64::NAN,
        })
        .collect();
    let best = exec::argmin_by_key(&kkts).unwrap_or(lowest);
    let outcome = runs[best].as_ref().expect("argmin skips missing runs");
    if !outcome.value.is_finite() {
        return Err(Error::NoFeasibleStart);
    }
    let p_star = RoutingMatrix::from_flat_normalized(m, n, outcome.x.clone());
    let gamma_star = model::aggregate_rates(spec, &p_star)?;
    let u_star = model::social_cost(spec, &p_star)?;
    let kkt = kkt_residual(spec, &p_star)?;
    Ok(OptimumResult {
        converged: kkt <= options.kkt_tol,
        p_star,
        gamma_star,
        u_star,
        kkt_residual: kkt,
        restarts_used: restarts,
    })
}

/// `max_i (max_{j : p_ij > 1e-9} dU/dp_ij - min_j dU/dp_ij)`.
pub fn kkt_residual(spec: &SystemSpec, p: &RoutingMatrix) -> Result<f64> {
    let grad: Vec<f64> = model::social_cost_gradient(spec, p)?.concat();
    Ok(simplex::kkt_residual(p.as_slice(), &grad, spec.num_queues()))
}

/// Refuse exhaustive grids with more evaluations than this.
pub const MAX_GRID_EVALUATIONS: f64 = 1e8;

fn compositions(parts: usize, total: usize) -> Vec<Vec<usize>> {
    fn rec(parts: usize, total: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            prefix.push(total);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=total {
            prefix.push(k);
            rec(parts - 1, total - k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(parts, total, &mut Vec::with_capacity(parts), &mut out);
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Exhaustive minimum of the social cost over routing matrices whose entries
/// are multiples of `resolution`. Desk-scale reference for the solver.
pub fn grid_oracle(spec: &SystemSpec, resolution: f64, execution: Execution) -> Result<OptimumResult> {
    let (m, n) = (spec.num_classes(), spec.num_queues());
    if m > 3 || n > 3 {
        return Err(Error::TooLarge(format!("{m} classes x {n} queues (limit 3 x 3)")));
    }
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(Error::TooLarge(format!("resolution {resolution} outside (0, 1]")));
    }
    let steps = (1.0 / resolution).round() as usize;
    let per_row = binomial(steps + n - 1, n - 1);
    let total = per_row.powi(m as i32);
    if total > MAX_GRID_EVALUATIONS {
        return Err(Error::TooLarge(format!("{total:.3e} grid evaluations")));
    }
    let rows: Vec<Vec<f64>> = compositions(n, steps)
        .into_iter()
        .map(|c| c.into_iter().map(|k| k as f64 / steps as f64).collect())
        .collect();
    let r = rows.len();
    let classes = spec.classes();
    let queues = spec.queues();
    // Split on the first row; each task walks the remaining rows as an odometer.
    let best_per_first = exec::map_indexed(execution, r, |first| {
        let mut idx = vec![0usize; m];
        idx[0] = first;
        let mut p = vec![0.0; m * n];
        let mut best = (f64::INFINITY, idx.clone());
        loop {
            for (i, &k) in idx.iter().enumerate() {
                p[i * n..(i + 1) * n].copy_from_slice(&rows[k]);
            }
            let u = model::social_cost_raw(classes, queues, &p);
            if u < best.0 {
                best = (u, idx.clone());
            }
            let mut pos = m;
            loop {
                pos -= 1;
                if pos == 0 {
                    return best;
                }
                idx[pos] += 1;
                if idx[pos] < r {
                    break;
                }
                idx[pos] = 0;
            }
        }
    });
    let values: Vec<f64> = best_per_first.iter().map(|b| b.0).collect();
    let winner = exec::argmin_by_key(&values).ok_or(Error::NoFeasibleStart)?;
    let (u, idx) = &best_per_first[winner];
    if !u.is_finite() {
        return Err(Error::NoFeasibleStart);
    }
    let p_star = RoutingMatrix::new(idx.iter().map(|&k| rows[k].clone()).collect())?;
    Ok(OptimumResult {
        gamma_star: model::aggregate_rates(spec, &p_star)?,
        u_star: *u,
        p_star,
        kkt_residual: f64::NAN,
        restarts_used: 0,
        converged: true,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub classes: (usize, usize),
    pub queues: (usize, usize),
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    /// Queues sorted by congestion cost ascending; ties within tolerance by index.
    pub queue_order: Vec<usize>,
    /// Congestion cost `D_j(gamma_j)` per original queue.
    pub delays: Vec<f64>,
    /// 1-based rank (in `queue_order`) of the last queue each class uses.
    pub block_bounds: Vec<usize>,
    pub violations: Vec<Violation>,
    pub is_consistent: bool,
}

/// Sorts indices by `key` ascending, treating keys within `tol` of their
/// neighbour as tied and ordering tied runs by index.
pub(crate) fn sort_with_ties(key: &[f64], tol: f64, descending: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..key.len()).collect();
    let k = |j: usize| if descending { -key[j] } else { key[j] };
    order.sort_by(|&a, &b| k(a).total_cmp(&k(b)).then(a.cmp(&b)));
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && (k(order[end]) - k(order[end - 1])).abs() <= tol {
            end += 1;
        }
        order[start..end].sort_unstable();
        start = end;
    }
    order
}

/// Checks the ordering and near-dedication properties every optimum has:
/// (a) a higher-sensitivity class never uses a queue strictly costlier than
/// one used by a lower-sensitivity class, (b) no two classes share two
/// distinct queues, (c) each class occupies a contiguous block in cost order.
pub fn check_optimal_structure(spec: &SystemSpec, p: &RoutingMatrix, tol: f64) -> Result<StructureReport> {
    spec.check_matrix(p)?;
    let (m, n) = (spec.num_classes(), spec.num_queues());
    let gamma = model::aggregate_rates(spec, p)?;
    let delays = gamma.costs(spec.queues());
    let mut violations = Vec::new();
    let used = |i: usize, j: usize| p.get(i, j) > tol;

    for i1 in 0..m {
        for i2 in i1 + 1..m {
            for j1 in 0..n {
                for j2 in 0..n {
                    if j1 == j2 || !used(i1, j1) || !used(i2, j2) {
                        continue;
                    }
                    if !(delays[j1] < delays[j2] + tol) {
                        violations.push(Violation {
                            classes: (i1, i2),
                            queues: (j1, j2),
                            description: format!(
                                "class {i1} uses queue {j1} (cost {:.6}) while less sensitive class {i2} uses cheaper queue {j2} (cost {:.6})",
                                delays[j1], delays[j2]
                            ),
                        });
                    }
                    if j1 < j2 && used(i1, j2) && used(i2, j1) {
                        violations.push(Violation {
                            classes: (i1, i2),
                            queues: (j1, j2),
                            description: format!("classes {i1} and {i2} both use queues {j1} and {j2}"),
                        });
                    }
                }
            }
        }
    }

    let queue_order = sort_with_ties(&delays, tol, false);
    let block_bounds = contiguous_blocks(p, tol, &queue_order, &mut violations);
    Ok(StructureReport {
        is_consistent: violations.is_empty(),
        queue_order,
        delays,
        block_bounds,
        violations,
    })
}

/// 1-based rank in `queue_order` of the last queue each class uses, pushing
/// a violation for every class that starts before its predecessor's bound or
/// skips a rank inside its own block.
pub(crate) fn contiguous_blocks(p: &RoutingMatrix, tol: f64, queue_order: &[usize], violations: &mut Vec<Violation>) -> Vec<usize> {
    let (m, n) = (p.rows(), p.cols());
    let used = |i: usize, j: usize| p.get(i, j) > tol;
    let mut rank = vec![0usize; n];
    for (r, &j) in queue_order.iter().enumerate() {
        rank[j] = r + 1;
    }
    let mut block_bounds = Vec::with_capacity(m);
    let mut prev = 1usize;
    for i in 0..m {
        let ranks: Vec<usize> = (0..n).filter(|&j| used(i, j)).map(|j| rank[j]).collect();
        let (lo, hi) = match (ranks.iter().min(), ranks.iter().max()) {
            (Some(&lo), Some(&hi)) => (lo, hi),
            _ => {
                violations.push(Violation {
                    classes: (i, i),
                    queues: (0, 0),
                    description: format!("class {i} uses no queue above tolerance"),
                });
                block_bounds.push(prev);
                continue;
            }
        };
        if lo < prev {
            violations.push(Violation {
                classes: (i.saturating_sub(1), i),
                queues: (queue_order[lo - 1], queue_order[prev - 1]),
                description: format!("class {i} starts at rank {lo}, before the previous block bound {prev}"),
            });
        }
        let gaps: Vec<usize> = (lo..=hi).filter(|r| !ranks.contains(r)).collect();
        if !gaps.is_empty() {
            violations.push(Violation {
                classes: (i, i),
                queues: (queue_order[lo - 1], queue_order[hi - 1]),
                description: format!("class {i} skips ranks {gaps:?} inside its block"),
            });
        }
        prev = hi.max(prev);
        block_bounds.push(prev);
    }
    block_bounds
}
