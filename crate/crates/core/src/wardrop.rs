//! Wardrop equilibria of the admission-price game with finitely many classes.
//!
//! A class-`i` unit of work joining queue `j` pays `c_j + beta_i D_j(gamma_j)`.
//! `P` is an equilibrium when every class only uses queues minimising that
//! cost. There is no potential function, so the solver treats the condition
//! as a variational inequality over the product of row simplices and runs a
//! projected extragradient method with a self-adaptive step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, FlowVector, RoutingMatrix, SystemSpec};
use crate::simplex;
use crate::social_opt::{self, StructureReport, Violation};

/// Admission price per unit of work at each queue, in original queue order.
///
/// Prices must be finite and nonnegative. Ties are allowed here (unused
/// queues are all priced at zero); [`solve_equilibrium`] additionally
/// requires distinct prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PriceVector(Vec<f64>);

impl PriceVector {
    pub fn new(prices: Vec<f64>) -> Result<Self> {
        if prices.is_empty() {
            return Err(Error::InvalidPrices("no prices given".into()));
        }
        if let Some((j, c)) = prices.iter().enumerate().find(|(_, c)| !(c.is_finite() && **c >= 0.0)) {
            return Err(Error::InvalidPrices(format!("price {c} at queue {j} is not a nonnegative number")));
        }
        Ok(Self(prices))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Queues from most to least expensive, ties by index.
    pub fn price_order(&self) -> Vec<usize> {
        social_opt::sort_with_ties(&self.0, 0.0, true)
    }

    /// Errors unless all prices are pairwise distinct.
    pub fn require_distinct(&self) -> Result<()> {
        let order = self.price_order();
        for w in order.windows(2) {
            if self.0[w[0]] == self.0[w[1]] {
                return Err(Error::InvalidPrices(format!(
                    "queues {} and {} share the price {}; merge them before solving",
                    w[0].min(w[1]),
                    w[0].max(w[1]),
                    self.0[w[0]]
                )));
            }
        }
        Ok(())
    }

    /// Same prices listed in `order`.
    pub fn permute(&self, order: &[usize]) -> Result<Self> {
        model::check_permutation(order, self.len())?;
        Ok(Self(order.iter().map(|&j| self.0[j]).collect()))
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if self.len() != n {
            return Err(Error::DimensionMismatch {
                expected: format!("{n} prices"),
                found: format!("{}", self.len()),
            });
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for PriceVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        PriceVector::new(v)
    }
}

impl From<PriceVector> for Vec<f64> {
    fn from(p: PriceVector) -> Self {
        p.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquilibriumOptions {
    pub max_iters: usize,
    pub tol: f64,
    /// Initial extragradient step length.
    pub damping: f64,
    /// `None` starts from the capacity-proportional split, `Some(s)` from a
    /// random feasible matrix drawn from stream `s`.
    pub seed: Option<u64>,
    pub support_tol: f64,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        Self {
            max_iters: 10_000,
            tol: 1e-6,
            damping: 0.5,
            seed: None,
            support_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub p_w: RoutingMatrix,
    pub gamma_w: FlowVector,
    pub residual: f64,
    /// Expected `c_j + beta_i D_j(gamma_j)` per class under `p_w`.
    pub per_class_cost: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Writes `c_j + beta_i D_j(gamma_j)` into `out`; false when a flow is infeasible.
fn class_costs(spec: &SystemSpec, prices: &[f64], p: &[f64], out: &mut [f64]) -> bool {
    let n = spec.num_queues();
    let g = model::flows_raw(spec.classes(), n, p);
    let mut d = vec![0.0; n];
    for (j, q) in spec.queues().iter().enumerate() {
        d[j] = q.value(g[j]);
        if !d[j].is_finite() {
            return false;
        }
    }
    for (c, row) in spec.classes().iter().zip(out.chunks_mut(n)) {
        for j in 0..n {
            row[j] = prices[j] + c.sensitivity * d[j];
        }
    }
    true
}

fn residual_raw(p: &[f64], costs: &[f64], n: usize, support_tol: f64) -> f64 {
    p.chunks(n)
        .zip(costs.chunks(n))
        .map(|(pr, cr)| {
            let lo = cr.iter().copied().fold(f64::INFINITY, f64::min);
            pr.iter()
                .zip(cr)
                .filter(|(&pv, _)| pv > support_tol)
                .map(|(_, &c)| c - lo)
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// Largest amount by which some class could lower its cost by moving from
/// a queue it uses (share above `support_tol`) to another queue.
pub fn wardrop_residual(spec: &SystemSpec, prices: &PriceVector, p: &RoutingMatrix, support_tol: f64) -> Result<f64> {
    spec.check_matrix(p)?;
    prices.check_len(spec.num_queues())?;
    let mut costs = vec![0.0; p.as_slice().len()];
    if !class_costs(spec, prices.as_slice(), p.as_slice(), &mut costs) {
        let g = model::aggregate_rates(spec, p)?;
        let j = (0..spec.num_queues()).find(|&j| g[j] >= spec.queues()[j].capacity()).unwrap_or(0);
        return Err(Error::InfeasibleFlow {
            queue: j,
            flow: g[j],
            capacity: spec.queues()[j].capacity(),
        });
    }
    Ok(residual_raw(p.as_slice(), &costs, spec.num_queues(), support_tol))
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn step(p: &[f64], dir: &[f64], tau: f64, n: usize, out: &mut [f64]) {
    for k in 0..p.len() {
        out[k] = p[k] - tau * dir[k];
    }
    simplex::project_blocks(out, n);
}

pub fn solve_equilibrium(spec: &SystemSpec, prices: &PriceVector, options: &EquilibriumOptions) -> Result<EquilibriumResult> {
    let (m, n) = (spec.num_classes(), spec.num_queues());
    prices.check_len(n)?;
    prices.require_distinct()?;
    let c = prices.as_slice();
    let start = match options.seed {
        None => social_opt::starting_point(spec, 0, 0),
        Some(seed) => social_opt::starting_point(spec, seed, 1),
    }
    .ok_or(Error::NoFeasibleStart)?;

    let len = m * n;
    let mut x = start;
    let mut cx = vec![0.0; len];
    if !class_costs(spec, c, &x, &mut cx) {
        return Err(Error::NoFeasibleStart);
    }
    let mut best = x.clone();
    let mut best_res = residual_raw(&x, &cx, n, options.support_tol);
    let mut tau = options.damping.max(1e-12);
    let mut y = vec![0.0; len];
    let mut cy = vec![0.0; len];
    let mut z = vec![0.0; len];
    let mut cz = vec![0.0; len];
    let mut iterations = 0;

    while iterations < options.max_iters && best_res > options.tol {
        iterations += 1;
        // Predictor: shrink the step until the cost map is locally
        // contractive enough between x and the projected trial point.
        let mut ok = false;
        while tau > 1e-14 {
            step(&x, &cx, tau, n, &mut y);
            if class_costs(spec, c, &y, &mut cy) {
                let moved = distance(&y, &x);
                if moved == 0.0 || tau * distance(&cy, &cx) <= 0.9 * moved {
                    ok = true;
                    break;
                }
            }
            tau *= 0.5;
        }
        if !ok {
            break;
        }
        // Corrector from x along the predicted costs.
        step(&x, &cy, tau, n, &mut z);
        if !class_costs(spec, c, &z, &mut cz) {
            tau *= 0.5;
            continue;
        }
        std::mem::swap(&mut x, &mut z);
        std::mem::swap(&mut cx, &mut cz);
        tau *= 1.2;
        let r = residual_raw(&x, &cx, n, options.support_tol);
        if r < best_res {
            best_res = r;
            best.copy_from_slice(&x);
        }
    }

    let p_w = RoutingMatrix::from_flat_normalized(m, n, best);
    let gamma_w = model::aggregate_rates(spec, &p_w)?;
    let residual = wardrop_residual(spec, prices, &p_w, options.support_tol)?;
    let mut costs = vec![0.0; len];
    class_costs(spec, c, p_w.as_slice(), &mut costs);
    let per_class_cost = p_w
        .as_slice()
        .chunks(n)
        .zip(costs.chunks(n))
        .map(|(pr, cr)| pr.iter().zip(cr).map(|(a, b)| a * b).sum())
        .collect();
    Ok(EquilibriumResult {
        converged: residual <= options.tol,
        p_w,
        gamma_w,
        residual,
        per_class_cost,
        iterations,
    })
}

/// Structural checks every equilibrium satisfies, with queues ranked by
/// price (most expensive first): no pair of classes crosses (the more
/// sensitive class never uses a cheaper queue than one used by the less
/// sensitive class) and each class occupies a contiguous block.
pub fn check_equilibrium_structure(spec: &SystemSpec, prices: &PriceVector, p: &RoutingMatrix, tol: f64) -> Result<StructureReport> {
    spec.check_matrix(p)?;
    prices.check_len(spec.num_queues())?;
    let (m, n) = (spec.num_classes(), spec.num_queues());
    let c = prices.as_slice();
    let delays = model::aggregate_rates(spec, p)?.costs(spec.queues());
    let mut violations = Vec::new();
    for i1 in 0..m {
        for i2 in i1 + 1..m {
            for j1 in 0..n {
                for j2 in 0..n {
                    if c[j1] > c[j2] && p.get(i1, j2) > tol && p.get(i2, j1) > tol {
                        violations.push(Violation {
                            classes: (i1, i2),
                            queues: (j1, j2),
                            description: format!(
                                "class {i1} uses cheaper queue {j2} while less sensitive class {i2} uses dearer queue {j1}"
                            ),
                        });
                    }
                }
            }
        }
    }
    let queue_order = prices.price_order();
    let block_bounds = social_opt::contiguous_blocks(p, tol, &queue_order, &mut violations);
    Ok(StructureReport {
        is_consistent: violations.is_empty(),
        queue_order,
        delays,
        block_bounds,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::CostModel;

    fn five_queue() -> SystemSpec {
        SystemSpec::from_parts(
            &[1.0; 5],
            &[5.0, 4.0, 3.0, 2.0, 1.0],
            [2.0, 3.0, 2.5, 1.1, 1.5].iter().map(|&m| CostModel::mm1(m)).collect(),
        )
        .unwrap()
    }

    fn published_equilibrium() -> RoutingMatrix {
        RoutingMatrix::new(vec![
            vec![0.4, 0.6, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.2, 0.8, 0.0, 0.0],
            vec![0.0, 0.0, 0.8, 0.2, 0.0],
            vec![0.0, 0.0, 0.0, 0.1, 0.9],
        ])
        .unwrap()
    }

    fn published_prices() -> PriceVector {
        PriceVector::new(vec![2.57, 1.53, 0.7, 0.42, 0.0]).unwrap()
    }

    #[test]
    fn published_equilibrium_residual() {
        let r = wardrop_residual(&five_queue(), &published_prices(), &published_equilibrium(), 1e-7).unwrap();
        assert!(r <= 0.02, "{r}");
        let s = check_equilibrium_structure(&five_queue(), &published_prices(), &published_equilibrium(), 1e-7).unwrap();
        assert!(s.is_consistent, "{:?}", s.violations);
    }

    #[test]
    fn single_queue_is_trivially_in_equilibrium() {
        let spec = SystemSpec::from_parts(&[0.3, 0.2], &[2.0, 1.0], vec![CostModel::mm1(1.0)]).unwrap();
        let prices = PriceVector::new(vec![4.0]).unwrap();
        let r = wardrop_residual(&spec, &prices, &RoutingMatrix::dedicated(2, 1, 0), 1e-7).unwrap();
        assert_eq!(r, 0.0);
        let eq = solve_equilibrium(&spec, &prices, &EquilibriumOptions::default()).unwrap();
        assert!(eq.converged && eq.residual == 0.0);
    }

    #[test]
    fn reproduces_published_flows() {
        let eq = solve_equilibrium(&five_queue(), &published_prices(), &EquilibriumOptions::default()).unwrap();
        assert!(eq.converged, "{eq:?}");
        for (a, b) in eq.gamma_w.as_slice().iter().zip([0.4, 1.8, 1.6, 0.3, 0.9]) {
            assert!((a - b).abs() <= 0.03, "{:?}", eq.gamma_w);
        }
        let s = check_equilibrium_structure(&five_queue(), &published_prices(), &eq.p_w, 1e-6).unwrap();
        assert!(s.is_consistent, "{:?}", s.violations);
    }

    #[test]
    fn price_gap_dominates() {
        // beta (D_2(0.5) - D_1(0)) = 2/1.5 - 1/2 < 1 = c_1 - c_2
        let spec = SystemSpec::from_parts(&[0.5], &[1.0], vec![CostModel::mm1(2.0); 2]).unwrap();
        let prices = PriceVector::new(vec![1.0, 0.0]).unwrap();
        let eq = solve_equilibrium(&spec, &prices, &EquilibriumOptions::default()).unwrap();
        assert!(eq.converged);
        assert!(eq.p_w.get(0, 1) > 1.0 - 1e-9, "{:?}", eq.p_w);
    }

    #[test]
    fn rejects_tied_prices() {
        let spec = SystemSpec::from_parts(&[0.5], &[1.0], vec![CostModel::mm1(2.0); 2]).unwrap();
        let prices = PriceVector::new(vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            solve_equilibrium(&spec, &prices, &EquilibriumOptions::default()),
            Err(Error::InvalidPrices(_))
        ));
        assert!(PriceVector::new(vec![-1.0]).is_err());
        assert!(PriceVector::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn crossing_classes_flagged() {
        let spec = SystemSpec::from_parts(&[0.2, 0.2], &[2.0, 1.0], vec![CostModel::mm1(1.0); 2]).unwrap();
        let prices = PriceVector::new(vec![1.0, 0.0]).unwrap();
        let p = RoutingMatrix::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let s = check_equilibrium_structure(&spec, &prices, &p, 1e-9).unwrap();
        assert!(!s.is_consistent);
    }

    #[test]
    fn start_never_beaten_by_returned_point() {
        let spec = five_queue();
        let prices = published_prices();
        let opts = EquilibriumOptions {
            max_iters: 3,
            ..Default::default()
        };
        let start = RoutingMatrix::proportional(5, &spec.capacities());
        let r0 = wardrop_residual(&spec, &prices, &start, opts.support_tol).unwrap();
        let eq = solve_equilibrium(&spec, &prices, &opts).unwrap();
        assert!(eq.residual <= r0);
        assert!(!eq.converged);
    }
}
