//! Continuum of classes: one Poisson stream of rate `total_rate` whose
//! customers carry an i.i.d. sensitivity `beta ~ F`.
//!
//! Optima and equilibria both assign sensitivity intervals wholesale to
//! queues, so allocations are stored as a queue order plus decreasing
//! cutoffs. The queue listed first receives the most sensitive customers.
//!
//! The optimiser works in quantile space: for a fixed order of all queues the
//! shares `q_k` of the population sent to each queue live on one simplex,
//! whatever `F` is, and a zero share drops the queue. Every order is tried
//! for small `N`; larger instances start from zero-load cost order and apply
//! adjacent swaps while they help.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::cost::CostModel;
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::model::FlowVector;
use crate::pricing::PigouvianPrices;
use crate::simplex::{self, SpgOptions};
use crate::social_opt;
use crate::wardrop::PriceVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum SensitivityDistribution {
    Uniform {
        low: f64,
        high: f64,
    },
    /// Exponential with density proportional to `rate * exp(-rate * beta)`
    /// on `[0, upper]`.
    TruncatedExponential {
        rate: f64,
        upper: f64,
    },
}

impl SensitivityDistribution {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Uniform { low, high } => low.is_finite() && high.is_finite() && low >= 0.0 && high > low,
            Self::TruncatedExponential { rate, upper } => rate.is_finite() && upper.is_finite() && rate > 0.0 && upper > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidDistribution(format!("{self:?}")))
        }
    }

    /// `(inf, sup)` of the support.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Self::Uniform { low, high } => (low, high),
            Self::TruncatedExponential { upper, .. } => (0.0, upper),
        }
    }

    fn clamp(&self, beta: f64) -> f64 {
        let (lo, hi) = self.support();
        beta.clamp(lo, hi)
    }

    pub fn cdf(&self, beta: f64) -> f64 {
        let b = self.clamp(beta);
        match *self {
            Self::Uniform { low, high } => (b - low) / (high - low),
            Self::TruncatedExponential { rate, upper } => (-(-rate * b).exp_m1()) / (-(-rate * upper).exp_m1()),
        }
    }

    /// `F^{-1}(u)` for `u` in `[0, 1]`.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let b = match *self {
            Self::Uniform { low, high } => low + u * (high - low),
            Self::TruncatedExponential { rate, upper } => {
                let z = -(-rate * upper).exp_m1();
                -(-u * z).ln_1p() / rate
            }
        };
        self.clamp(b)
    }

    /// `int_lo^hi beta dF(beta)`.
    pub fn partial_moment(&self, lo: f64, hi: f64) -> f64 {
        let (lo, hi) = (self.clamp(lo), self.clamp(hi));
        if hi <= lo {
            return 0.0;
        }
        match *self {
            Self::Uniform { low, high } => (hi * hi - lo * lo) / (2.0 * (high - low)),
            Self::TruncatedExponential { rate, upper } => {
                let z = -(-rate * upper).exp_m1();
                let g = |b: f64| (b + 1.0 / rate) * (-rate * b).exp();
                (g(lo) - g(hi)) / z
            }
        }
    }

    pub fn mean(&self) -> f64 {
        let (lo, hi) = self.support();
        self.partial_moment(lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawContinuum", into = "RawContinuum")]
pub struct ContinuumSpec {
    total_rate: f64,
    sensitivity: SensitivityDistribution,
    queues: Vec<CostModel>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawContinuum {
    total_rate: f64,
    sensitivity: SensitivityDistribution,
    queues: Vec<CostModel>,
}

impl TryFrom<RawContinuum> for ContinuumSpec {
    type Error = Error;
    fn try_from(r: RawContinuum) -> Result<Self> {
        ContinuumSpec::new(r.total_rate, r.sensitivity, r.queues)
    }
}

impl From<ContinuumSpec> for RawContinuum {
    fn from(s: ContinuumSpec) -> Self {
        RawContinuum {
            total_rate: s.total_rate,
            sensitivity: s.sensitivity,
            queues: s.queues,
        }
    }
}

impl ContinuumSpec {
    pub fn new(total_rate: f64, sensitivity: SensitivityDistribution, queues: Vec<CostModel>) -> Result<Self> {
        if queues.is_empty() {
            return Err(Error::EmptySystem);
        }
        if !(total_rate.is_finite() && total_rate > 0.0) {
            return Err(Error::InvalidClass {
                index: 0,
                reason: "total arrival rate must be positive".into(),
            });
        }
        sensitivity.validate()?;
        for (j, q) in queues.iter().enumerate() {
            q.validate(j)?;
        }
        let capacity: f64 = queues.iter().map(CostModel::capacity).sum();
        if total_rate >= capacity {
            return Err(Error::Infeasible {
                load: total_rate,
                capacity,
            });
        }
        Ok(Self {
            total_rate,
            sensitivity,
            queues,
        })
    }

    pub fn total_rate(&self) -> f64 {
        self.total_rate
    }

    pub fn sensitivity(&self) -> &SensitivityDistribution {
        &self.sensitivity
    }

    pub fn queues(&self) -> &[CostModel] {
        &self.queues
    }

    pub fn num_queues(&self) -> usize {
        self.queues.len()
    }
}

/// Queue `used_queue_order[k]` serves sensitivities in
/// `[thresholds[k], thresholds[k-1])`, with `thresholds[-1]` the top of the
/// support. The last threshold is the bottom of the support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdAllocation {
    pub used_queue_order: Vec<usize>,
    pub thresholds: Vec<f64>,
    pub flows: FlowVector,
}

impl ThresholdAllocation {
    pub fn new(cspec: &ContinuumSpec, used_queue_order: Vec<usize>, thresholds: Vec<f64>) -> Result<Self> {
        let mut alloc = Self {
            used_queue_order,
            thresholds,
            flows: FlowVector(Vec::new()),
        };
        alloc.flows = threshold_flows(cspec, &alloc)?;
        Ok(alloc)
    }

    /// `(lower, upper)` sensitivity bounds of the `k`-th used queue.
    pub fn interval(&self, cspec: &ContinuumSpec, k: usize) -> (f64, f64) {
        let upper = if k == 0 {
            cspec.sensitivity.support().1
        } else {
            self.thresholds[k - 1]
        };
        (self.thresholds[k], upper)
    }
}

fn validate_alloc(cspec: &ContinuumSpec, alloc: &ThresholdAllocation) -> Result<()> {
    let (m, n) = (alloc.used_queue_order.len(), cspec.num_queues());
    if m == 0 || m > n || alloc.thresholds.len() != m {
        return Err(Error::InvalidThresholds(format!(
            "{} queues and {} thresholds for a system of {n} queues",
            m,
            alloc.thresholds.len()
        )));
    }
    let mut seen = vec![false; n];
    for &j in &alloc.used_queue_order {
        if j >= n || std::mem::replace(&mut seen[j], true) {
            return Err(Error::InvalidThresholds(format!(
                "queue order {:?} is not a list of distinct queues",
                alloc.used_queue_order
            )));
        }
    }
    let (lo, hi) = cspec.sensitivity.support();
    let mut upper = hi;
    for (k, &t) in alloc.thresholds.iter().enumerate() {
        if !(t >= lo && t < upper) {
            return Err(Error::InvalidThresholds(format!("threshold {k} ({t}) must lie in [{lo}, {upper})")));
        }
        upper = t;
    }
    let last = alloc.thresholds[m - 1];
    if (last - lo).abs() > 1e-12 * hi.max(1.0) {
        return Err(Error::InvalidThresholds(format!(
            "last threshold {last} must equal the bottom of the support {lo}"
        )));
    }
    Ok(())
}

/// Work arriving at each queue, `total_rate * (F(upper) - F(lower))`.
pub fn threshold_flows(cspec: &ContinuumSpec, alloc: &ThresholdAllocation) -> Result<FlowVector> {
    validate_alloc(cspec, alloc)?;
    let f = &cspec.sensitivity;
    let mut g = vec![0.0; cspec.num_queues()];
    for (k, &j) in alloc.used_queue_order.iter().enumerate() {
        let (lo, hi) = alloc.interval(cspec, k);
        // The last interval absorbs everything below its upper bound.
        let lower = if k + 1 == alloc.thresholds.len() { 0.0 } else { f.cdf(lo) };
        let upper = if k == 0 { 1.0 } else { f.cdf(hi) };
        g[j] = cspec.total_rate * (upper - lower);
    }
    Ok(FlowVector(g))
}

/// `sum_k D_k(gamma_k) * total_rate * int_{interval k} beta dF`, or `+inf`
/// when some queue is at capacity.
pub fn continuum_cost(cspec: &ContinuumSpec, alloc: &ThresholdAllocation) -> Result<f64> {
    let g = threshold_flows(cspec, alloc)?;
    let mut u = 0.0;
    for (k, &j) in alloc.used_queue_order.iter().enumerate() {
        let d = cspec.queues[j].value(g[j]);
        if d.is_infinite() {
            return Ok(f64::INFINITY);
        }
        let (lo, hi) = alloc.interval(cspec, k);
        u += d * cspec.total_rate * cspec.sensitivity.partial_moment(lo, hi);
    }
    Ok(u)
}

/// Share-space evaluation for a fixed order of all queues.
struct Ordered<'a> {
    cspec: &'a ContinuumSpec,
    order: &'a [usize],
}

impl Ordered<'_> {
    /// Cutoffs `b(s_k) = F^{-1}(1 - s_k)` for cumulative shares `s_k`,
    /// with `b(s_0)` the top of the support.
    fn cutoffs(&self, q: &[f64]) -> Vec<f64> {
        let f = &self.cspec.sensitivity;
        let mut b = Vec::with_capacity(q.len() + 1);
        b.push(f.support().1);
        let mut s = 0.0;
        for (k, &qk) in q.iter().enumerate() {
            s += qk;
            b.push(if k + 1 == q.len() { f.support().0 } else { f.quantile(1.0 - s) });
        }
        b
    }

    fn cost(&self, q: &[f64]) -> f64 {
        let lam = self.cspec.total_rate;
        let b = self.cutoffs(q);
        let mut u = 0.0;
        for (k, &j) in self.order.iter().enumerate() {
            if q[k] <= 0.0 {
                continue;
            }
            let d = self.cspec.queues[j].value(lam * q[k]);
            if d.is_infinite() {
                return f64::INFINITY;
            }
            u += d * lam * self.cspec.sensitivity.partial_moment(b[k + 1], b[k]);
        }
        u
    }

    /// `dU/dq_k = lam * (lam D'_k M_k + D_k b_k + sum_{i>k} D_i (b_i - b_{i-1}))`
    /// where `b_k` is the lower cutoff of queue `k` and `M_k` its partial moment.
    fn gradient(&self, q: &[f64], out: &mut [f64]) -> bool {
        let lam = self.cspec.total_rate;
        let f = &self.cspec.sensitivity;
        let b = self.cutoffs(q);
        let n = q.len();
        let mut d = vec![0.0; n];
        for (k, &j) in self.order.iter().enumerate() {
            d[k] = self.cspec.queues[j].value(lam * q[k]);
            if d[k].is_infinite() {
                return false;
            }
        }
        let mut tail = 0.0;
        for k in (0..n).rev() {
            let j = self.order[k];
            let own = lam * self.cspec.queues[j].derivative(lam * q[k]) * f.partial_moment(b[k + 1], b[k]);
            out[k] = lam * (own + d[k] * b[k + 1] + tail);
            tail += d[k] * (b[k + 1] - b[k]);
        }
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuumOptions {
    pub max_iters: usize,
    pub kkt_tol: f64,
    /// Enumerate every queue order up to this many queues.
    pub max_enumerated_queues: usize,
    pub execution: Execution,
}

impl Default for ContinuumOptions {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            kkt_tol: 1e-8,
            max_enumerated_queues: 6,
            execution: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuumOptimum {
    pub allocation: ThresholdAllocation,
    pub cost: f64,
    /// Stationarity residual in share space for the winning order.
    pub kkt_residual: f64,
    pub orderings_tried: usize,
    pub converged: bool,
}

/// Shares below this are treated as an unused queue.
const SHARE_EPS: f64 = 1e-12;

fn optimise_order(cspec: &ContinuumSpec, order: &[usize], opts: &ContinuumOptions) -> Option<simplex::SpgOutcome> {
    let caps: Vec<f64> = order.iter().map(|&j| cspec.queues[j].capacity()).collect();
    let total: f64 = caps.iter().sum();
    let x0: Vec<f64> = caps.iter().map(|c| c / total).collect();
    let problem = Ordered { cspec, order };
    let spg = SpgOptions {
        max_iters: opts.max_iters,
        kkt_tol: opts.kkt_tol,
        ..SpgOptions::default()
    };
    let out = simplex::minimize(x0, order.len(), |q| problem.cost(q), |q, g| problem.gradient(q, g), &spg);
    out.value.is_finite().then_some(out)
}

fn allocation_from_shares(cspec: &ContinuumSpec, order: &[usize], q: &[f64]) -> Result<ThresholdAllocation> {
    let f = &cspec.sensitivity;
    let kept: Vec<usize> = (0..q.len()).filter(|&k| q[k] > SHARE_EPS).collect();
    let mut used = Vec::with_capacity(kept.len());
    let mut thresholds = Vec::with_capacity(kept.len());
    let mut s = 0.0;
    for (idx, &k) in kept.iter().enumerate() {
        s += q[k];
        used.push(order[k]);
        thresholds.push(if idx + 1 == kept.len() {
            f.support().0
        } else {
            f.quantile(1.0 - s)
        });
    }
    ThresholdAllocation::new(cspec, used, thresholds)
}

pub fn solve_continuum_optimum(cspec: &ContinuumSpec, options: &ContinuumOptions) -> Result<ContinuumOptimum> {
    let n = cspec.num_queues();
    let (order, outcome, tried) = if n <= options.max_enumerated_queues {
        let orders: Vec<Vec<usize>> = (0..n).permutations(n).collect();
        let runs = exec::map_indexed(options.execution, orders.len(), |k| optimise_order(cspec, &orders[k], options));
        let values: Vec<f64> = runs.iter().map(|r| r.as_ref().map_or(f64::NAN, |o| o.value)).collect();
        let best = exec::argmin_by_key(&values).ok_or(Error::NoFeasibleStart)?;
        let out = runs[best].clone().expect("argmin skips failed runs");
        (orders[best].clone(), out, orders.len())
    } else {
        local_search(cspec, options)?
    };
    let allocation = allocation_from_shares(cspec, &order, &outcome.x)?;
    let cost = continuum_cost(cspec, &allocation)?;
    Ok(ContinuumOptimum {
        converged: outcome.kkt <= options.kkt_tol,
        allocation,
        cost,
        kkt_residual: outcome.kkt,
        orderings_tried: tried,
    })
}

/// Zero-load cost order improved by adjacent transpositions.
fn local_search(cspec: &ContinuumSpec, options: &ContinuumOptions) -> Result<(Vec<usize>, simplex::SpgOutcome, usize)> {
    let n = cspec.num_queues();
    let zero: Vec<f64> = cspec.queues.iter().map(|q| q.value(0.0)).collect();
    let mut order = social_opt::sort_with_ties(&zero, 0.0, false);
    let mut best = optimise_order(cspec, &order, options).ok_or(Error::NoFeasibleStart)?;
    let mut tried = 1;
    for _ in 0..n * n {
        let candidates = exec::map_indexed(options.execution, n - 1, |k| {
            let mut o = order.clone();
            o.swap(k, k + 1);
            let out = optimise_order(cspec, &o, options);
            (o, out)
        });
        tried += candidates.len();
        let values: Vec<f64> = candidates.iter().map(|(_, r)| r.as_ref().map_or(f64::NAN, |o| o.value)).collect();
        match exec::argmin_by_key(&values) {
            Some(k) if values[k] < best.value - 1e-12 * best.value.abs().max(1.0) => {
                let (o, out) = candidates.into_iter().nth(k).expect("index in range");
                order = o;
                best = out.expect("finite value implies a run");
            }
            _ => break,
        }
    }
    Ok((order, best, tried))
}

/// Largest advantage any customer could gain by moving, checked at every
/// cutoff and both ends of the support (costs are linear in `beta` between
/// cutoffs, so this covers the whole support).
pub fn equilibrium_residual(cspec: &ContinuumSpec, prices: &PriceVector, alloc: &ThresholdAllocation) -> Result<f64> {
    if prices.len() != cspec.num_queues() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} prices", cspec.num_queues()),
            found: format!("{}", prices.len()),
        });
    }
    let g = threshold_flows(cspec, alloc)?;
    let c = prices.as_slice();
    let d: Vec<f64> = cspec.queues.iter().zip(g.as_slice()).map(|(q, &x)| q.value(x)).collect();
    let mut worst = 0.0f64;
    for (k, &j) in alloc.used_queue_order.iter().enumerate() {
        let (lo, hi) = alloc.interval(cspec, k);
        for beta in [lo, hi] {
            let own = c[j] + beta * d[j];
            let best = (0..c.len()).map(|i| c[i] + beta * d[i]).fold(f64::INFINITY, f64::min);
            worst = worst.max(own - best);
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuumEquilibriumOptions {
    pub tol: f64,
    pub max_bisections: usize,
}

impl Default for ContinuumEquilibriumOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_bisections: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuumEquilibrium {
    pub allocation: ThresholdAllocation,
    pub residual: f64,
}

struct Shot {
    /// Mass left over after every queue below the first took its share.
    excess: f64,
    used: Vec<usize>,
    thresholds: Vec<f64>,
}

/// Fixes the first cutoff `t1`, then walks down the price order: each next
/// queue's congestion cost is pinned by indifference with the previous used
/// queue at the current cutoff, which fixes its flow and the next cutoff.
fn shoot(cspec: &ContinuumSpec, order: &[usize], c: &[f64], t1: f64) -> Shot {
    let lam = cspec.total_rate;
    let f = &cspec.sensitivity;
    let first = order[0];
    let mut remaining = lam * f.cdf(t1);
    let mut used = vec![first];
    let mut thresholds = vec![t1];
    let (mut c_prev, mut d_prev, mut t) = (c[first], cspec.queues[first].value(lam - remaining), t1);
    for &k in &order[1..] {
        let q = &cspec.queues[k];
        let target = d_prev + (c_prev - c[k]) / t;
        if !(target > q.value(0.0)) {
            continue;
        }
        let gk = if target.is_finite() {
            q.inverse(target).unwrap_or(0.0)
        } else {
            q.capacity()
        };
        if gk > remaining {
            return Shot {
                excess: remaining - gk,
                used,
                thresholds,
            };
        }
        remaining -= gk;
        t = f.quantile(remaining / lam);
        used.push(k);
        thresholds.push(t);
        c_prev = c[k];
        d_prev = target;
    }
    Shot {
        excess: remaining,
        used,
        thresholds,
    }
}

/// Equilibrium for distinct prices: queues are entered in decreasing price
/// order, and the first cutoff is found by bisection on the mass balance,
/// which is increasing in it. A top queue that stays empty even when it
/// takes no traffic is dropped and the search restarts below it.
pub fn solve_continuum_equilibrium(
    cspec: &ContinuumSpec,
    prices: &PriceVector,
    options: &ContinuumEquilibriumOptions,
) -> Result<ContinuumEquilibrium> {
    prices.check_len(cspec.num_queues())?;
    prices.require_distinct()?;
    let c = prices.as_slice();
    let order = prices.price_order();
    let (lo, hi) = cspec.sensitivity.support();
    let mut shot = None;
    for start in 0..order.len() {
        let sub = &order[start..];
        if sub.len() == 1 {
            shot = Some(Shot {
                excess: 0.0,
                used: vec![sub[0]],
                thresholds: vec![lo],
            });
            break;
        }
        if shoot(cspec, sub, c, hi).excess < 0.0 {
            continue;
        }
        let (mut a, mut b) = (lo, hi);
        for _ in 0..options.max_bisections {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if shoot(cspec, sub, c, mid).excess < 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        shot = Some(shoot(cspec, sub, c, b));
        break;
    }
    let mut shot = shot.ok_or_else(|| Error::NoSolution("no queue can absorb the traffic".into()))?;
    // Drop a top queue whose interval collapsed onto the top of the support.
    if shot.thresholds[0] >= hi && shot.used.len() > 1 {
        shot.used.remove(0);
        shot.thresholds.remove(0);
    }
    *shot.thresholds.last_mut().expect("at least one queue") = lo;
    // Bisection can leave cutoffs a hair apart or equal at the bottom.
    let mut used = Vec::new();
    let mut thresholds = Vec::new();
    let mut upper = hi;
    for (j, t) in shot.used.into_iter().zip(shot.thresholds) {
        if t < upper {
            used.push(j);
            thresholds.push(t);
            upper = t;
        }
    }
    let allocation = ThresholdAllocation::new(cspec, used, thresholds)?;
    let residual = equilibrium_residual(cspec, prices, &allocation)?;
    if !(residual <= options.tol) {
        return Err(Error::NoSolution(format!(
            "best allocation {:?} with cutoffs {:?} leaves residual {residual:.3e} (excess mass {:.3e})",
            allocation.used_queue_order, allocation.thresholds, shot.excess
        )));
    }
    Ok(ContinuumEquilibrium { allocation, residual })
}

/// Marginal external cost of each queue at the allocation,
/// `D'_n(gamma_n) * total_rate * int_{interval n} beta dF`; unused queues get 0.
pub fn continuum_pigouvian_prices(cspec: &ContinuumSpec, alloc: &ThresholdAllocation) -> Result<PigouvianPrices> {
    let g = threshold_flows(cspec, alloc)?;
    let n = cspec.num_queues();
    let mut prices = vec![0.0; n];
    for (k, &j) in alloc.used_queue_order.iter().enumerate() {
        let q = &cspec.queues[j];
        if g[j] >= q.capacity() {
            return Err(Error::InfeasibleFlow {
                queue: j,
                flow: g[j],
                capacity: q.capacity(),
            });
        }
        let (lo, hi) = alloc.interval(cspec, k);
        prices[j] = q.derivative(g[j]) * cspec.total_rate * cspec.sensitivity.partial_moment(lo, hi);
    }
    let delays: Vec<f64> = alloc.used_queue_order.iter().map(|&j| cspec.queues[j].value(g[j])).collect();
    let mut delay_order: Vec<usize> = social_opt::sort_with_ties(&delays, 0.0, false)
        .into_iter()
        .map(|k| alloc.used_queue_order[k])
        .collect();
    for w in delay_order.windows(2) {
        let (a, b) = (prices[w[0]], prices[w[1]]);
        if b - a > 1e-9 * a.abs().max(1.0) {
            return Err(Error::NonMonotonePrices { queue: w[1] });
        }
    }
    let unused: Vec<usize> = (0..n).filter(|j| !alloc.used_queue_order.contains(j)).collect();
    delay_order.extend(&unused);
    let sorted = delay_order.iter().map(|&j| prices[j]).collect();
    Ok(PigouvianPrices {
        by_queue: PriceVector::new(prices)?,
        delay_order,
        sorted,
        unused,
    })
}
