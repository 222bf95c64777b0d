//! Problem instances and exact evaluation of flows, social cost and its
//! gradient.
//!
//! Flows are measured in work per unit time: a class with customer rate
//! `rate` and mean job size `mean_job_size` contributes
//! `rate * mean_job_size * p_ij` to queue `j`. The sensitivity of a class is
//! the cost multiplier per unit of work, so a class-`i` customer at queue `j`
//! pays `sensitivity * mean_job_size * D_j` in expectation.

use serde::{Deserialize, Serialize};

use crate::cost::CostModel;
use crate::error::{Error, Result};

/// Rows of a routing matrix must sum to one within this tolerance.
pub const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSpec {
    pub rate: f64,
    pub sensitivity: f64,
    #[serde(default = "unit")]
    pub mean_job_size: f64,
}

fn unit() -> f64 {
    1.0
}

impl ClassSpec {
    pub fn new(rate: f64, sensitivity: f64) -> Self {
        Self {
            rate,
            sensitivity,
            mean_job_size: 1.0,
        }
    }

    pub fn with_job_size(mut self, mean_job_size: f64) -> Self {
        self.mean_job_size = mean_job_size;
        self
    }

    /// Work brought per unit time, `rate * mean_job_size`.
    pub fn load(&self) -> f64 {
        self.rate * self.mean_job_size
    }

    /// Cost multiplier per unit of work routed, `sensitivity * mean_job_size * rate`.
    pub fn weight(&self) -> f64 {
        self.sensitivity * self.mean_job_size * self.rate
    }

    /// Sensitivity of an individual customer, `sensitivity * mean_job_size`.
    pub fn customer_sensitivity(&self) -> f64 {
        self.sensitivity * self.mean_job_size
    }

    fn validate(&self, index: usize) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let reason = if !positive(self.rate) {
            "arrival rate must be positive"
        } else if !positive(self.sensitivity) {
            "sensitivity must be positive"
        } else if !positive(self.mean_job_size) {
            "mean job size must be positive"
        } else {
            return Ok(());
        };
        Err(Error::InvalidClass {
            index,
            reason: reason.into(),
        })
    }
}

/// A validated finite-class instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSystem", into = "RawSystem")]
pub struct SystemSpec {
    classes: Vec<ClassSpec>,
    queues: Vec<CostModel>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    classes: Vec<ClassSpec>,
    queues: Vec<CostModel>,
}

impl TryFrom<RawSystem> for SystemSpec {
    type Error = Error;
    fn try_from(raw: RawSystem) -> Result<Self> {
        SystemSpec::new(raw.classes, raw.queues)
    }
}

impl From<SystemSpec> for RawSystem {
    fn from(s: SystemSpec) -> Self {
        RawSystem {
            classes: s.classes,
            queues: s.queues,
        }
    }
}

impl SystemSpec {
    pub fn new(classes: Vec<ClassSpec>, queues: Vec<CostModel>) -> Result<Self> {
        if classes.is_empty() || queues.is_empty() {
            return Err(Error::EmptySystem);
        }
        for (i, c) in classes.iter().enumerate() {
            c.validate(i)?;
        }
        for w in 1..classes.len() {
            if !(classes[w - 1].sensitivity > classes[w].sensitivity) {
                return Err(Error::UnsortedSensitivities { first: w - 1, second: w });
            }
        }
        for (j, q) in queues.iter().enumerate() {
            q.validate(j)?;
        }
        let load: f64 = classes.iter().map(ClassSpec::load).sum();
        let capacity: f64 = queues.iter().map(CostModel::capacity).sum();
        if load >= capacity {
            return Err(Error::Infeasible { load, capacity });
        }
        Ok(Self { classes, queues })
    }

    /// Convenience constructor for unit job sizes.
    pub fn from_parts(rates: &[f64], sensitivities: &[f64], queues: Vec<CostModel>) -> Result<Self> {
        if rates.len() != sensitivities.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} sensitivities", rates.len()),
                found: format!("{}", sensitivities.len()),
            });
        }
        let classes = rates.iter().zip(sensitivities).map(|(&r, &b)| ClassSpec::new(r, b)).collect();
        Self::new(classes, queues)
    }

    pub fn classes(&self) -> &[ClassSpec] {
        &self.classes
    }

    pub fn queues(&self) -> &[CostModel] {
        &self.queues
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn num_queues(&self) -> usize {
        self.queues.len()
    }

    pub fn total_load(&self) -> f64 {
        self.classes.iter().map(ClassSpec::load).sum()
    }

    pub fn capacities(&self) -> Vec<f64> {
        self.queues.iter().map(CostModel::capacity).collect()
    }

    /// Same instance with the queues listed in `order` (a permutation).
    pub fn permute_queues(&self, order: &[usize]) -> Result<Self> {
        check_permutation(order, self.num_queues())?;
        let queues = order.iter().map(|&j| self.queues[j].clone()).collect();
        Ok(Self {
            classes: self.classes.clone(),
            queues,
        })
    }

    pub fn check_matrix(&self, p: &RoutingMatrix) -> Result<()> {
        if p.rows() != self.num_classes() || p.cols() != self.num_queues() {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.num_classes(), self.num_queues()),
                found: format!("{}x{}", p.rows(), p.cols()),
            });
        }
        Ok(())
    }
}

pub(crate) fn check_permutation(order: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if order.len() != n {
        return Err(Error::DimensionMismatch {
            expected: format!("permutation of {n} queues"),
            found: format!("{} entries", order.len()),
        });
    }
    for &j in order {
        if j >= n || std::mem::replace(&mut seen[j], true) {
            return Err(Error::DimensionMismatch {
                expected: format!("permutation of {n} queues"),
                found: format!("{order:?}"),
            });
        }
    }
    Ok(())
}

/// Right-stochastic `rows x cols` matrix, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct RoutingMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RoutingMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if m == 0 || n == 0 {
            return Err(Error::DimensionMismatch {
                expected: "non-empty matrix".into(),
                found: format!("{m}x{n}"),
            });
        }
        let mut data = Vec::with_capacity(m * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: format!("{n} columns"),
                    found: format!("{} in row {i}", row.len()),
                });
            }
            data.extend_from_slice(row);
        }
        let p = Self { rows: m, cols: n, data };
        p.validate()?;
        Ok(p)
    }

    /// Builds a matrix from rows known to be stochastic up to rounding;
    /// tiny negative entries are clipped and each row renormalised.
    pub(crate) fn from_flat_normalized(rows: usize, cols: usize, mut data: Vec<f64>) -> Self {
        for row in data.chunks_mut(cols) {
            for v in row.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
            let s: f64 = row.iter().sum();
            for v in row.iter_mut() {
                *v /= s;
            }
        }
        Self { rows, cols, data }
    }

    fn validate(&self) -> Result<()> {
        for (i, row) in self.data.chunks(self.cols).enumerate() {
            if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::NotStochastic {
                    row: i,
                    reason: format!("entry {v} outside [0, 1]"),
                });
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::NotStochastic {
                    row: i,
                    reason: format!("row sums to {s}"),
                });
            }
        }
        Ok(())
    }

    /// Every class sends all traffic to `queue`.
    pub fn dedicated(rows: usize, cols: usize, queue: usize) -> Self {
        let mut data = vec![0.0; rows * cols];
        for i in 0..rows {
            data[i * cols + queue] = 1.0;
        }
        Self { rows, cols, data }
    }

    /// Every class splits uniformly.
    pub fn uniform(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![1.0 / cols as f64; rows * cols],
        }
    }

    /// Every row equals `weights / sum(weights)`.
    pub fn proportional(rows: usize, weights: &[f64]) -> Self {
        let s: f64 = weights.iter().sum();
        let row: Vec<f64> = weights.iter().map(|w| w / s).collect();
        Self {
            rows,
            cols: weights.len(),
            data: row.repeat(rows),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    /// Same matrix with columns listed in `order`.
    pub fn permute_columns(&self, order: &[usize]) -> Result<Self> {
        check_permutation(order, self.cols)?;
        let mut data = Vec::with_capacity(self.data.len());
        for row in self.data.chunks(self.cols) {
            data.extend(order.iter().map(|&j| row[j]));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }
}

impl TryFrom<Vec<Vec<f64>>> for RoutingMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        RoutingMatrix::new(rows)
    }
}

impl From<RoutingMatrix> for Vec<Vec<f64>> {
    fn from(p: RoutingMatrix) -> Self {
        p.to_rows()
    }
}

/// Aggregate work arrival rate into each queue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FlowVector(pub Vec<f64>);

impl FlowVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// True when every flow lies strictly inside its queue's domain.
    pub fn is_feasible(&self, queues: &[CostModel]) -> bool {
        self.0.iter().zip(queues).all(|(&g, q)| g < q.capacity())
    }

    pub fn costs(&self, queues: &[CostModel]) -> Vec<f64> {
        self.0.iter().zip(queues).map(|(&g, q)| q.value(g)).collect()
    }
}

impl std::ops::Index<usize> for FlowVector {
    type Output = f64;
    fn index(&self, j: usize) -> &f64 {
        &self.0[j]
    }
}

pub(crate) fn flows_raw(classes: &[ClassSpec], n: usize, p: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; n];
    for (c, row) in classes.iter().zip(p.chunks(n)) {
        let a = c.load();
        for (gj, &pij) in g.iter_mut().zip(row) {
            *gj += a * pij;
        }
    }
    g
}

pub(crate) fn social_cost_raw(classes: &[ClassSpec], queues: &[CostModel], p: &[f64]) -> f64 {
    let n = queues.len();
    let g = flows_raw(classes, n, p);
    let mut weights = vec![0.0; n];
    for (c, row) in classes.iter().zip(p.chunks(n)) {
        let w = c.weight();
        for (wj, &pij) in weights.iter_mut().zip(row) {
            *wj += w * pij;
        }
    }
    let mut u = 0.0;
    for j in 0..n {
        let d = queues[j].value(g[j]);
        if d.is_infinite() {
            return f64::INFINITY;
        }
        u += weights[j] * d;
    }
    u
}

/// Gradient into `out`; returns false when some flow is infeasible.
pub(crate) fn gradient_raw(classes: &[ClassSpec], queues: &[CostModel], p: &[f64], out: &mut [f64]) -> bool {
    let n = queues.len();
    let g = flows_raw(classes, n, p);
    let mut weights = vec![0.0; n];
    for (c, row) in classes.iter().zip(p.chunks(n)) {
        let w = c.weight();
        for (wj, &pij) in weights.iter_mut().zip(row) {
            *wj += w * pij;
        }
    }
    let mut d = vec![0.0; n];
    let mut externality = vec![0.0; n];
    for j in 0..n {
        if g[j] >= queues[j].capacity() {
            return false;
        }
        d[j] = queues[j].value(g[j]);
        externality[j] = weights[j] * queues[j].derivative(g[j]);
    }
    for (c, row) in classes.iter().zip(out.chunks_mut(n)) {
        let (w, a) = (c.weight(), c.load());
        for j in 0..n {
            row[j] = w * d[j] + a * externality[j];
        }
    }
    true
}

pub fn aggregate_rates(spec: &SystemSpec, p: &RoutingMatrix) -> Result<FlowVector> {
    spec.check_matrix(p)?;
    Ok(FlowVector(flows_raw(&spec.classes, spec.num_queues(), &p.data)))
}

/// `U(P) = sum_ij sensitivity_i * size_i * rate_i * p_ij * D_j(gamma_j)`,
/// or `+inf` when any queue is at or beyond capacity.
pub fn social_cost(spec: &SystemSpec, p: &RoutingMatrix) -> Result<f64> {
    spec.check_matrix(p)?;
    Ok(social_cost_raw(&spec.classes, &spec.queues, &p.data))
}

/// Partial derivatives `dU/dp_ij` as a row-major `M x N` matrix.
pub fn social_cost_gradient(spec: &SystemSpec, p: &RoutingMatrix) -> Result<Vec<Vec<f64>>> {
    spec.check_matrix(p)?;
    let n = spec.num_queues();
    let mut out = vec![0.0; p.data.len()];
    if !gradient_raw(&spec.classes, &spec.queues, &p.data, &mut out) {
        let g = flows_raw(&spec.classes, n, &p.data);
        let j = (0..n).find(|&j| g[j] >= spec.queues[j].capacity()).unwrap_or(0);
        return Err(Error::InfeasibleFlow {
            queue: j,
            flow: g[j],
            capacity: spec.queues[j].capacity(),
        });
    }
    Ok(out.chunks(n).map(<[f64]>::to_vec).collect())
}

/// Equivalent instance with unit job sizes.
///
/// Rates become work rates `rate * mean_job_size`; the per-work sensitivity
/// is unchanged, so flows and social cost are identical for every routing
/// matrix. Class order is preserved because sensitivities are already
/// strictly decreasing.
pub fn effective_spec(spec: &SystemSpec) -> Result<SystemSpec> {
    let classes = spec.classes.iter().map(|c| ClassSpec::new(c.load(), c.sensitivity)).collect();
    SystemSpec::new(classes, spec.queues.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn five_queue() -> SystemSpec {
        SystemSpec::from_parts(
            &[1.0; 5],
            &[5.0, 4.0, 3.0, 2.0, 1.0],
            [2.0, 3.0, 2.5, 1.1, 1.5].iter().map(|&m| CostModel::mm1(m)).collect(),
        )
        .unwrap()
    }

    /// Published optimum with columns (Q2, Q3, Q1, Q5, Q4) mapped back to
    /// the original queue order.
    fn five_queue_optimum() -> RoutingMatrix {
        let sorted = [
            [1.0, 0.0, 0.0, 0.0, 0.0],
            [0.528, 0.472, 0.0, 0.0, 0.0],
            [0.0, 0.788, 0.212, 0.0, 0.0],
            [0.0, 0.0, 0.786, 0.214, 0.0],
            [0.0, 0.0, 0.0, 0.517, 0.483],
        ];
        let sorted_to_orig = [1, 2, 0, 4, 3];
        let rows = sorted
            .iter()
            .map(|r| {
                let mut row = vec![0.0; 5];
                for (k, &j) in sorted_to_orig.iter().enumerate() {
                    row[j] = r[k];
                }
                row
            })
            .collect();
        RoutingMatrix::new(rows).unwrap()
    }

    #[test]
    fn flows_of_published_optimum() {
        let g = aggregate_rates(&five_queue(), &five_queue_optimum()).unwrap();
        for (a, b) in g.as_slice().iter().zip([0.998, 1.528, 1.26, 0.483, 0.731]) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn single_column_takes_everything() {
        let spec = SystemSpec::from_parts(&[0.3, 0.2], &[2.0, 1.0], vec![CostModel::mm1(1.0)]).unwrap();
        let g = aggregate_rates(&spec, &RoutingMatrix::dedicated(2, 1, 0)).unwrap();
        assert!((g[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn split_flows() {
        let spec = SystemSpec::from_parts(&[0.4, 0.4], &[2.0, 1.0], vec![CostModel::mm1(1.0); 2]).unwrap();
        let p = RoutingMatrix::new(vec![vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap();
        let g = aggregate_rates(&spec, &p).unwrap();
        assert!((g[0] - 0.4).abs() < 1e-15 && (g[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn published_social_cost() {
        let u = social_cost(&five_queue(), &five_queue_optimum()).unwrap();
        assert!((u - 12.47).abs() <= 0.01, "{u}");
    }

    #[test]
    fn forced_routing_closed_form() {
        let spec = SystemSpec::from_parts(&[0.5], &[2.0], vec![CostModel::mm1(1.0)]).unwrap();
        let u = social_cost(&spec, &RoutingMatrix::dedicated(1, 1, 0)).unwrap();
        assert_eq!(u, 2.0);
    }

    #[test]
    fn balanced_counterexample_value() {
        let spec = SystemSpec::from_parts(&[0.4, 0.4], &[2.0, 1.0], vec![CostModel::mm1(1.0); 2]).unwrap();
        let u = social_cost(&spec, &RoutingMatrix::uniform(2, 2)).unwrap();
        assert!((u - 2.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_flow_is_infinite() {
        let spec = SystemSpec::from_parts(&[0.6, 0.6], &[2.0, 1.0], vec![CostModel::mm1(1.0); 2]).unwrap();
        let u = social_cost(&spec, &RoutingMatrix::dedicated(2, 2, 0)).unwrap();
        assert_eq!(u, f64::INFINITY);
        assert!(matches!(
            social_cost_gradient(&spec, &RoutingMatrix::dedicated(2, 2, 0)),
            Err(Error::InfeasibleFlow { queue: 0, .. })
        ));
    }

    #[test]
    fn counterexample_gradient() {
        let spec = SystemSpec::from_parts(&[0.4, 0.4], &[2.0, 1.0], vec![CostModel::mm1(1.0); 2]).unwrap();
        // Along the two-dimensional parametrisation (p_1, p_2) the partial in
        // p_1 is dU/dp_11 - dU/dp_12.
        let at = |p1: f64, p2: f64| {
            let p = RoutingMatrix::new(vec![vec![p1, 1.0 - p1], vec![p2, 1.0 - p2]]).unwrap();
            let g = social_cost_gradient(&spec, &p).unwrap();
            (g[0][0] - g[0][1], g[1][0] - g[1][1])
        };
        let (d1, d2) = at(0.5, 0.5);
        assert!(d1.abs() < 1e-12 && d2.abs() < 1e-12);
        let (d1, _) = at(0.9, 0.1);
        assert!((d1 - 0.4 / 0.36 * 0.32).abs() < 1e-12, "{d1}");
    }

    #[test]
    fn validation_errors() {
        let q = vec![CostModel::mm1(1.0)];
        assert!(matches!(
            SystemSpec::from_parts(&[0.1, 0.1], &[1.0, 1.0], q.clone()),
            Err(Error::UnsortedSensitivities { .. })
        ));
        assert!(matches!(
            SystemSpec::from_parts(&[0.7, 0.4], &[2.0, 1.0], q.clone()),
            Err(Error::Infeasible { .. })
        ));
        assert!(matches!(
            SystemSpec::from_parts(&[-0.1], &[1.0], q.clone()),
            Err(Error::InvalidClass { .. })
        ));
        assert!(matches!(SystemSpec::from_parts(&[], &[], q), Err(Error::EmptySystem)));
        assert!(RoutingMatrix::new(vec![vec![0.5, 0.6]]).is_err());
        assert!(RoutingMatrix::new(vec![vec![1.2, -0.2]]).is_err());
        assert!(RoutingMatrix::new(vec![vec![0.5, 0.5], vec![1.0]]).is_err());
        let spec = five_queue();
        assert!(matches!(
            social_cost(&spec, &RoutingMatrix::uniform(5, 4)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn effective_spec_identity_for_unit_sizes() {
        let s = five_queue();
        assert_eq!(effective_spec(&s).unwrap(), s);
    }

    #[test]
    fn effective_spec_scales_rates() {
        let s = SystemSpec::new(
            vec![ClassSpec::new(1.0, 3.0).with_job_size(2.0), ClassSpec::new(1.0, 1.0)],
            vec![CostModel::PsLoad; 4],
        )
        .unwrap();
        let e = effective_spec(&s).unwrap();
        let rates: Vec<f64> = e.classes().iter().map(|c| c.rate).collect();
        let sens: Vec<f64> = e.classes().iter().map(|c| c.sensitivity).collect();
        assert_eq!(rates, vec![2.0, 1.0]);
        assert_eq!(sens, vec![3.0, 1.0]);
        assert_eq!(s.classes()[0].customer_sensitivity(), 6.0);
        let p = RoutingMatrix::new(vec![vec![0.3, 0.2, 0.2, 0.3], vec![0.25; 4]]).unwrap();
        let (a, b) = (social_cost(&s, &p).unwrap(), social_cost(&e, &p).unwrap());
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let s = five_queue();
        let text = serde_json::to_string(&s).unwrap();
        let back: SystemSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        let bad = r#"{"classes":[{"rate":1,"sensitivity":1},{"rate":1,"sensitivity":2}],"queues":[{"family":"mm1_mean_delay","mu":5}]}"#;
        assert!(serde_json::from_str::<SystemSpec>(bad).is_err());
    }
}
