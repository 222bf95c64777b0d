//! Congestion-cost families.
//!
//! Every family is finite, strictly increasing and continuously
//! differentiable on `[0, capacity)` and returns `f64::INFINITY` at or beyond
//! the capacity. Solvers rely on that sentinel as a feasibility wall.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostModel {
    /// Mean sojourn time of an M/M/1 queue, `1 / (mu - gamma)`.
    Mm1MeanDelay { mu: f64 },
    /// `(gamma / mu) * exp((gamma - mu) * threshold)`: the probability that an
    /// arriving customer waits longer than `threshold` before service in a
    /// FCFS M/M/1 queue.
    Mm1TailProbability { mu: f64, threshold: f64 },
    /// Unit-rate processor sharing in load units, `1 / (1 - rho)`.
    PsLoad,
    /// Monotone cubic interpolation through `(gamma, cost)` samples.
    Tabulated { points: TabulatedCost },
}

impl CostModel {
    pub fn mm1(mu: f64) -> Self {
        CostModel::Mm1MeanDelay { mu }
    }

    pub fn mm1_tail(mu: f64, threshold: f64) -> Self {
        CostModel::Mm1TailProbability { mu, threshold }
    }

    pub fn validate(&self, index: usize) -> Result<()> {
        let bad = |reason: &str| {
            Err(Error::InvalidCostModel {
                index,
                reason: reason.to_string(),
            })
        };
        match *self {
            CostModel::Mm1MeanDelay { mu } if !(mu.is_finite() && mu > 0.0) => bad("service rate must be positive and finite"),
            CostModel::Mm1TailProbability { mu, threshold } => {
                if !(mu.is_finite() && mu > 0.0) {
                    bad("service rate must be positive and finite")
                } else if !(threshold.is_finite() && threshold >= 0.0) {
                    bad("tail threshold must be nonnegative and finite")
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Supremum of the finite domain.
    pub fn capacity(&self) -> f64 {
        match self {
            CostModel::Mm1MeanDelay { mu } | CostModel::Mm1TailProbability { mu, .. } => *mu,
            CostModel::PsLoad => 1.0,
            CostModel::Tabulated { points } => points.capacity(),
        }
    }

    pub fn value(&self, gamma: f64) -> f64 {
        if gamma >= self.capacity() {
            return f64::INFINITY;
        }
        match self {
            CostModel::Mm1MeanDelay { mu } => 1.0 / (mu - gamma),
            CostModel::Mm1TailProbability { mu, threshold } => (gamma / mu) * ((gamma - mu) * threshold).exp(),
            CostModel::PsLoad => 1.0 / (1.0 - gamma),
            CostModel::Tabulated { points } => points.value(gamma),
        }
    }

    pub fn derivative(&self, gamma: f64) -> f64 {
        if gamma >= self.capacity() {
            return f64::INFINITY;
        }
        match self {
            CostModel::Mm1MeanDelay { mu } => {
                let r = 1.0 / (mu - gamma);
                r * r
            }
            CostModel::Mm1TailProbability { mu, threshold } => ((gamma - mu) * threshold).exp() * (1.0 + gamma * threshold) / mu,
            CostModel::PsLoad => {
                let r = 1.0 / (1.0 - gamma);
                r * r
            }
            CostModel::Tabulated { points } => points.derivative(gamma),
        }
    }

    /// Solves `value(gamma) = target` for `gamma` in `[0, capacity)`.
    ///
    /// Returns `None` when `target < value(0)`; targets beyond the range of
    /// the model map to the capacity.
    pub fn inverse(&self, target: f64) -> Option<f64> {
        if target < self.value(0.0) {
            return None;
        }
        if let CostModel::Mm1MeanDelay { mu } = self {
            return Some((mu - 1.0 / target).max(0.0));
        }
        if let CostModel::PsLoad = self {
            return Some((1.0 - 1.0 / target).max(0.0));
        }
        let (mut lo, mut hi) = (0.0, self.capacity());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.value(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(lo)
    }
}

/// Piecewise-cubic Hermite interpolant with Fritsch–Butland slopes.
///
/// Knot slopes are harmonic means of adjacent secants (the secants themselves
/// at the two ends), which keeps every normalised slope in `(0, 2]` and the
/// interpolant's derivative strictly positive for strictly increasing data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct TabulatedCost {
    x: Vec<f64>,
    y: Vec<f64>,
    slopes: Vec<f64>,
}

impl TabulatedCost {
    pub fn new(points: &[[f64; 2]]) -> Result<Self> {
        let bad = |reason: String| Error::InvalidCostModel { index: 0, reason };
        if points.len() < 2 {
            return Err(bad("a tabulated model needs at least two points".into()));
        }
        if points[0][0] != 0.0 {
            return Err(bad("the first grid point must be at zero load".into()));
        }
        for (k, w) in points.windows(2).enumerate() {
            if !(w[1][0] > w[0][0]) || !(w[1][1] > w[0][1]) {
                return Err(bad(format!("grid is not strictly increasing at points {k} and {}", k + 1)));
            }
        }
        if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(bad("grid values must be finite".into()));
        }
        let x: Vec<f64> = points.iter().map(|p| p[0]).collect();
        let y: Vec<f64> = points.iter().map(|p| p[1]).collect();
        let secants: Vec<f64> = x
            .windows(2)
            .zip(y.windows(2))
            .map(|(xs, ys)| (ys[1] - ys[0]) / (xs[1] - xs[0]))
            .collect();
        let n = x.len();
        let mut slopes = vec![0.0; n];
        slopes[0] = secants[0];
        slopes[n - 1] = secants[n - 2];
        for k in 1..n - 1 {
            let (a, b) = (secants[k - 1], secants[k]);
            slopes[k] = 2.0 / (1.0 / a + 1.0 / b);
        }
        Ok(Self { x, y, slopes })
    }

    pub fn capacity(&self) -> f64 {
        *self.x.last().unwrap()
    }

    fn locate(&self, gamma: f64) -> (usize, f64, f64) {
        let k = match self.x.partition_point(|&v| v <= gamma) {
            0 => 0,
            p => (p - 1).min(self.x.len() - 2),
        };
        let h = self.x[k + 1] - self.x[k];
        (k, h, (gamma - self.x[k]) / h)
    }

    pub fn value(&self, gamma: f64) -> f64 {
        let (k, h, t) = self.locate(gamma.max(0.0));
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.y[k] + h10 * h * self.slopes[k] + h01 * self.y[k + 1] + h11 * h * self.slopes[k + 1]
    }

    pub fn derivative(&self, gamma: f64) -> f64 {
        let (k, h, t) = self.locate(gamma.max(0.0));
        let t2 = t * t;
        let d00 = 6.0 * t2 - 6.0 * t;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = -6.0 * t2 + 6.0 * t;
        let d11 = 3.0 * t2 - 2.0 * t;
        (d00 * self.y[k] + d01 * self.y[k + 1]) / h + d10 * self.slopes[k] + d11 * self.slopes[k + 1]
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        self.x.iter().zip(&self.y).map(|(&a, &b)| [a, b]).collect()
    }
}

impl TryFrom<Vec<[f64; 2]>> for TabulatedCost {
    type Error = Error;
    fn try_from(points: Vec<[f64; 2]>) -> Result<Self> {
        TabulatedCost::new(&points)
    }
}

impl From<TabulatedCost> for Vec<[f64; 2]> {
    fn from(t: TabulatedCost) -> Self {
        t.points()
    }
}
