use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Batch-means estimate with a 95% Student-t confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub half_width: f64,
    pub batches: usize,
}

impl Estimate {
    /// `None` when fewer than two batch values are available.
    pub fn from_batches(values: &[f64]) -> Option<Self> {
        let k = values.len();
        if k < 2 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / k as f64;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1) as f64;
        let std_error = (var / k as f64).sqrt();
        let t = StudentsT::new(0.0, 1.0, (k - 1) as f64)
            .expect("positive degrees of freedom")
            .inverse_cdf(0.975);
        Some(Self {
            mean,
            std_error,
            half_width: t * std_error,
            batches: k,
        })
    }

    /// `(value - mean) / std_error`; infinite when the error is zero and the
    /// value differs.
    pub fn z_score(&self, value: f64) -> f64 {
        let d = self.mean - value;
        if self.std_error > 0.0 {
            d / self.std_error
        } else if d == 0.0 {
            0.0
        } else {
            d.signum() * f64::INFINITY
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        (self.mean - value).abs() <= self.half_width
    }
}
