//! Pigouvian admission prices: each queue charges the marginal congestion
//! its traffic imposes on everyone already there,
//! `c_n = D'_n(gamma_n) * sum_m sensitivity_m * size_m * rate_m * p_mn`.
//! At a social optimum these prices make the optimum a Wardrop equilibrium.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, RoutingMatrix, SystemSpec};
use crate::social_opt;
use crate::wardrop::{self, PriceVector};

/// Support threshold used when certifying prices.
pub const CERTIFY_SUPPORT_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PigouvianPrices {
    /// Prices in original queue order.
    pub by_queue: PriceVector,
    /// Used queues by congestion cost ascending, then unused queues by index.
    pub delay_order: Vec<usize>,
    /// `by_queue` listed in `delay_order`.
    pub sorted: Vec<f64>,
    /// Queues carrying no traffic; their price is zero.
    pub unused: Vec<usize>,
}

pub fn pigouvian_prices(spec: &SystemSpec, p_star: &RoutingMatrix) -> Result<PigouvianPrices> {
    spec.check_matrix(p_star)?;
    let n = spec.num_queues();
    let gamma = model::aggregate_rates(spec, p_star)?;
    let mut weights = vec![0.0; n];
    for (i, c) in spec.classes().iter().enumerate() {
        for (j, w) in weights.iter_mut().enumerate() {
            *w += c.weight() * p_star.get(i, j);
        }
    }
    let mut prices = vec![0.0; n];
    let mut delays = vec![0.0; n];
    let mut unused = Vec::new();
    for (j, q) in spec.queues().iter().enumerate() {
        if gamma[j] >= q.capacity() {
            return Err(Error::InfeasibleFlow {
                queue: j,
                flow: gamma[j],
                capacity: q.capacity(),
            });
        }
        if gamma[j] == 0.0 {
            unused.push(j);
            continue;
        }
        delays[j] = q.value(gamma[j]);
        prices[j] = weights[j] * q.derivative(gamma[j]);
    }
    let used: Vec<usize> = (0..n).filter(|j| !unused.contains(j)).collect();
    let used_delays: Vec<f64> = used.iter().map(|&j| delays[j]).collect();
    let mut delay_order: Vec<usize> = social_opt::sort_with_ties(&used_delays, 0.0, false)
        .into_iter()
        .map(|k| used[k])
        .collect();
    for w in delay_order.windows(2) {
        let (a, b) = (prices[w[0]], prices[w[1]]);
        if b - a > 1e-9 * a.abs().max(1.0) {
            return Err(Error::NonMonotonePrices { queue: w[1] });
        }
    }
    delay_order.extend(&unused);
    let sorted = delay_order.iter().map(|&j| prices[j]).collect();
    Ok(PigouvianPrices {
        by_queue: PriceVector::new(prices)?,
        delay_order,
        sorted,
        unused,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certification {
    pub certified: bool,
    pub residual: f64,
}

/// Checks that `p_star` is a Wardrop equilibrium at `prices`.
pub fn certify_prices(spec: &SystemSpec, p_star: &RoutingMatrix, prices: &PriceVector, tol: f64) -> Result<Certification> {
    let residual = wardrop::wardrop_residual(spec, prices, p_star, CERTIFY_SUPPORT_TOL)?;
    Ok(Certification {
        certified: residual <= tol,
        residual,
    })
}

/// Adds `delta` to every price. Only price differences enter the
/// equilibrium condition, so the induced equilibria are unchanged.
pub fn price_shift(prices: &PriceVector, delta: f64) -> Result<PriceVector> {
    let shifted: Vec<f64> = prices
        .as_slice()
        .iter()
        .map(|c| {
            let v = c + delta;
            // Cancellation such as 1.27 - 1.27 may leave a few ulps below zero.
            if v < 0.0 && v > -1e-12 * c.abs().max(1.0) {
                0.0
            } else {
                v
            }
        })
        .collect();
    if let Some((j, v)) = shifted.iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(Error::InvalidPrices(format!("shift makes the price at queue {j} negative ({v})")));
    }
    PriceVector::new(shifted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::CostModel;

    #[test]
    fn single_queue_price() {
        let spec = SystemSpec::from_parts(&[0.5], &[1.0], vec![CostModel::mm1(1.0)]).unwrap();
        let pr = pigouvian_prices(&spec, &RoutingMatrix::dedicated(1, 1, 0)).unwrap();
        assert!((pr.by_queue.as_slice()[0] - 2.0).abs() < 1e-12);
        let cert = certify_prices(&spec, &RoutingMatrix::dedicated(1, 1, 0), &pr.by_queue, 0.0).unwrap();
        assert!(cert.certified && cert.residual == 0.0);
    }

    #[test]
    fn unused_queue_priced_zero_and_last() {
        let spec = SystemSpec::from_parts(&[0.2], &[1.0], vec![CostModel::mm1(1.0), CostModel::mm1(5.0)]).unwrap();
        let pr = pigouvian_prices(&spec, &RoutingMatrix::dedicated(1, 2, 1)).unwrap();
        assert_eq!(pr.unused, vec![0]);
        assert_eq!(pr.delay_order, vec![1, 0]);
        assert_eq!(pr.sorted[1], 0.0);
    }

    #[test]
    fn inverted_prices_rejected() {
        // Two identical queues with the less loaded one carrying the larger
        // weight: delay order and price order disagree.
        let spec = SystemSpec::from_parts(&[0.1, 0.6], &[10.0, 1.0], vec![CostModel::mm1(1.0); 2]).unwrap();
        let p = RoutingMatrix::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(pigouvian_prices(&spec, &p), Err(Error::NonMonotonePrices { .. })));
    }

    #[test]
    fn shift_examples() {
        let p = PriceVector::new(vec![3.28, 2.77, 2.194, 1.59, 1.27]).unwrap();
        let s = price_shift(&p, -1.27).unwrap();
        for (a, b) in s.as_slice().iter().zip([2.01, 1.5, 0.924, 0.32, 0.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(price_shift(&p, 0.0).unwrap(), p);
        assert!(price_shift(&p, -1.5).is_err());
    }
}
