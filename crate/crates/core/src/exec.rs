//! Data-parallel helpers with a sequential fallback.
//!
//! The `parallel` cargo feature (on by default) routes [`Execution::Parallel`]
//! through rayon. Without the feature every request runs sequentially, so the
//! results are identical either way: work items are indexed and merged in
//! index order.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// True when this build can actually run work on several threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Evaluates `f(0..n)` and returns the results in index order.
pub fn map_indexed<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Index of the smallest key, lowest index winning ties. NaN keys never win.
pub fn argmin_by_key(keys: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &k) in keys.iter().enumerate() {
        if k.is_nan() {
            continue;
        }
        match best {
            Some(b) if keys[b] <= k => {}
            _ => best = Some(i),
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_agree() {
        let seq = map_indexed(Execution::Sequential, 100, |i| i * i);
        let par = map_indexed(Execution::Parallel, 100, |i| i * i);
        assert_eq!(seq, par);
    }

    #[test]
    fn argmin_prefers_lowest_index() {
        assert_eq!(argmin_by_key(&[3.0, 1.0, 1.0]), Some(1));
        assert_eq!(argmin_by_key(&[f64::NAN, 2.0]), Some(1));
        assert_eq!(argmin_by_key(&[f64::INFINITY, f64::INFINITY]), Some(0));
        assert_eq!(argmin_by_key(&[]), None);
    }
}
