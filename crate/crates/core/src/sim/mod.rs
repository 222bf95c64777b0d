//! Discrete-event simulation of Bernoulli-routed Poisson classes feeding the
//! parallel queues.
//!
//! Each queue is a single server whose speed is the queue's capacity, so a
//! job of size `s` needs `s / capacity` time units of service. Statistics are
//! collected by batch means: after the warmup, the remaining horizon of each
//! replication is cut into equal windows and every departure is credited to
//! the window it falls in. The pooled windows of all replications give the
//! point estimates and Student-t intervals.
//!
//! The tail statistic is the probability that a customer waits longer than
//! the threshold before service starts. That is what
//! `(gamma / mu) exp((gamma - mu) T)` describes for FCFS M/M/1; under PS and
//! preemptive LCFS service starts on arrival, so no tail is reported.

mod engine;
mod stats;

pub use stats::Estimate;

use serde::{Deserialize, Serialize};

use crate::cost::CostModel;
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::model::{self, RoutingMatrix, SystemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Discipline {
    #[default]
    Fcfs,
    Ps,
    LcfsPr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobSizeFamily {
    #[default]
    Exponential,
    Deterministic,
}

/// Job-size law of one class; the mean must match the class's mean job size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobSizeDistribution {
    pub family: JobSizeFamily,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default)]
    pub discipline: Discipline,
    /// Simulated time per replication.
    pub horizon: f64,
    /// Discarded initial time; defaults to a tenth of the horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warmup: Option<f64>,
    #[serde(default = "default_replications")]
    pub replications: u32,
    #[serde(default)]
    pub seed: u64,
    /// One entry per class; empty means exponential with the class mean.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub job_sizes: Vec<JobSizeDistribution>,
    /// Waiting-time threshold for the tail statistic; defaults to the
    /// threshold of each tail-probability queue.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_threshold: Option<f64>,
    #[serde(default = "default_batches")]
    pub batches: usize,
    #[serde(default)]
    pub execution: Execution,
}

fn default_replications() -> u32 {
    10
}

fn default_batches() -> usize {
    20
}

impl SimConfig {
    pub fn new(horizon: f64) -> Self {
        Self {
            discipline: Discipline::Fcfs,
            horizon,
            warmup: None,
            replications: default_replications(),
            seed: 0,
            job_sizes: Vec::new(),
            tail_threshold: None,
            batches: default_batches(),
            execution: Execution::Parallel,
        }
    }

    pub fn effective_warmup(&self) -> f64 {
        self.warmup.unwrap_or(0.1 * self.horizon)
    }

    pub fn validate(&self, spec: &SystemSpec) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSimConfig(m));
        let w = self.effective_warmup();
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        if !(w >= 0.0 && w < self.horizon) {
            return bad(format!("need 0 <= warmup < horizon, got warmup {w} and horizon {}", self.horizon));
        }
        if self.replications == 0 || self.batches == 0 {
            return bad("replications and batches must be at least 1".into());
        }
        if (self.replications as usize) * self.batches < 2 {
            return bad("need at least two batches in total for confidence intervals".into());
        }
        if let Some(t) = self.tail_threshold {
            if !(t.is_finite() && t >= 0.0) {
                return bad(format!("tail threshold must be nonnegative, got {t}"));
            }
        }
        if !self.job_sizes.is_empty() {
            if self.job_sizes.len() != spec.num_classes() {
                return bad(format!("{} job-size laws for {} classes", self.job_sizes.len(), spec.num_classes()));
            }
            for (i, (d, c)) in self.job_sizes.iter().zip(spec.classes()).enumerate() {
                if (d.mean - c.mean_job_size).abs() > 1e-12 * c.mean_job_size {
                    return bad(format!(
                        "class {i}: job-size mean {} differs from the class mean job size {}",
                        d.mean, c.mean_job_size
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueStats {
    pub queue: usize,
    /// Analytic flow at or above capacity: the queue grows without bound and
    /// its estimates are not steady-state values.
    pub divergent: bool,
    pub departures: u64,
    /// Customers per unit time.
    pub arrival_rate: Option<Estimate>,
    /// Work per unit time, comparable with the flow `gamma_j`.
    pub work_rate: Option<Estimate>,
    pub mean_sojourn: Option<Estimate>,
    /// Probability that a customer waits longer than `tail_threshold`.
    pub tail: Option<Estimate>,
    pub tail_threshold: Option<f64>,
    /// Time-average number of customers present.
    pub mean_in_system: Option<Estimate>,
    /// z-score of the per-batch gap between the time-average number present
    /// and the arrival-rate-times-sojourn prediction.
    pub little_z: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub class: usize,
    pub departures: u64,
    pub mean_sojourn: Option<Estimate>,
    /// Mean cost per customer: sensitivity times sojourn at delay queues,
    /// customer sensitivity times the tail indicator at tail queues.
    pub mean_cost: Option<Estimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub discipline: Discipline,
    pub horizon: f64,
    pub warmup: f64,
    pub replications: u32,
    pub queues: Vec<QueueStats>,
    pub classes: Vec<ClassStats>,
    /// Cost incurred per unit time, the empirical counterpart of `U(P)`.
    pub social_cost: Option<Estimate>,
    pub events_processed: u64,
}

fn tail_thresholds(spec: &SystemSpec, cfg: &SimConfig) -> Vec<Option<f64>> {
    spec.queues()
        .iter()
        .map(|q| {
            if cfg.discipline != Discipline::Fcfs {
                return None;
            }
            match (cfg.tail_threshold, q) {
                (Some(t), _) => Some(t),
                (None, CostModel::Mm1TailProbability { threshold, .. }) => Some(*threshold),
                _ => None,
            }
        })
        .collect()
}

pub fn simulate(spec: &SystemSpec, p: &RoutingMatrix, cfg: &SimConfig) -> Result<SimReport> {
    spec.check_matrix(p)?;
    cfg.validate(spec)?;
    let (m, n) = (spec.num_classes(), spec.num_queues());
    let classes = spec.classes();
    let setup = engine::Setup {
        rates: classes.iter().map(|c| c.rate).collect(),
        sensitivities: classes.iter().map(|c| c.sensitivity).collect(),
        customer_sensitivities: classes.iter().map(|c| c.customer_sensitivity()).collect(),
        mean_sizes: classes.iter().map(|c| c.mean_job_size).collect(),
        size_families: if cfg.job_sizes.is_empty() {
            vec![JobSizeFamily::Exponential; m]
        } else {
            cfg.job_sizes.iter().map(|d| d.family).collect()
        },
        routing: p.as_slice(),
        queues: spec.queues(),
        discipline: cfg.discipline,
        thresholds: tail_thresholds(spec, cfg),
        horizon: cfg.horizon,
        warmup: cfg.effective_warmup(),
        batches: cfg.batches,
        seed: cfg.seed,
    };
    let runs = exec::map_indexed(cfg.execution, cfg.replications as usize, |r| engine::replicate(&setup, r as u32));

    let len = (setup.horizon - setup.warmup) / setup.batches as f64;
    let gamma = model::aggregate_rates(spec, p)?;

    // Flattened (replication, batch) pairs in index order.
    let cells: Vec<(usize, usize)> = (0..runs.len()).flat_map(|r| (0..setup.batches).map(move |b| (r, b))).collect();
    let ratio = |num: &dyn Fn(usize, usize) -> f64, den: &dyn Fn(usize, usize) -> u64| -> Option<Estimate> {
        let v: Vec<f64> = cells
            .iter()
            .filter(|&&(r, b)| den(r, b) > 0)
            .map(|&(r, b)| num(r, b) / den(r, b) as f64)
            .collect();
        Estimate::from_batches(&v)
    };
    let per_time = |f: &dyn Fn(usize, usize) -> f64| -> Option<Estimate> {
        let v: Vec<f64> = cells.iter().map(|&(r, b)| f(r, b) / len).collect();
        Estimate::from_batches(&v)
    };

    let queues = (0..n)
        .map(|j| {
            let departures = runs.iter().flat_map(|r| r.departures.iter()).map(|d| d[j]).sum();
            let little = {
                let v: Vec<f64> = cells
                    .iter()
                    .map(|&(r, b)| (runs[r].area[b][j] - runs[r].sojourn[b][j]) / len)
                    .collect();
                Estimate::from_batches(&v).map(|e| e.z_score(0.0))
            };
            QueueStats {
                queue: j,
                divergent: !(gamma[j] < spec.queues()[j].capacity()),
                departures,
                arrival_rate: per_time(&|r, b| runs[r].arrivals[b][j] as f64),
                work_rate: per_time(&|r, b| runs[r].work[b][j]),
                mean_sojourn: ratio(&|r, b| runs[r].sojourn[b][j], &|r, b| runs[r].departures[b][j]),
                tail: setup.thresholds[j]
                    .and_then(|_| ratio(&|r, b| runs[r].over_threshold[b][j] as f64, &|r, b| runs[r].departures[b][j])),
                tail_threshold: setup.thresholds[j],
                mean_in_system: per_time(&|r, b| runs[r].area[b][j]),
                little_z: if departures > 0 { little } else { None },
            }
        })
        .collect();
    let class_stats = (0..m)
        .map(|i| ClassStats {
            class: i,
            departures: runs.iter().flat_map(|r| r.class_departures.iter()).map(|d| d[i]).sum(),
            mean_sojourn: ratio(&|r, b| runs[r].class_sojourn[b][i], &|r, b| runs[r].class_departures[b][i]),
            mean_cost: ratio(&|r, b| runs[r].class_cost[b][i], &|r, b| runs[r].class_departures[b][i]),
        })
        .collect();
    let social_cost = per_time(&|r, b| runs[r].class_cost[b].iter().sum());
    Ok(SimReport {
        discipline: cfg.discipline,
        horizon: cfg.horizon,
        warmup: setup.warmup,
        replications: cfg.replications,
        queues,
        classes: class_stats,
        social_cost,
        events_processed: runs.iter().map(|r| r.events).sum(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub queue: usize,
    /// Which statistic is compared: mean sojourn or waiting-time tail.
    pub measure: String,
    pub analytic: f64,
    pub empirical: Option<Estimate>,
    pub z_score: Option<f64>,
    /// Set when no comparison is possible.
    pub note: Option<String>,
}

/// Pairs each queue's cost model with the matching simulated statistic.
///
/// Tail-probability queues are compared with the waiting-time tail. Other
/// queues are compared on mean sojourn, predicted as `D_j(gamma_j)` times the
/// mean job size of the customers routed there.
pub fn compare_to_analytic(spec: &SystemSpec, p: &RoutingMatrix, cfg: &SimConfig) -> Result<(SimReport, Vec<Comparison>)> {
    let report = simulate(spec, p, cfg)?;
    let gamma = model::aggregate_rates(spec, p)?;
    let mut out = Vec::with_capacity(spec.num_queues());
    for (j, q) in spec.queues().iter().enumerate() {
        let stats = &report.queues[j];
        let d = q.value(gamma[j]);
        let (measure, analytic, empirical) = match q {
            CostModel::Mm1TailProbability { .. } => ("wait_tail", d, stats.tail),
            _ => {
                let (mut customers, mut work) = (0.0, 0.0);
                for (i, c) in spec.classes().iter().enumerate() {
                    customers += c.rate * p.get(i, j);
                    work += c.load() * p.get(i, j);
                }
                let size = if customers > 0.0 { work / customers } else { 1.0 };
                ("mean_sojourn", d * size, stats.mean_sojourn)
            }
        };
        let note = if gamma[j] == 0.0 {
            Some("no samples".to_string())
        } else if stats.divergent {
            Some("divergent: flow at or above capacity".to_string())
        } else if empirical.is_none() && measure == "wait_tail" && cfg.discipline != Discipline::Fcfs {
            Some("waiting-time tail is only measured under fcfs".to_string())
        } else if empirical.is_none() {
            Some("no samples".to_string())
        } else {
            None
        };
        let z_score = if note.is_none() {
            empirical.map(|e| e.z_score(analytic))
        } else {
            None
        };
        out.push(Comparison {
            queue: j,
            measure: measure.to_string(),
            analytic,
            empirical: if gamma[j] == 0.0 { None } else { empirical },
            z_score,
            note,
        });
    }
    Ok((report, out))
}
