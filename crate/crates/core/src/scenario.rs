//! Scenario files: a problem instance plus optional prices, routing,
//! simulation settings and solver options, stored as versioned JSON.
//!
//! ```json
//! {
//!   "version": 1,
//!   "units": { "time": "s", "work": "job" },
//!   "system": {
//!     "kind": "discrete",
//!     "classes": [{ "rate": 1.0, "sensitivity": 2.0 }],
//!     "queues": [{ "family": "mm1_mean_delay", "mu": 2.0 }]
//!   }
//! }
//! ```

use serde::{Deserialize, Serialize};

use crate::continuum::{ContinuumEquilibriumOptions, ContinuumOptions, ContinuumSpec, ThresholdAllocation};
use crate::error::{Error, Result};
use crate::model::{RoutingMatrix, SystemSpec};
use crate::sim::SimConfig;
use crate::social_opt::OptimizeOptions;
use crate::wardrop::{EquilibriumOptions, PriceVector};

pub const SCENARIO_VERSION: u32 = 1;

/// Names of the units that rates, sizes and times are expressed in.
///
/// Arrival rates are customers per `time`; mean job sizes and queue
/// capacities are in `work` and `work` per `time`. Nothing is converted; the
/// names are carried into reports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Units {
    pub time: String,
    pub work: String,
}

impl Default for Units {
    fn default() -> Self {
        Self {
            time: "time unit".into(),
            work: "work unit".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum System {
    Discrete(SystemSpec),
    Continuum(ContinuumSpec),
}

impl System {
    pub fn num_queues(&self) -> usize {
        match self {
            System::Discrete(s) => s.num_queues(),
            System::Continuum(c) => c.num_queues(),
        }
    }
}

/// Thresholds without derived flows; see [`ThresholdAllocation`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub used_queue_order: Vec<usize>,
    pub thresholds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Routing {
    Matrix(RoutingMatrix),
    Thresholds(Thresholds),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub optimize: OptimizeOptions,
    pub equilibrium: EquilibriumOptions,
    pub continuum: ContinuumOptions,
    pub continuum_equilibrium: ContinuumEquilibriumOptions,
    /// Grid step of the brute-force oracle.
    pub oracle_resolution: f64,
    /// Tolerance of the structure checks and the price certification.
    pub check_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            optimize: OptimizeOptions::default(),
            equilibrium: EquilibriumOptions::default(),
            continuum: ContinuumOptions::default(),
            continuum_equilibrium: ContinuumEquilibriumOptions::default(),
            oracle_resolution: 2e-3,
            check_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub units: Units,
    pub system: System,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prices: Option<PriceVector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub routing: Option<Routing>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimConfig>,
    #[serde(default)]
    pub solver: SolverOptions,
    /// Overrides the seeds of the optimizer, the equilibrium solver and the
    /// simulator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Scenario {
    pub fn new(system: System) -> Self {
        Self {
            version: SCENARIO_VERSION,
            name: None,
            units: Units::default(),
            system,
            prices: None,
            routing: None,
            sim: None,
            solver: SolverOptions::default(),
            seed: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| Error::InvalidScenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Checks the version and that every optional part fits the system.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        if self.version != SCENARIO_VERSION {
            return bad(format!("unsupported version {} (expected {SCENARIO_VERSION})", self.version));
        }
        let n = self.system.num_queues();
        if let Some(prices) = &self.prices {
            prices.check_len(n)?;
        }
        match (&self.system, &self.routing) {
            (_, None) => {}
            (System::Discrete(spec), Some(Routing::Matrix(p))) => spec.check_matrix(p)?,
            (System::Continuum(c), Some(Routing::Thresholds(t))) => {
                ThresholdAllocation::new(c, t.used_queue_order.clone(), t.thresholds.clone())?;
            }
            (System::Discrete(_), Some(Routing::Thresholds(_))) => {
                return bad("a discrete system needs a routing matrix, not thresholds".into())
            }
            (System::Continuum(_), Some(Routing::Matrix(_))) => {
                return bad("a continuum system needs thresholds, not a routing matrix".into())
            }
        }
        if let Some(sim) = &self.sim {
            match &self.system {
                System::Discrete(spec) => sim.validate(spec)?,
                System::Continuum(_) => return bad("simulation is only available for discrete systems".into()),
            }
        }
        let r = self.solver.oracle_resolution;
        if !(r > 0.0 && r <= 0.5) {
            return bad(format!("oracle resolution must lie in (0, 0.5], got {r}"));
        }
        if !(self.solver.check_tol >= 0.0) {
            return bad(format!("check tolerance must be nonnegative, got {}", self.solver.check_tol));
        }
        Ok(())
    }

    /// Copies `seed` into every seeded component.
    pub fn apply_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        self.solver.optimize.seed = seed;
        self.solver.equilibrium.seed = Some(seed);
        if let Some(sim) = &mut self.sim {
            sim.seed = seed;
        }
    }

    /// The scenario with its own `seed` applied, if any.
    pub fn seeded(mut self) -> Self {
        if let Some(seed) = self.seed {
            self.apply_seed(seed);
        }
        self
    }

    pub fn routing_matrix(&self) -> Option<&RoutingMatrix> {
        match &self.routing {
            Some(Routing::Matrix(p)) => Some(p),
            _ => None,
        }
    }

    pub fn threshold_allocation(&self) -> Result<Option<ThresholdAllocation>> {
        match (&self.system, &self.routing) {
            (System::Continuum(c), Some(Routing::Thresholds(t))) => {
                ThresholdAllocation::new(c, t.used_queue_order.clone(), t.thresholds.clone()).map(Some)
            }
            _ => Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuum::SensitivityDistribution;
    use crate::cost::CostModel;

    const SMALL: &str = r#"{
        "version": 1,
        "units": {"time": "s", "work": "job"},
        "system": {
            "kind": "discrete",
            "classes": [{"rate": 0.4, "sensitivity": 2.0}, {"rate": 0.4, "sensitivity": 1.0}],
            "queues": [{"family": "mm1_mean_delay", "mu": 1.0}, {"family": "mm1_mean_delay", "mu": 1.0}]
        },
        "prices": [0.5, 0.0],
        "routing": [[1.0, 0.0], [0.0, 1.0]],
        "sim": {"horizon": 1000.0, "replications": 2},
        "seed": 9
    }"#;

    #[test]
    fn parses_and_round_trips() {
        let s = Scenario::from_json(SMALL).unwrap();
        assert!(matches!(s.system, System::Discrete(_)));
        assert_eq!(s.solver, SolverOptions::default());
        let again = Scenario::from_json(&s.to_json()).unwrap();
        assert_eq!(again, s);
        let seeded = s.seeded();
        assert_eq!(seeded.sim.unwrap().seed, 9);
        assert_eq!(seeded.solver.optimize.seed, 9);
    }

    #[test]
    fn continuum_round_trip() {
        let c = ContinuumSpec::new(
            1.0,
            SensitivityDistribution::Uniform { low: 0.0, high: 10.0 },
            vec![CostModel::mm1(2.0), CostModel::mm1(2.0)],
        )
        .unwrap();
        let mut s = Scenario::new(System::Continuum(c));
        s.routing = Some(Routing::Thresholds(Thresholds {
            used_queue_order: vec![1, 0],
            thresholds: vec![5.0, 0.0],
        }));
        let again = Scenario::from_json(&s.to_json()).unwrap();
        assert_eq!(again, s);
        assert_eq!(again.threshold_allocation().unwrap().unwrap().flows.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn rejects_mismatches() {
        let edit = |from: &str, to: &str| Scenario::from_json(&SMALL.replace(from, to));
        assert!(matches!(edit("\"version\": 1", "\"version\": 2"), Err(Error::InvalidScenario(_))));
        assert!(edit("[0.5, 0.0]", "[0.5, 0.0, 1.0]").is_err());
        assert!(edit("[[1.0, 0.0], [0.0, 1.0]]", "[[1.0, 0.0]]").is_err());
        assert!(edit("[[1.0, 0.0], [0.0, 1.0]]", "[[0.7, 0.0], [0.0, 1.0]]").is_err());
        assert!(edit("\"horizon\": 1000.0", "\"horizon\": -1.0").is_err());
        assert!(edit("\"mu\": 1.0}, {", "\"mu\": -1.0}, {").is_err());
        assert!(edit("\"units\": {\"time\": \"s\", \"work\": \"job\"},", "").is_err());
        assert!(edit("\"seed\": 9", "\"seed\": 9, \"extra\": 1").is_err());
        let e = edit("\"rate\": 0.4, \"sensitivity\": 2.0", "\"rate\": 1.9, \"sensitivity\": 2.0").unwrap_err();
        assert!(e.to_string().contains("infeasible: total load exceeds capacity"), "{e}");
    }
}
