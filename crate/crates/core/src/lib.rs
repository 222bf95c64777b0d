//! Socially optimal routing of multiclass traffic to heterogeneous parallel
//! queues, Wardrop equilibria under per-queue admission prices, and the
//! Pigouvian prices that make the two coincide.
//!
//! The finite-class model lives in [`model`], [`social_opt`], [`wardrop`] and
//! [`pricing`]; [`continuum`] covers a continuum of sensitivities, and
//! [`sim`] is a discrete-event simulator for checking the analytic cost
//! models. [`scenario`] defines the JSON scenario format used by the CLI.

#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod continuum;
pub mod cost;
pub mod error;
pub mod exec;
pub mod model;
pub mod pricing;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod simplex;
pub mod social_opt;
pub mod wardrop;

pub use cost::{CostModel, TabulatedCost};
pub use error::{Error, Result};
pub use exec::Execution;
pub use model::{aggregate_rates, effective_spec, social_cost, social_cost_gradient, ClassSpec, FlowVector, RoutingMatrix, SystemSpec};
