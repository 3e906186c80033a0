//! Uncertainty-aware offloading of LLM inference in multi-user,
//! multi-server mobile edge computing.
//!
//! Users either answer a query with an on-device small model or offload it
//! to an edge server hosting a large model. Offloading pays uplink and
//! shared-compute delay but tends to be more accurate, especially for
//! queries whose first-token distribution is uncertain. The crate provides
//! the delay models ([`radio`], [`compute`]), uncertainty metrics and
//! traces ([`uncertainty`]), instance generation ([`scenario`]), the greedy
//! offloading solvers and baselines ([`solver`]), and a Monte Carlo
//! experiment driver ([`harness`]).

pub mod assignment;
pub mod compute;
pub mod error;
pub mod harness;
pub mod radio;
pub mod rng;
pub mod scenario;
pub mod solver;
pub mod uncertainty;

pub use assignment::Assignment;
pub use error::{Error, Result};
pub use scenario::{generate_instance, Instance, ScenarioConfig};
pub use solver::{Algorithm, SolverReport};
