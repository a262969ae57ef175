//! Privacy accounting for survey sampling designs.
//!
//! A survey pipeline draws a sample from a population (Poisson, stratified
//! without replacement, or cluster sampling) and releases a noisy statistic
//! of the sample through the Laplace mechanism. Because the pipeline's output
//! law on a fixed population is a finite mixture of equal-scale Laplace
//! densities, its effective privacy loss can be computed exactly rather than
//! bounded. This crate provides:
//!
//! * [`population`]: records, populations and add/remove neighbors,
//! * [`mechanisms`]: queries, the Laplace mechanism and [`LaplaceMixture`],
//! * [`samplers`]: sampling designs with random draws and exact outcome laws,
//! * [`allocation`]: apportionment rules and a brute-force sensitivity scanner,
//! * [`bounds`]: closed-form amplification and degradation formulas,
//! * [`auditor`]: exact and Monte Carlo effective-epsilon measurement.
//!
//! All numerical code is generic over [`Real`]; the `*64` and `*32` aliases
//! below fix the scalar type.

pub mod allocation;
pub mod auditor;
pub mod bounds;
mod error;
pub mod mechanisms;
pub mod population;
pub mod samplers;
mod scalar;

pub use allocation::{AllocationOutcome, AllocationRule, SensitivityReport};
pub use auditor::{AuditOptions, Method, PrivacyReport, Witness};
pub use error::{Error, Result};
pub use mechanisms::{LaplaceMixture, MechanismSpec, Query};
pub use population::{NeighborPair, Population, Record, Universe};
pub use samplers::{Infeasible, OutcomeDistribution, SamplingDesign, Within};
pub use scalar::Real;

/// Default cap on the number of enumerated outcomes or scanned cells.
pub const DEFAULT_BUDGET: u64 = 1 << 20;

pub type Record64 = Record<f64>;
pub type Population64 = Population<f64>;
pub type NeighborPair64 = NeighborPair<f64>;
pub type Universe64 = Universe<f64>;
pub type Query64 = Query<f64>;
pub type MechanismSpec64 = MechanismSpec<f64>;
pub type LaplaceMixture64 = LaplaceMixture<f64>;
pub type SamplingDesign64 = SamplingDesign<f64>;
pub type OutcomeDistribution64 = OutcomeDistribution<f64>;
pub type AllocationRule64 = AllocationRule<f64>;
pub type AllocationOutcome64 = AllocationOutcome<f64>;
pub type PrivacyReport64 = PrivacyReport<f64>;

pub type Record32 = Record<f32>;
pub type Population32 = Population<f32>;
pub type Query32 = Query<f32>;
pub type MechanismSpec32 = MechanismSpec<f32>;
pub type LaplaceMixture32 = LaplaceMixture<f32>;
pub type SamplingDesign32 = SamplingDesign<f32>;
pub type PrivacyReport32 = PrivacyReport<f32>;
