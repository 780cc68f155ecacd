//! Cost-sharing mechanisms for the timed release of security information.
//!
//! A single piece of information (a bug) with unit cost is sold to `n`
//! agents. Agents who pay receive it at time 0; everyone else receives it for
//! free after a delay. This crate provides:
//!
//! - [`mechanisms`]: the CS, CSD, CSOD and GCSOD mechanisms as pure functions
//!   from type profiles to outcomes.
//! - [`audit`]: grid-based strategy-proofness, individual-rationality,
//!   budget-balance and monotonicity audits, the Myerson payment oracle, the
//!   competitive-ratio function `alpha(k)` and empirical competitiveness checks.
//! - [`distributions`]: uniform and truncated-normal priors with seeded
//!   inverse-CDF sampling and H-segment discretization.
//! - [`lowerbound`]: the discretized linear programs bounding expected
//!   Max-Delay and Sum-Delay from below.
//! - [`simulate`]: Monte-Carlo and exact-grouping estimation of expected
//!   delays, and the full comparison table.

pub mod audit;
pub mod distributions;
mod error;
pub mod lowerbound;
pub mod mechanisms;
pub mod rng;
pub mod simulate;

pub use audit::{AllocationRule, AuditReport, CompetitiveReport, Property, Violation};
pub use distributions::{DistributionSpec, SegmentedDistribution};
pub use lowerbound::{LpModel, LpSolution, LpStatus};
pub use simulate::{SimulationConfig, SimulationMode, SimulationReport, TableRow};
pub use error::{Error, Result};

pub use mechanisms::{
    DeadlineResult, ExpectedOutcome, GcsodExpectation, Grouping, Mechanism, Outcome, Side,
    TypeProfile,
};

