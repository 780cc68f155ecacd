//! Domain types and the four cost-sharing mechanisms.
//!
//! Valuations are expressed in units of the bug's cost, so the cost is 1. An
//! agent with type `v` who receives the bug at time `t` in the life cycle
//! `[0, 1]` enjoys `(1 - t) * v`.
//!
//! `K(t)` denotes the set of group sizes `k` for which at least `k` reported
//! values are at least `1 / (k * t)`. All mechanisms here pick the largest
//! member of `K` at some deadline and let the top `k` agents split the cost.

mod gcsod;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use gcsod::{
    gcsod_allocate, gcsod_expected, gcsod_expected_with_cap, gcsod_sample, GcsodExpectation,
    Grouping, Side, DEFAULT_ENUMERATION_CAP,
};
pub(crate) use gcsod::{gcsod_delays_sorted, gcsod_expected_delays_sorted, DelayScratch};

/// Absolute slack on every "value is at least threshold" comparison.
pub const THRESHOLD_TOLERANCE: f64 = 1e-12;

/// Tolerance on `sum(payments) == 1` for sold outcomes.
pub const BUDGET_TOLERANCE: f64 = 1e-9;

/// Reported valuations `v_1..v_n`, one per agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TypeProfile {
    values: Vec<f64>,
}

impl TypeProfile {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidProfile("at least one agent is required".into()));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidProfile(format!(
                "agent {} has value {v}; values must be finite and non-negative",
                i + 1
            )));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, agent: usize) -> f64 {
        self.values[agent]
    }

    /// The same profile with `agent`'s report replaced by `report`.
    pub fn with_report(&self, agent: usize, report: f64) -> Result<Self> {
        if agent >= self.len() {
            return Err(Error::AgentOutOfRange {
                agent,
                agents: self.len(),
            });
        }
        let mut values = self.values.clone();
        values[agent] = report;
        Self::new(values)
    }

    /// Agent indices ordered by value, highest first; equal values keep the
    /// lower index first.
    pub fn descending_order(&self) -> Vec<usize> {
        descending_order(&self.values)
    }

    pub fn sorted_descending(&self) -> Vec<f64> {
        let mut sorted = self.values.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        sorted
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

impl TryFrom<Vec<f64>> for TypeProfile {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<TypeProfile> for Vec<f64> {
    fn from(profile: TypeProfile) -> Self {
        profile.values
    }
}

impl FromStr for TypeProfile {
    type Err = Error;

    /// Parses comma-separated decimals such as `0.9,0.8,0.26,0.26`.
    fn from_str(s: &str) -> Result<Self> {
        let values = s
            .split(',')
            .map(|tok| {
                let tok = tok.trim();
                tok.parse::<f64>()
                    .map_err(|_| Error::InvalidProfile(format!("cannot parse {tok:?} as a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(values)
    }
}

impl fmt::Display for TypeProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Realized allocation times and payments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub times: Vec<f64>,
    pub payments: Vec<f64>,
    pub sold: bool,
}

impl Outcome {
    /// Nobody pays and everyone receives the bug at `time`.
    pub fn unsold(n: usize, time: f64) -> Self {
        Self {
            times: vec![time; n],
            payments: vec![0.0; n],
            sold: false,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_delay(&self) -> f64 {
        self.times.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sum_delay(&self) -> f64 {
        self.times.iter().sum()
    }

    pub fn total_payment(&self) -> f64 {
        self.payments.iter().sum()
    }

    /// `(1 - t_i) * value - p_i`.
    pub fn utility(&self, agent: usize, value: f64) -> f64 {
        (1.0 - self.times[agent]) * value - self.payments[agent]
    }

    /// Number of agents paying a positive amount.
    pub fn payer_count(&self) -> usize {
        self.payments.iter().filter(|p| **p > 0.0).count()
    }

    pub fn is_budget_balanced(&self) -> bool {
        if self.sold {
            (self.total_payment() - 1.0).abs() <= BUDGET_TOLERANCE
        } else {
            self.payments.iter().all(|p| *p == 0.0) && self.times.iter().all(|t| *t == 1.0)
        }
    }

    pub fn to_expected(&self) -> ExpectedOutcome {
        ExpectedOutcome {
            times: self.times.clone(),
            payments: self.payments.clone(),
        }
    }
}

/// Allocation times and payments in expectation over a mechanism's random
/// bits. For deterministic mechanisms this is the outcome itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedOutcome {
    pub times: Vec<f64>,
    pub payments: Vec<f64>,
}

impl ExpectedOutcome {
    pub fn utility(&self, agent: usize, value: f64) -> f64 {
        (1.0 - self.times[agent]) * value - self.payments[agent]
    }
}

/// Optimal deadline `t_star` of a profile and the size `k_star` of the
/// cost-sharing group at that deadline. `k_star == 0` means no group can cover
/// the cost even at deadline 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeadlineResult {
    pub t_star: f64,
    pub k_star: usize,
}

/// Selects one of the four mechanisms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Mechanism {
    Cs,
    Csd { deadline: f64 },
    Csod,
    Gcsod,
}

impl Mechanism {
    pub fn csd(deadline: f64) -> Result<Self> {
        check_deadline(deadline)?;
        Ok(Mechanism::Csd { deadline })
    }

    pub fn is_randomized(&self) -> bool {
        matches!(self, Mechanism::Gcsod)
    }

    /// Deterministic outcome; GCSOD has none and is rejected.
    pub fn outcome(&self, profile: &TypeProfile) -> Result<Outcome> {
        match *self {
            Mechanism::Cs => Ok(cs_allocate(profile)),
            Mechanism::Csd { deadline } => csd_allocate(profile, deadline),
            Mechanism::Csod => Ok(csod_allocate(profile)),
            Mechanism::Gcsod => Err(Error::InvalidArgument(
                "GCSOD is randomized; pass a grouping or use the expectation".into(),
            )),
        }
    }

    /// Deadline faced by free riders, where the mechanism fixes one.
    pub fn fixed_deadline(&self) -> Option<f64> {
        match *self {
            Mechanism::Cs => Some(1.0),
            Mechanism::Csd { deadline } => Some(deadline),
            Mechanism::Csod | Mechanism::Gcsod => None,
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mechanism::Cs => f.write_str("CS"),
            Mechanism::Csd { deadline } => write!(f, "CSD({deadline})"),
            Mechanism::Csod => f.write_str("CSOD"),
            Mechanism::Gcsod => f.write_str("GCSOD"),
        }
    }
}

impl FromStr for Mechanism {
    type Err = Error;

    /// Accepts `cs`, `csod`, `gcsod` and `csd:<deadline>` (case-insensitive).
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "cs" => Ok(Mechanism::Cs),
            "csod" => Ok(Mechanism::Csod),
            "gcsod" => Ok(Mechanism::Gcsod),
            other => {
                let deadline = other
                    .strip_prefix("csd:")
                    .or_else(|| other.strip_prefix("csd(").and_then(|r| r.strip_suffix(')')))
                    .ok_or_else(|| {
                        Error::InvalidArgument(format!(
                            "unknown mechanism {s:?}; expected cs, csd:<deadline>, csod or gcsod"
                        ))
                    })?;
                let deadline: f64 = deadline
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad CSD deadline in {s:?}")))?;
                Mechanism::csd(deadline)
            }
        }
    }
}

fn check_deadline(deadline: f64) -> Result<()> {
    if (0.0..=1.0).contains(&deadline) {
        Ok(())
    } else {
        Err(Error::InvalidDeadline(deadline))
    }
}

pub(crate) fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    order
}

#[inline]
fn meets(value: f64, threshold: f64) -> bool {
    value >= threshold - THRESHOLD_TOLERANCE
}

/// `max K(deadline)` over values sorted in descending order, or 0 when the
/// set is empty. `k` is in `K` iff the `k`-th highest value is at least
/// `1 / (k * deadline)`.
pub(crate) fn max_group_size(sorted_desc: &[f64], deadline: f64) -> usize {
    if deadline <= 0.0 {
        return 0;
    }
    (1..=sorted_desc.len())
        .rev()
        .find(|&k| meets(sorted_desc[k - 1], 1.0 / (k as f64 * deadline)))
        .unwrap_or(0)
}

/// Optimal deadline over values sorted in descending order. An empty slice
/// has deadline 1 and no cost-sharing group.
pub(crate) fn deadline_of_sorted(sorted_desc: &[f64]) -> DeadlineResult {
    let earliest = sorted_desc
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > 0.0)
        .map(|(i, v)| 1.0 / ((i + 1) as f64 * v))
        .fold(f64::INFINITY, f64::min);
    if earliest <= 1.0 {
        let k_star = max_group_size(sorted_desc, earliest);
        debug_assert!(k_star >= 1, "minimizer must belong to K at its own deadline");
        DeadlineResult {
            t_star: earliest,
            k_star,
        }
    } else {
        DeadlineResult {
            t_star: 1.0,
            k_star: max_group_size(sorted_desc, 1.0),
        }
    }
}

/// Runs cost sharing with a deadline over the agents in `order` (indices into
/// `values`, highest value first) and writes the result into `times` and
/// `payments`. Returns the number of payers.
pub(crate) fn run_csd_on(
    values: &[f64],
    order: &[usize],
    deadline: f64,
    times: &mut [f64],
    payments: &mut [f64],
) -> usize {
    let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let k = max_group_size(&sorted, deadline);
    let share = if k > 0 { 1.0 / k as f64 } else { 0.0 };
    for (rank, &agent) in order.iter().enumerate() {
        if rank < k {
            times[agent] = 0.0;
            payments[agent] = share;
        } else {
            times[agent] = deadline;
            payments[agent] = 0.0;
        }
    }
    k
}

/// Cost sharing (CS): the largest group that can split the cost evenly pays
/// and receives the bug at time 0; everyone else waits until time 1.
pub fn cs_allocate(profile: &TypeProfile) -> Outcome {
    csd_allocate(profile, 1.0).expect("deadline 1 is always valid")
}

/// Cost sharing with a constant deadline `deadline` (CSD).
///
/// When no group qualifies the outcome is "not sold" with every agent at
/// `deadline`. For `deadline < 1` that outcome is not budget balanced: it is
/// returned as is, and the budget audit flags it.
pub fn csd_allocate(profile: &TypeProfile, deadline: f64) -> Result<Outcome> {
    check_deadline(deadline)?;
    let n = profile.len();
    let order = profile.descending_order();
    let mut times = vec![0.0; n];
    let mut payments = vec![0.0; n];
    let k = run_csd_on(profile.values(), &order, deadline, &mut times, &mut payments);
    Ok(Outcome {
        times,
        payments,
        sold: k > 0,
    })
}

/// Earliest deadline at which some group still covers the cost, capped at 1.
pub fn optimal_deadline(profile: &TypeProfile) -> DeadlineResult {
    deadline_of_sorted(&profile.sorted_descending())
}

/// Cost sharing with the profile's optimal deadline (CSOD). Budget balanced,
/// individually rational, not strategy-proof.
pub fn csod_allocate(profile: &TypeProfile) -> Outcome {
    let deadline = optimal_deadline(profile).t_star;
    csd_allocate(profile, deadline).expect("optimal deadline lies in (0, 1]")
}

/// Max and sum delay of CSD over values sorted in descending order, without
/// building the outcome.
pub(crate) fn csd_delays_sorted(sorted_desc: &[f64], deadline: f64) -> (f64, f64) {
    let n = sorted_desc.len();
    let k = max_group_size(sorted_desc, deadline);
    let waiting = (n - k) as f64;
    let max = if k < n { deadline } else { 0.0 };
    (max, waiting * deadline)
}
