//! Empirical audits of mechanism properties.
//!
//! Every check is grid based: outcomes are piecewise constant in each report,
//! so a grid that also contains the mechanism's threshold points catches the
//! deviations that matter. Randomized mechanisms are audited on expected
//! outcomes for strategy-proofness and monotonicity, and per realization for
//! budget balance. Individual rationality is checked both ways.

mod alpha;
mod competitive;
mod myerson;

use std::fmt;

use std::ops::RangeInclusive;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::mechanisms::{
    gcsod_allocate, gcsod_expected, optimal_deadline, ExpectedOutcome, Grouping, Mechanism, Outcome,
    TypeProfile, DEFAULT_ENUMERATION_CAP,
};
use crate::{Error, Result};

pub use alpha::{alpha, alpha_exact, alpha_table, verify_alpha_bound};
pub use competitive::{check_competitive_max, check_competitive_sum, CompetitiveReport, MAX_DELAY_BOUND, SUM_DELAY_BOUND};
pub use myerson::myerson_payment;

/// Slack for exact-arithmetic audits.
pub const EXACT_EPSILON: f64 = 1e-9;
/// Slack when expectations come from Monte Carlo.
pub const MONTE_CARLO_EPSILON: f64 = 1e-6;
/// Default number of evenly spaced misreports per agent.
pub const DEFAULT_GRID_POINTS: usize = 50;

/// Anything that maps reports to (expected) allocation times and payments.
pub trait AllocationRule: Sync {
    fn label(&self) -> String;

    /// Outcome in expectation over the rule's random bits.
    fn expected_outcome(&self, profile: &TypeProfile) -> Result<ExpectedOutcome>;

    /// Every realization of the rule's random bits, equally likely.
    fn realizations(&self, profile: &TypeProfile) -> Result<Vec<Outcome>>;

    fn is_randomized(&self) -> bool {
        false
    }

    /// Misreports worth trying for `agent` beyond the evenly spaced grid,
    /// typically the points where the agent's outcome can jump.
    fn candidate_reports(&self, _profile: &TypeProfile, _agent: usize) -> Vec<f64> {
        Vec::new()
    }

    /// Deadline to attach to budget violations, if the rule has one.
    fn fixed_deadline(&self) -> Option<f64> {
        None
    }
}

impl AllocationRule for Mechanism {
    fn label(&self) -> String {
        self.to_string()
    }

    fn expected_outcome(&self, profile: &TypeProfile) -> Result<ExpectedOutcome> {
        match self {
            Mechanism::Gcsod => Ok(gcsod_expected(profile)?.to_expected()),
            deterministic => Ok(deterministic.outcome(profile)?.to_expected()),
        }
    }

    fn realizations(&self, profile: &TypeProfile) -> Result<Vec<Outcome>> {
        match self {
            Mechanism::Gcsod => {
                let n = profile.len();
                if n > DEFAULT_ENUMERATION_CAP {
                    return Err(Error::EnumerationCap {
                        agents: n,
                        cap: DEFAULT_ENUMERATION_CAP,
                    });
                }
                (0..1u64 << n)
                    .map(|mask| gcsod_allocate(profile, &Grouping::from_mask(n, mask)))
                    .collect()
            }
            deterministic => Ok(vec![deterministic.outcome(profile)?]),
        }
    }

    fn is_randomized(&self) -> bool {
        Mechanism::is_randomized(self)
    }

    fn candidate_reports(&self, profile: &TypeProfile, agent: usize) -> Vec<f64> {
        let n = profile.len();
        let others: Vec<f64> = profile
            .values()
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != agent)
            .map(|(_, v)| *v)
            .collect();
        let mut deadlines = vec![1.0];
        match *self {
            Mechanism::Csd { deadline } if deadline > 0.0 => deadlines.push(deadline),
            Mechanism::Csod => deadlines.push(optimal_deadline(profile).t_star),
            _ => {}
        }
        let mut points = others.clone();
        for d in deadlines {
            points.extend((1..=n).map(|k| 1.0 / (k as f64 * d)));
        }
        if matches!(self, Mechanism::Gcsod) {
            // Deadlines of the other group are 1/(m * v_j); the matching
            // thresholds for this agent are m * v_j / k.
            for v in &others {
                for m in 1..=2 {
                    for k in 1..=2 {
                        points.push(m as f64 * v / k as f64);
                    }
                }
            }
        }
        let below: Vec<f64> = points.iter().map(|p| p - 1e-7).collect();
        points.extend(below);
        points.retain(|p| p.is_finite() && *p >= 0.0);
        points
    }

    fn fixed_deadline(&self) -> Option<f64> {
        Mechanism::fixed_deadline(self)
    }
}

/// Property audited by a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Property {
    #[serde(rename = "SP")]
    StrategyProofness,
    #[serde(rename = "IR")]
    IndividualRationality,
    #[serde(rename = "BB")]
    BudgetBalance,
    #[serde(rename = "MONO")]
    Monotonicity,
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Property::StrategyProofness => "SP",
            Property::IndividualRationality => "IR",
            Property::BudgetBalance => "BB",
            Property::Monotonicity => "MONO",
        })
    }
}

/// One failed check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub profile_index: usize,
    pub profile: TypeProfile,
    pub agent: Option<usize>,
    /// Misreport (SP), deadline (BB) or grid point where time rose (MONO).
    pub report: Option<f64>,
    /// Utility gain (SP), negative utility (IR), budget deviation (BB) or
    /// rise in allocation time (MONO).
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub property: Property,
    pub mechanism: String,
    pub profiles_checked: usize,
    pub violations: Vec<Violation>,
    pub passed: bool,
}

impl AuditReport {
    fn new(property: Property, mechanism: String, profiles_checked: usize, violations: Vec<Violation>) -> Self {
        Self {
            property,
            mechanism,
            profiles_checked,
            passed: violations.is_empty(),
            violations,
        }
    }
}

/// `points` evenly spaced values covering `[0, upper]`, both ends included.
pub fn uniform_grid(upper: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![upper],
        _ => (0..points)
            .map(|j| upper * j as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// `count` profiles with sizes drawn uniformly from `agents` and values
/// i.i.d. uniform on `(0, 1]`, reproducible per seed.
pub fn random_profiles(count: usize, agents: RangeInclusive<usize>, seed: u64) -> Result<Vec<TypeProfile>> {
    if agents.is_empty() || *agents.start() == 0 {
        return Err(Error::InvalidArgument(format!(
            "agent range {}..={} must be non-empty and start at 1 or more",
            agents.start(),
            agents.end()
        )));
    }
    let mut rng = crate::rng::seeded(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(agents.clone());
            TypeProfile::new((0..n).map(|_| 1.0 - rng.random::<f64>()).collect())
        })
        .collect()
}

pub fn max_delay(outcome: &Outcome) -> f64 {
    outcome.max_delay()
}

pub fn sum_delay(outcome: &Outcome) -> f64 {
    outcome.sum_delay()
}

/// Runs `check` over every profile and concatenates the violations in
/// profile order.
fn audit_profiles<F>(profiles: &[TypeProfile], check: F) -> Result<Vec<Violation>>
where
    F: Fn(usize, &TypeProfile) -> Result<Vec<Violation>> + Sync,
{
    let per_profile: Vec<Result<Vec<Violation>>> = profiles
        .par_iter()
        .enumerate()
        .map(|(idx, p)| check(idx, p))
        .collect();
    let mut all = Vec::new();
    for v in per_profile {
        all.extend(v?);
    }
    Ok(all)
}

/// Strategy-proofness: no misreport from `report_grid` (plus the rule's
/// candidate reports) raises an agent's utility by more than `epsilon`.
/// Every profitable misreport is listed, in ascending order per agent.
pub fn check_sp<R: AllocationRule + ?Sized>(
    rule: &R,
    profiles: &[TypeProfile],
    report_grid: &[f64],
    epsilon: f64,
) -> Result<AuditReport> {
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::InvalidArgument(format!("epsilon {epsilon} must be non-negative")));
    }
    let violations = audit_profiles(profiles, |idx, profile| {
        let truthful = rule.expected_outcome(profile)?;
        let mut found = Vec::new();
        for agent in 0..profile.len() {
            let value = profile.value(agent);
            let honest = truthful.utility(agent, value);
            let mut reports: Vec<f64> = report_grid.to_vec();
            reports.extend(rule.candidate_reports(profile, agent));
            reports.sort_by(f64::total_cmp);
            reports.dedup();
            for report in reports {
                if report == value || report.is_nan() || report < 0.0 {
                    continue;
                }
                let deviated = rule.expected_outcome(&profile.with_report(agent, report)?)?;
                let gain = deviated.utility(agent, value) - honest;
                if gain > epsilon {
                    found.push(Violation {
                        profile_index: idx,
                        profile: profile.clone(),
                        agent: Some(agent),
                        report: Some(report),
                        amount: gain,
                    });
                }
            }
        }
        Ok(found)
    })?;
    Ok(AuditReport::new(
        Property::StrategyProofness,
        rule.label(),
        profiles.len(),
        violations,
    ))
}

/// Individual rationality at truthful reports, per realization and, for
/// randomized rules, in expectation.
pub fn check_ir<R: AllocationRule + ?Sized>(rule: &R, profiles: &[TypeProfile]) -> Result<AuditReport> {
    let violations = audit_profiles(profiles, |idx, profile| {
        let mut outcomes: Vec<ExpectedOutcome> = rule
            .realizations(profile)?
            .iter()
            .map(Outcome::to_expected)
            .collect();
        if rule.is_randomized() {
            outcomes.push(rule.expected_outcome(profile)?);
        }
        let mut found = Vec::new();
        for agent in 0..profile.len() {
            let worst = outcomes
                .iter()
                .map(|o| o.utility(agent, profile.value(agent)))
                .fold(f64::INFINITY, f64::min);
            if worst < -EXACT_EPSILON {
                found.push(Violation {
                    profile_index: idx,
                    profile: profile.clone(),
                    agent: Some(agent),
                    report: None,
                    amount: worst,
                });
            }
        }
        Ok(found)
    })?;
    Ok(AuditReport::new(
        Property::IndividualRationality,
        rule.label(),
        profiles.len(),
        violations,
    ))
}

/// How far an outcome is from ex post budget balance; zero when balanced.
fn budget_deviation(outcome: &Outcome) -> f64 {
    if outcome.sold {
        let gap = (outcome.total_payment() - 1.0).abs();
        if gap <= crate::mechanisms::BUDGET_TOLERANCE {
            0.0
        } else {
            gap
        }
    } else {
        outcome
            .payments
            .iter()
            .map(|p| p.abs())
            .chain(outcome.times.iter().map(|t| 1.0 - t))
            .fold(0.0, f64::max)
    }
}

/// Ex post budget balance over every realization.
pub fn check_bb<R: AllocationRule + ?Sized>(rule: &R, profiles: &[TypeProfile]) -> Result<AuditReport> {
    let violations = audit_profiles(profiles, |idx, profile| {
        let worst = rule
            .realizations(profile)?
            .iter()
            .map(budget_deviation)
            .fold(0.0, f64::max);
        Ok(if worst > 0.0 {
            vec![Violation {
                profile_index: idx,
                profile: profile.clone(),
                agent: None,
                report: rule.fixed_deadline(),
                amount: worst,
            }]
        } else {
            Vec::new()
        })
    })?;
    Ok(AuditReport::new(
        Property::BudgetBalance,
        rule.label(),
        profiles.len(),
        violations,
    ))
}

/// Each agent's (expected) allocation time must not rise as her report
/// sweeps up `grid`, others fixed.
pub fn check_monotonicity<R: AllocationRule + ?Sized>(
    rule: &R,
    profiles: &[TypeProfile],
    grid: &[f64],
) -> Result<AuditReport> {
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument("monotonicity grid must be sorted ascending".into()));
    }
    let violations = audit_profiles(profiles, |idx, profile| {
        let mut found = Vec::new();
        for agent in 0..profile.len() {
            let mut previous: Option<f64> = None;
            for &report in grid {
                let t = rule.expected_outcome(&profile.with_report(agent, report)?)?.times[agent];
                if let Some(prev) = previous {
                    if t > prev + EXACT_EPSILON {
                        found.push(Violation {
                            profile_index: idx,
                            profile: profile.clone(),
                            agent: Some(agent),
                            report: Some(report),
                            amount: t - prev,
                        });
                    }
                }
                previous = Some(t);
            }
        }
        Ok(found)
    })?;
    Ok(AuditReport::new(
        Property::Monotonicity,
        rule.label(),
        profiles.len(),
        violations,
    ))
}
