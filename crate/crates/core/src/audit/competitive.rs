use serde::{Deserialize, Serialize};

use crate::mechanisms::{
    csod_allocate, gcsod_expected_delays_sorted, optimal_deadline, DelayScratch, TypeProfile,
    DEFAULT_ENUMERATION_CAP,
};
use crate::{Error, Result};

/// Bound on E[GCSOD max delay] / CSOD max delay.
pub const MAX_DELAY_BOUND: f64 = 4.0;
/// Bound on E[GCSOD sum delay] / CSOD sum delay.
pub const SUM_DELAY_BOUND: f64 = 8.0;

/// GCSOD against CSOD on one profile, with the expectation taken over the
/// random groupings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompetitiveReport {
    pub profile: TypeProfile,
    pub ratio_max: Option<f64>,
    pub ratio_sum: Option<f64>,
    pub assumptions_hold: bool,
    pub bound: f64,
    /// False only when the assumptions hold and the ratio exceeds `bound`.
    pub within_bound: bool,
}

fn ratio(numerator: f64, denominator: f64) -> f64 {
    if denominator > 0.0 {
        numerator / denominator
    } else if numerator == 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

fn expected_delays(profile: &TypeProfile) -> Result<(f64, f64)> {
    if profile.len() > DEFAULT_ENUMERATION_CAP {
        return Err(Error::EnumerationCap {
            agents: profile.len(),
            cap: DEFAULT_ENUMERATION_CAP,
        });
    }
    let sorted = profile.sorted_descending();
    Ok(gcsod_expected_delays_sorted(&sorted, &mut DelayScratch::default()))
}

fn values_at_most_one(profile: &TypeProfile) -> bool {
    profile.values().iter().all(|&v| v <= 1.0)
}

/// Max-delay competitiveness. The assumptions are `v_i <= 1` for every
/// agent and at least one agent outside CSOD's cost-sharing set.
pub fn check_competitive_max(profile: &TypeProfile) -> Result<CompetitiveReport> {
    let (gcsod_max, _) = expected_delays(profile)?;
    let k_star = optimal_deadline(profile).k_star;
    let assumptions_hold = values_at_most_one(profile) && k_star < profile.len();
    let r = ratio(gcsod_max, csod_allocate(profile).max_delay());
    Ok(CompetitiveReport {
        profile: profile.clone(),
        ratio_max: Some(r),
        ratio_sum: None,
        assumptions_hold,
        bound: MAX_DELAY_BOUND,
        within_bound: !assumptions_hold || r <= MAX_DELAY_BOUND,
    })
}

/// Sum-delay competitiveness. The assumptions are `v_i <= 1` for every
/// agent and at most half the agents sharing the cost under CSOD.
pub fn check_competitive_sum(profile: &TypeProfile) -> Result<CompetitiveReport> {
    let (_, gcsod_sum) = expected_delays(profile)?;
    let k_star = optimal_deadline(profile).k_star;
    let assumptions_hold = values_at_most_one(profile) && 2 * k_star <= profile.len();
    let r = ratio(gcsod_sum, csod_allocate(profile).sum_delay());
    Ok(CompetitiveReport {
        profile: profile.clone(),
        ratio_max: None,
        ratio_sum: Some(r),
        assumptions_hold,
        bound: SUM_DELAY_BOUND,
        within_bound: !assumptions_hold || r <= SUM_DELAY_BOUND,
    })
}
