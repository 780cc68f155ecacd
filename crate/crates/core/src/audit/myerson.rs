use super::AllocationRule;
use crate::mechanisms::TypeProfile;
use crate::{Error, Result};

/// Payment implied by the allocation times alone:
/// `v (1 - t(v)) - integral_0^v (1 - t(z)) dz`, with the integral evaluated
/// by the midpoint rule on `grid_size` cells over `[0, v]`.
///
/// For a step-shaped `t`, the error is at most `v / grid_size` per jump.
pub fn myerson_payment<R: AllocationRule + ?Sized>(
    rule: &R,
    agent: usize,
    profile: &TypeProfile,
    grid_size: usize,
) -> Result<f64> {
    if agent >= profile.len() {
        return Err(Error::AgentOutOfRange {
            agent,
            agents: profile.len(),
        });
    }
    if grid_size == 0 {
        return Err(Error::InvalidArgument("integration grid needs at least one cell".into()));
    }
    let value = profile.value(agent);
    if value == 0.0 {
        return Ok(0.0);
    }
    let time_at = |z: f64| -> Result<f64> {
        Ok(rule.expected_outcome(&profile.with_report(agent, z)?)?.times[agent])
    };
    let cell = value / grid_size as f64;
    let mut integral = 0.0;
    for j in 0..grid_size {
        integral += (1.0 - time_at((j as f64 + 0.5) * cell)?) * cell;
    }
    Ok(value * (1.0 - time_at(value)?) - integral)
}
