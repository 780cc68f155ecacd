//! Linear programs bounding the expected delays of any strategy-proof,
//! individually rational mechanism that covers the cost in expectation.
//!
//! Agents are symmetric and their values are cut into `H` segments of width
//! `delta`. A mechanism is summarized by the allocation time `t_i` and
//! payment `p_i` of an agent reporting `i * delta`, plus the probability `C`
//! that the good is never sold. Strategy-proofness sandwiches each `p_i`
//! between two Riemann sums of `1 - t`, and budget balance ties the expected
//! payment to `(1 - C) / n`.

mod model;

use rayon::prelude::*;

use crate::distributions::{DistributionSpec, SegmentedDistribution};
use crate::{Error, Result};

pub use model::{
    solve_lp, solve_lp_primal, Constraint, LpModel, LpSolution, LpStatus, Sense, Variable, FEASIBILITY_TOLERANCE,
    OPTIMALITY_TOLERANCE,
};

/// Default number of segments.
pub const DEFAULT_SEGMENTS: usize = 100;

/// Index layout of the variables in [`build_common_constraints`]:
/// `t_0..t_H`, then `p_0..p_H`, then `C`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CommonVariables {
    pub h: usize,
}

impl CommonVariables {
    pub fn t(&self, i: usize) -> usize {
        i
    }

    pub fn p(&self, i: usize) -> usize {
        self.h + 1 + i
    }

    pub fn c(&self) -> usize {
        2 * self.h + 2
    }

    pub fn count(&self) -> usize {
        2 * self.h + 3
    }
}

/// The constraints every candidate mechanism satisfies, with no objective.
pub fn build_common_constraints(seg: &SegmentedDistribution, n: usize) -> Result<LpModel> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one agent".into()));
    }
    let h = seg.h;
    if h == 0 || seg.masses.len() != h {
        return Err(Error::InvalidArgument("segmented distribution needs H >= 1 masses".into()));
    }
    let vars = CommonVariables { h };
    let delta = seg.delta;
    let share = 1.0 / n as f64;

    let mut m = LpModel::new();
    for i in 0..=h {
        m.add_variable(format!("t_{i}"), 0.0, 1.0);
    }
    for i in 0..=h {
        m.add_variable(format!("p_{i}"), f64::NEG_INFINITY, f64::INFINITY);
    }
    m.add_variable("C", 0.0, 1.0);

    m.add_constraint("chain_0", vec![(vars.t(0), 1.0)], Sense::Le, 1.0)?;
    for i in 1..=h {
        m.add_constraint(
            format!("chain_{i}"),
            vec![(vars.t(i - 1), 1.0), (vars.t(i), -1.0)],
            Sense::Ge,
            0.0,
        )?;
    }

    // i*delta*(1 - t_i) - sum_{z in window} (1 - t_z)*delta has constant part
    // i*delta - i*delta = 0, leaving linear terms in t only.
    for i in 0..=h {
        let own = i as f64 * delta;
        let sandwich = |window: std::ops::Range<usize>| {
            let mut coef = vec![0.0; h + 1];
            coef[i] += own;
            for z in window {
                coef[z] -= delta;
            }
            let mut terms = vec![(vars.p(i), 1.0)];
            terms.extend(
                coef.iter()
                    .enumerate()
                    .filter(|(_, &a)| a != 0.0)
                    .map(|(z, &a)| (vars.t(z), a)),
            );
            terms
        };
        m.add_constraint(format!("pay_lo_{i}"), sandwich(1..i + 1), Sense::Ge, 0.0)?;
        m.add_constraint(format!("pay_hi_{i}"), sandwich(0..i), Sense::Le, 0.0)?;
    }

    let mut below: Vec<_> = (1..=h).map(|z| (vars.p(z - 1), seg.mass(z))).collect();
    below.push((vars.c(), share));
    m.add_constraint("budget_lo", below, Sense::Le, share)?;
    let mut above: Vec<_> = (1..=h).map(|z| (vars.p(z), seg.mass(z))).collect();
    above.push((vars.c(), share));
    m.add_constraint("budget_hi", above, Sense::Ge, share)?;

    let mut alloc: Vec<_> = (1..=h).map(|z| (vars.t(z - 1), seg.mass(z))).collect();
    alloc.push((vars.c(), -1.0));
    m.add_constraint("unsold", alloc, Sense::Ge, 0.0)?;

    m.add_constraint("C_lo", vec![(vars.c(), 1.0)], Sense::Ge, 0.0)?;
    m.add_constraint("C_hi", vec![(vars.c(), 1.0)], Sense::Le, 1.0)?;
    Ok(m)
}

fn minimize(mut model: LpModel, objective: Vec<(usize, f64)>) -> Result<f64> {
    model.set_objective(objective)?;
    let solution = solve_lp(&model)?;
    match solution.status {
        LpStatus::Optimal => Ok(solution.objective_value.expect("optimal has a value")),
        status => Err(Error::Lp(format!("bound LP is {status:?}"))),
    }
}

/// Per-agent minimum of `sum_z P(z) t_z` over the common constraints.
pub fn sum_delay_per_agent(seg: &SegmentedDistribution, n: usize) -> Result<f64> {
    let model = build_common_constraints(seg, n)?;
    let vars = CommonVariables { h: seg.h };
    minimize(model, (1..=seg.h).map(|z| (vars.t(z), seg.mass(z))).collect())
}

/// Lower bound on the expected Sum-Delay: `n` times the per-agent minimum.
pub fn sum_delay_lower_bound(spec: &DistributionSpec, n: usize, h: usize) -> Result<f64> {
    Ok(n as f64 * sum_delay_per_agent(&spec.discretize(h)?, n)?)
}

struct MaxDelayObjectives {
    /// `(i, objective)` for every `i` with positive prefix mass.
    objectives: Vec<(usize, Vec<(usize, f64)>)>,
}

impl MaxDelayObjectives {
    /// For each `i`, the max delay is at least the delay of an agent
    /// reporting at most `i * delta`, conditioned on such an agent existing,
    /// times the probability `1 - (tail mass)^n` that one does.
    fn new(seg: &SegmentedDistribution, n: usize) -> Self {
        let vars = CommonVariables { h: seg.h };
        let mut prefix = vec![0.0; seg.h + 1];
        for i in 1..=seg.h {
            prefix[i] = prefix[i - 1] + seg.mass(i);
        }
        let total = prefix[seg.h];
        let objectives = (1..=seg.h)
            .filter(|&i| prefix[i] > 0.0)
            .map(|i| {
                let tail = (total - prefix[i]).max(0.0);
                let weight = (1.0 - tail.powi(n as i32)) / prefix[i];
                (i, (1..=i).map(|z| (vars.t(z), seg.mass(z) * weight)).collect())
            })
            .collect();
        Self { objectives }
    }
}

fn evaluate(objective: &[(usize, f64)], values: &[f64]) -> f64 {
    objective.iter().map(|&(j, c)| c * values[j]).sum()
}

fn minimize_primal(mut model: LpModel, objective: Vec<(usize, f64)>) -> Result<(f64, Vec<f64>)> {
    model.set_objective(objective)?;
    let solution = solve_lp_primal(&model)?;
    match solution.status {
        LpStatus::Optimal => Ok((
            solution.objective_value.expect("optimal has a value"),
            solution.values,
        )),
        status => Err(Error::Lp(format!("bound LP is {status:?}"))),
    }
}

/// Every per-`i` minimum behind [`max_delay_lower_bound`], skipping `i`
/// whose prefix `[0, i * delta]` has no mass.
pub fn max_delay_candidates(seg: &SegmentedDistribution, n: usize) -> Result<Vec<(usize, f64)>> {
    let model = build_common_constraints(seg, n)?;
    MaxDelayObjectives::new(seg, n)
        .objectives
        .into_par_iter()
        .map(|(i, objective)| Ok((i, minimize(model.clone(), objective)?)))
        .collect()
}

/// Largest per-`i` minimum over a segmented prior.
///
/// All per-`i` programs share their constraints, so any solution found so
/// far is feasible for the rest and its objective bounds their minimum from
/// above. Programs whose bound cannot beat the current best are skipped.
/// The search itself uses uncertified solves, whose values can only err
/// upward; the winning program is then re-solved with a dual certificate,
/// so the result equals the maximum over [`max_delay_candidates`].
pub fn max_delay_bound_segmented(seg: &SegmentedDistribution, n: usize) -> Result<f64> {
    let model = build_common_constraints(seg, n)?;
    let mut objectives = MaxDelayObjectives::new(seg, n).objectives;
    // Larger prefixes tend to carry the maximum; solving them first prunes
    // more of the rest.
    objectives.reverse();
    let mut best: Option<(f64, Vec<(usize, f64)>)> = None;
    let mut solutions: Vec<Vec<f64>> = Vec::new();
    for (_, objective) in objectives {
        let floor = best.as_ref().map_or(0.0, |(v, _)| *v);
        let cap = solutions
            .iter()
            .map(|x| evaluate(&objective, x))
            .fold(f64::INFINITY, f64::min);
        if cap <= floor {
            continue;
        }
        let (value, x) = minimize_primal(model.clone(), objective.clone())?;
        if value > floor {
            best = Some((value, objective));
        }
        solutions.push(x);
    }
    match best {
        Some((_, objective)) => minimize(model, objective),
        None => Ok(0.0),
    }
}

/// Lower bound on the expected Max-Delay: the largest per-`i` minimum.
pub fn max_delay_lower_bound(spec: &DistributionSpec, n: usize, h: usize) -> Result<f64> {
    max_delay_bound_segmented(&spec.discretize(h)?, n)
}
