//! Group-based cost sharing with optimal deadline (GCSOD).
//!
//! Agents are split into a left and a right group by fair coin flips. Each
//! group runs cost sharing with a deadline, using the optimal deadline of the
//! *other* group. The group with the earlier optimal deadline succeeds; ties
//! below 1 go to the left group.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{deadline_of_sorted, max_group_size, DeadlineResult, ExpectedOutcome, Outcome, TypeProfile};
use crate::{rng, Error, Result};

/// Largest profile for which expectations are computed by enumerating all
/// `2^n` groupings.
pub const DEFAULT_ENUMERATION_CAP: usize = 16;

// Masks are u64 bit sets.
const MAX_ENUMERABLE: usize = 62;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

/// One coin flip per agent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Grouping {
    sides: Vec<Side>,
}

impl Grouping {
    pub fn new(sides: Vec<Side>) -> Self {
        Self { sides }
    }

    /// Agent `i` goes right iff bit `i` of `mask` is set.
    pub fn from_mask(n: usize, mask: u64) -> Self {
        Self {
            sides: (0..n)
                .map(|i| if mask >> i & 1 == 1 { Side::Right } else { Side::Left })
                .collect(),
        }
    }

    pub fn sides(&self) -> &[Side] {
        &self.sides
    }

    pub fn len(&self) -> usize {
        self.sides.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sides.is_empty()
    }
}

impl FromStr for Grouping {
    type Err = Error;

    /// Parses a string of `L`/`R` labels, e.g. `LLRR`. Commas are ignored.
    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .filter(|c| !c.is_whitespace() && *c != ',')
            .map(|c| match c.to_ascii_uppercase() {
                'L' => Ok(Side::Left),
                'R' => Ok(Side::Right),
                other => Err(Error::InvalidArgument(format!(
                    "grouping label {other:?} is not L or R"
                ))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Grouping::new)
    }
}

impl fmt::Display for Grouping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for side in &self.sides {
            f.write_str(match side {
                Side::Left => "L",
                Side::Right => "R",
            })?;
        }
        Ok(())
    }
}

/// Exact expectation of GCSOD over all groupings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcsodExpectation {
    pub expected_times: Vec<f64>,
    pub expected_payments: Vec<f64>,
    /// Expectation of the realized max delay (not the max of expected times).
    pub expected_max_delay: f64,
    pub expected_sum_delay: f64,
}

impl GcsodExpectation {
    pub fn to_expected(&self) -> ExpectedOutcome {
        ExpectedOutcome {
            times: self.expected_times.clone(),
            payments: self.expected_payments.clone(),
        }
    }
}

/// Which group succeeds, given both groups' optimal deadlines.
fn winner(left: &DeadlineResult, right: &DeadlineResult) -> Option<Side> {
    let (dl, dr) = (left.t_star, right.t_star);
    if dl < dr || (dl == dr && dl < 1.0) {
        Some(Side::Left)
    } else if dr < dl {
        Some(Side::Right)
    } else if left.k_star > 0 {
        Some(Side::Left)
    } else if right.k_star > 0 {
        Some(Side::Right)
    } else {
        None
    }
}

#[derive(Default)]
struct Scratch {
    left_order: Vec<usize>,
    right_order: Vec<usize>,
    left_values: Vec<f64>,
    right_values: Vec<f64>,
}

/// Realizes GCSOD into `times`/`payments` for the split given by `is_right`.
/// `order` lists all agents by descending value. Returns whether the bug
/// was sold.
fn realize(
    values: &[f64],
    order: &[usize],
    is_right: impl Fn(usize) -> bool,
    scratch: &mut Scratch,
    times: &mut [f64],
    payments: &mut [f64],
) -> bool {
    scratch.left_order.clear();
    scratch.right_order.clear();
    for &agent in order {
        if is_right(agent) {
            scratch.right_order.push(agent);
        } else {
            scratch.left_order.push(agent);
        }
    }
    scratch.left_values.clear();
    scratch.left_values.extend(scratch.left_order.iter().map(|&i| values[i]));
    scratch.right_values.clear();
    scratch.right_values.extend(scratch.right_order.iter().map(|&i| values[i]));

    let left = deadline_of_sorted(&scratch.left_values);
    let right = deadline_of_sorted(&scratch.right_values);

    let (win_order, win_values, lose_order, win_deadline, lose_deadline) = match winner(&left, &right) {
        Some(Side::Left) => (
            &scratch.left_order,
            &scratch.left_values,
            &scratch.right_order,
            right.t_star,
            left.t_star,
        ),
        Some(Side::Right) => (
            &scratch.right_order,
            &scratch.right_values,
            &scratch.left_order,
            left.t_star,
            right.t_star,
        ),
        None => {
            times.fill(1.0);
            payments.fill(0.0);
            return false;
        }
    };

    // The winning group faces the loser's deadline, which is no earlier than
    // its own optimal one, so some group size qualifies.
    let k = max_group_size(win_values, win_deadline);
    debug_assert!(k >= 1);
    let share = 1.0 / k as f64;
    for (rank, &agent) in win_order.iter().enumerate() {
        if rank < k {
            times[agent] = 0.0;
            payments[agent] = share;
        } else {
            times[agent] = win_deadline;
            payments[agent] = 0.0;
        }
    }
    for &agent in lose_order {
        times[agent] = lose_deadline;
        payments[agent] = 0.0;
    }
    true
}

/// GCSOD for a fixed grouping.
pub fn gcsod_allocate(profile: &TypeProfile, grouping: &Grouping) -> Result<Outcome> {
    let n = profile.len();
    if grouping.len() != n {
        return Err(Error::GroupingMismatch {
            grouping: grouping.len(),
            agents: n,
        });
    }
    let order = profile.descending_order();
    let mut times = vec![1.0; n];
    let mut payments = vec![0.0; n];
    let sides = grouping.sides();
    let sold = realize(
        profile.values(),
        &order,
        |i| sides[i] == Side::Right,
        &mut Scratch::default(),
        &mut times,
        &mut payments,
    );
    Ok(Outcome { times, payments, sold })
}

/// GCSOD with the coin flips drawn from a stream seeded by `seed`.
pub fn gcsod_sample(profile: &TypeProfile, seed: u64) -> Outcome {
    let mut rng = rng::seeded(seed);
    let sides = (0..profile.len())
        .map(|_| if rng.random::<bool>() { Side::Right } else { Side::Left })
        .collect();
    gcsod_allocate(profile, &Grouping::new(sides)).expect("grouping length matches by construction")
}

/// Exact expectation over all `2^n` groupings, with the default cap.
pub fn gcsod_expected(profile: &TypeProfile) -> Result<GcsodExpectation> {
    gcsod_expected_with_cap(profile, DEFAULT_ENUMERATION_CAP)
}

pub fn gcsod_expected_with_cap(profile: &TypeProfile, cap: usize) -> Result<GcsodExpectation> {
    let n = profile.len();
    if n > cap.min(MAX_ENUMERABLE) {
        return Err(Error::EnumerationCap {
            agents: n,
            cap: cap.min(MAX_ENUMERABLE),
        });
    }
    let order = profile.descending_order();
    let mut scratch = Scratch::default();
    let mut times = vec![1.0; n];
    let mut payments = vec![0.0; n];
    let mut sum_times = vec![0.0; n];
    let mut sum_payments = vec![0.0; n];
    let (mut sum_max, mut sum_sum) = (0.0, 0.0);

    for mask in 0..(1u64 << n) {
        realize(
            profile.values(),
            &order,
            |i| mask >> i & 1 == 1,
            &mut scratch,
            &mut times,
            &mut payments,
        );
        for i in 0..n {
            sum_times[i] += times[i];
            sum_payments[i] += payments[i];
        }
        sum_max += times.iter().copied().fold(0.0, f64::max);
        sum_sum += times.iter().sum::<f64>();
    }

    let weight = 0.5f64.powi(n as i32);
    Ok(GcsodExpectation {
        expected_times: sum_times.into_iter().map(|t| t * weight).collect(),
        expected_payments: sum_payments.into_iter().map(|p| p * weight).collect(),
        expected_max_delay: sum_max * weight,
        expected_sum_delay: sum_sum * weight,
    })
}

/// Reusable buffers for the delay-only fast path.
#[derive(Default)]
pub(crate) struct DelayScratch {
    left: Vec<f64>,
    right: Vec<f64>,
}

/// Max and sum delay of one GCSOD realization over values sorted in
/// descending order; bit `j` of `mask` sends sorted position `j` right.
/// Delays do not depend on agent identities, only on the split values.
pub(crate) fn gcsod_delays_sorted(sorted_desc: &[f64], mask: u64, scratch: &mut DelayScratch) -> (f64, f64) {
    scratch.left.clear();
    scratch.right.clear();
    for (j, &v) in sorted_desc.iter().enumerate() {
        if mask >> j & 1 == 1 {
            scratch.right.push(v);
        } else {
            scratch.left.push(v);
        }
    }
    let left = deadline_of_sorted(&scratch.left);
    let right = deadline_of_sorted(&scratch.right);
    let (win_values, lose_len, win_deadline, lose_deadline) = match winner(&left, &right) {
        Some(Side::Left) => (&scratch.left, scratch.right.len(), right.t_star, left.t_star),
        Some(Side::Right) => (&scratch.right, scratch.left.len(), left.t_star, right.t_star),
        None => return (1.0, sorted_desc.len() as f64),
    };
    let k = max_group_size(win_values, win_deadline);
    let free_winners = win_values.len() - k;
    let mut max = 0.0f64;
    if free_winners > 0 {
        max = max.max(win_deadline);
    }
    if lose_len > 0 {
        max = max.max(lose_deadline);
    }
    (max, free_winners as f64 * win_deadline + lose_len as f64 * lose_deadline)
}

/// Expected (max, sum) delay over all groupings of a sorted profile.
pub(crate) fn gcsod_expected_delays_sorted(sorted_desc: &[f64], scratch: &mut DelayScratch) -> (f64, f64) {
    let n = sorted_desc.len();
    debug_assert!(n <= MAX_ENUMERABLE);
    let (mut max, mut sum) = (0.0, 0.0);
    for mask in 0..(1u64 << n) {
        let (m, s) = gcsod_delays_sorted(sorted_desc, mask, scratch);
        max += m;
        sum += s;
    }
    let weight = 0.5f64.powi(n as i32);
    (max * weight, sum * weight)
}
