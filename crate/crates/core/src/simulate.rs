//! Expected Max-Delay and Sum-Delay under i.i.d. priors.
//!
//! Samples are processed in fixed-size chunks, each with its own ChaCha
//! stream, so results depend only on the seed and never on the number of
//! worker threads. Profiles and GCSOD groupings come from separate streams:
//! two configurations that differ only in the mechanism see the same
//! profiles.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::DistributionSpec;
use crate::lowerbound::{max_delay_lower_bound, sum_delay_lower_bound};
use crate::mechanisms::{
    csd_delays_sorted, deadline_of_sorted, gcsod_delays_sorted, gcsod_expected_delays_sorted,
    DelayScratch, Mechanism, DEFAULT_ENUMERATION_CAP,
};
use crate::rng::substream;
use crate::{Error, Result};

pub const DEFAULT_SAMPLES: usize = 1_000_000;
/// Samples per independently seeded chunk.
pub const CHUNK_SIZE: usize = 8192;
/// Largest `n` for which the table enumerates GCSOD groupings exactly.
pub const TABLE_EXACT_GROUPING_MAX_N: usize = 5;
/// Agent counts in the comparison table.
pub const TABLE_AGENT_COUNTS: [usize; 4] = [1, 2, 5, 10];

const PROFILE_STREAM: u64 = 0;
const GROUPING_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulationMode {
    /// One sampled grouping per profile for GCSOD.
    MonteCarlo,
    /// Exact expectation over all groupings for GCSOD; profiles are still
    /// sampled.
    ExactGrouping,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub mechanism: Mechanism,
    pub spec: DistributionSpec,
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    pub mode: SimulationMode,
}

impl SimulationConfig {
    /// Monte Carlo with the default sample count and seed 0.
    pub fn new(mechanism: Mechanism, spec: DistributionSpec, n: usize) -> Self {
        Self {
            mechanism,
            spec,
            n,
            samples: DEFAULT_SAMPLES,
            seed: 0,
            mode: SimulationMode::MonteCarlo,
        }
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_mode(mut self, mode: SimulationMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("need at least one agent".into()));
        }
        if self.samples == 0 {
            return Err(Error::InvalidArgument("need at least one sample".into()));
        }
        if self.mode == SimulationMode::ExactGrouping {
            if self.mechanism != Mechanism::Gcsod {
                return Err(Error::InvalidArgument(
                    "exact grouping mode only applies to GCSOD".into(),
                ));
            }
            if self.n > DEFAULT_ENUMERATION_CAP {
                return Err(Error::EnumerationCap {
                    agents: self.n,
                    cap: DEFAULT_ENUMERATION_CAP,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub expected_max_delay: f64,
    pub expected_sum_delay: f64,
    pub standard_error_max: f64,
    pub standard_error_sum: f64,
    pub samples_used: usize,
    pub seed: u64,
}

/// Running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1.0;
        let d = x - self.mean;
        self.mean += d / self.count;
        self.m2 += d * (x - self.mean);
    }

    fn merge(a: Self, b: Self) -> Self {
        if a.count == 0.0 {
            return b;
        }
        if b.count == 0.0 {
            return a;
        }
        let count = a.count + b.count;
        let d = b.mean - a.mean;
        Self {
            count,
            mean: a.mean + d * b.count / count,
            m2: a.m2 + b.m2 + d * d * a.count * b.count / count,
        }
    }

    fn standard_error(&self) -> f64 {
        if self.count < 2.0 {
            0.0
        } else {
            (self.m2 / (self.count - 1.0) / self.count).sqrt()
        }
    }
}

/// Merges in a fixed balanced tree so the result is independent of how the
/// chunks were scheduled.
fn pairwise(mut items: Vec<(Moments, Moments)>) -> (Moments, Moments) {
    while items.len() > 1 {
        items = items
            .chunks(2)
            .map(|pair| match pair {
                [a, b] => (Moments::merge(a.0, b.0), Moments::merge(a.1, b.1)),
                [a] => *a,
                _ => unreachable!(),
            })
            .collect();
    }
    items.pop().unwrap_or_default()
}

fn run_chunk(config: &SimulationConfig, chunk: usize, len: usize) -> (Moments, Moments) {
    let mut profiles = substream(config.seed, PROFILE_STREAM, chunk as u64);
    let mut groupings = substream(config.seed, GROUPING_STREAM, chunk as u64);
    let mut values = vec![0.0; config.n];
    let mut scratch = DelayScratch::default();
    let (mut max, mut sum) = (Moments::default(), Moments::default());
    let mask_bits = if config.n >= 64 { u64::MAX } else { (1u64 << config.n) - 1 };

    for _ in 0..len {
        for v in values.iter_mut() {
            *v = config.spec.draw(&mut profiles);
        }
        values.sort_unstable_by(|a, b| b.total_cmp(a));
        let (m, s) = match (config.mechanism, config.mode) {
            (Mechanism::Cs, _) => csd_delays_sorted(&values, 1.0),
            (Mechanism::Csd { deadline }, _) => csd_delays_sorted(&values, deadline),
            (Mechanism::Csod, _) => csd_delays_sorted(&values, deadline_of_sorted(&values).t_star),
            (Mechanism::Gcsod, SimulationMode::ExactGrouping) => {
                gcsod_expected_delays_sorted(&values, &mut scratch)
            }
            (Mechanism::Gcsod, SimulationMode::MonteCarlo) => {
                let mask = groupings.random::<u64>() & mask_bits;
                gcsod_delays_sorted(&values, mask, &mut scratch)
            }
        };
        max.push(m);
        sum.push(s);
    }
    (max, sum)
}

/// Estimates expected Max-Delay and Sum-Delay by sampling profiles.
pub fn estimate(config: &SimulationConfig) -> Result<SimulationReport> {
    config.validate()?;
    if config.mechanism == Mechanism::Gcsod && config.n > 63 {
        return Err(Error::InvalidArgument("GCSOD simulation supports at most 63 agents".into()));
    }
    let chunks = config.samples.div_ceil(CHUNK_SIZE);
    let partial: Vec<(Moments, Moments)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK_SIZE.min(config.samples - c * CHUNK_SIZE);
            run_chunk(config, c, len)
        })
        .collect();
    let (max, sum) = pairwise(partial);
    Ok(SimulationReport {
        expected_max_delay: max.mean,
        expected_sum_delay: sum.mean,
        standard_error_max: max.standard_error(),
        standard_error_sum: sum.standard_error(),
        samples_used: config.samples,
        seed: config.seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    /// Standard error; `None` for deterministic values such as LP bounds.
    pub stderr: Option<f64>,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, stderr: None }
    }
}

/// One row of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub distribution: DistributionSpec,
    pub n: usize,
    pub gcsod_max: Estimate,
    pub cs_max: Estimate,
    pub lower_bound_max: Estimate,
    pub gcsod_sum: Estimate,
    pub cs_sum: Estimate,
    pub lower_bound_sum: Estimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Column {
    #[serde(rename = "GCSOD")]
    Gcsod,
    #[serde(rename = "CS")]
    Cs,
    #[serde(rename = "LB")]
    LowerBound,
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Column::Gcsod => "GCSOD",
            Column::Cs => "CS",
            Column::LowerBound => "LB",
        })
    }
}

impl FromStr for Column {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "GCSOD" => Ok(Column::Gcsod),
            "CS" => Ok(Column::Cs),
            "LB" => Ok(Column::LowerBound),
            other => Err(Error::InvalidArgument(format!("unknown table column {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Max,
    Sum,
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::Max => "max",
            Objective::Sum => "sum",
        })
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "max" => Ok(Objective::Max),
            "sum" => Ok(Objective::Sum),
            other => Err(Error::InvalidArgument(format!("unknown objective {other:?}"))),
        }
    }
}

/// One table cell in long form, matching a CSV line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRecord {
    pub distribution: DistributionSpec,
    pub n: usize,
    pub mechanism: Column,
    pub objective: Objective,
    pub value: f64,
    pub stderr: Option<f64>,
}

impl TableRow {
    pub fn get(&self, column: Column, objective: Objective) -> Estimate {
        match (column, objective) {
            (Column::Gcsod, Objective::Max) => self.gcsod_max,
            (Column::Cs, Objective::Max) => self.cs_max,
            (Column::LowerBound, Objective::Max) => self.lower_bound_max,
            (Column::Gcsod, Objective::Sum) => self.gcsod_sum,
            (Column::Cs, Objective::Sum) => self.cs_sum,
            (Column::LowerBound, Objective::Sum) => self.lower_bound_sum,
        }
    }

    pub fn records(&self) -> Vec<TableRecord> {
        let mut out = Vec::with_capacity(6);
        for objective in [Objective::Max, Objective::Sum] {
            for column in [Column::Gcsod, Column::Cs, Column::LowerBound] {
                let e = self.get(column, objective);
                out.push(TableRecord {
                    distribution: self.distribution,
                    n: self.n,
                    mechanism: column,
                    objective,
                    value: e.value,
                    stderr: e.stderr,
                });
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableOptions {
    pub h: usize,
    pub samples: usize,
    pub seed: u64,
    /// GCSOD rows with `n` up to this use exact grouping enumeration;
    /// larger rows sample one grouping per profile.
    pub exact_grouping_max_n: usize,
}

impl TableOptions {
    pub fn new(h: usize, samples: usize, seed: u64) -> Self {
        Self {
            h,
            samples,
            seed,
            exact_grouping_max_n: TABLE_EXACT_GROUPING_MAX_N,
        }
    }
}

/// Computes one table row. CS and GCSOD share the sampled profiles.
pub fn table_row(spec: DistributionSpec, n: usize, options: &TableOptions) -> Result<TableRow> {
    let base = SimulationConfig::new(Mechanism::Cs, spec, n)
        .with_samples(options.samples)
        .with_seed(options.seed);
    let cs = estimate(&base)?;
    let mode = if n <= options.exact_grouping_max_n {
        SimulationMode::ExactGrouping
    } else {
        SimulationMode::MonteCarlo
    };
    let gcsod = estimate(&SimulationConfig {
        mechanism: Mechanism::Gcsod,
        mode,
        ..base
    })?;
    Ok(TableRow {
        distribution: spec,
        n,
        gcsod_max: Estimate {
            value: gcsod.expected_max_delay,
            stderr: Some(gcsod.standard_error_max),
        },
        cs_max: Estimate {
            value: cs.expected_max_delay,
            stderr: Some(cs.standard_error_max),
        },
        lower_bound_max: Estimate::exact(max_delay_lower_bound(&spec, n, options.h)?),
        gcsod_sum: Estimate {
            value: gcsod.expected_sum_delay,
            stderr: Some(gcsod.standard_error_sum),
        },
        cs_sum: Estimate {
            value: cs.expected_sum_delay,
            stderr: Some(cs.standard_error_sum),
        },
        lower_bound_sum: Estimate::exact(sum_delay_lower_bound(&spec, n, options.h)?),
    })
}

/// All twelve rows: three priors times four agent counts.
pub fn reproduce_table(h: usize, samples: usize, seed: u64) -> Result<Vec<TableRow>> {
    reproduce_table_with(&TableOptions::new(h, samples, seed))
}

pub fn reproduce_table_with(options: &TableOptions) -> Result<Vec<TableRow>> {
    let mut rows = Vec::with_capacity(12);
    for spec in DistributionSpec::table_priors() {
        for n in TABLE_AGENT_COUNTS {
            rows.push(table_row(spec, n, options)?);
        }
    }
    Ok(rows)
}

#[derive(Serialize, Deserialize)]
struct CsvLine {
    distribution: String,
    n: usize,
    mechanism: Column,
    objective: Objective,
    value: f64,
    stderr: Option<f64>,
}

/// Writes records as CSV, preceded by a `# seed=<seed>` comment line.
pub fn write_records_csv<W: Write>(records: &[TableRecord], seed: Option<u64>, mut out: W) -> Result<()> {
    if let Some(seed) = seed {
        writeln!(out, "# seed={seed}").map_err(|e| Error::Serialization(e.to_string()))?;
    }
    let mut writer = csv::Writer::from_writer(out);
    for r in records {
        writer.serialize(CsvLine {
            distribution: r.distribution.to_string(),
            n: r.n,
            mechanism: r.mechanism,
            objective: r.objective,
            value: r.value,
            stderr: r.stderr,
        })?;
    }
    writer.flush().map_err(|e| Error::Serialization(e.to_string()))?;
    Ok(())
}

pub fn write_table_csv<W: Write>(rows: &[TableRow], seed: u64, out: W) -> Result<()> {
    let records: Vec<TableRecord> = rows.iter().flat_map(TableRow::records).collect();
    write_records_csv(&records, Some(seed), out)
}

/// Reads records written by [`write_records_csv`]; `#` lines are skipped.
pub fn read_records_csv<R: Read>(input: R) -> Result<Vec<TableRecord>> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    reader
        .deserialize::<CsvLine>()
        .map(|line| {
            let line = line?;
            Ok(TableRecord {
                distribution: line.distribution.parse()?,
                n: line.n,
                mechanism: line.mechanism,
                objective: line.objective,
                value: line.value,
                stderr: line.stderr,
            })
        })
        .collect()
}
