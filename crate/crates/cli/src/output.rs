//! Serializable results of each subcommand, and their text and CSV forms.

use std::fmt::Write as _;

use bugshare_core::audit::AuditReport;
use bugshare_core::simulate::{write_table_csv, Column, Objective, TableRow};
use bugshare_core::{DistributionSpec, Grouping, Mechanism, SimulationConfig, SimulationReport, TypeProfile};
use serde::{Deserialize, Serialize};

fn csv_string<T: Serialize>(rows: &[T]) -> Result<String, String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| e.to_string())?;
    }
    String::from_utf8(w.into_inner().map_err(|e| e.to_string())?).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationOutput {
    pub mechanism: Mechanism,
    pub profile: TypeProfile,
    /// Deadline applied by CS, CSD or CSOD.
    pub deadline: Option<f64>,
    pub k_star: Option<usize>,
    pub grouping: Option<Grouping>,
    pub seed: Option<u64>,
    /// Expected over groupings when GCSOD runs without a grouping or seed.
    pub expected: bool,
    pub times: Vec<f64>,
    pub payments: Vec<f64>,
    pub sold: Option<bool>,
    pub max_delay: f64,
    pub sum_delay: f64,
}

#[derive(Serialize)]
struct AgentLine {
    agent: usize,
    value: f64,
    time: f64,
    payment: f64,
}

impl AllocationOutput {
    pub fn text(&self) -> String {
        let mut s = format!("mechanism: {}\nprofile: {}\n", self.mechanism, self.profile);
        if let Some(d) = self.deadline {
            let _ = writeln!(s, "deadline: {d}");
        }
        if let Some(k) = self.k_star {
            let _ = writeln!(s, "k*: {k}");
        }
        if let Some(g) = &self.grouping {
            let _ = writeln!(s, "grouping: {g}");
        }
        if let Some(seed) = self.seed {
            let _ = writeln!(s, "seed: {seed}");
        }
        match self.sold {
            Some(sold) => {
                let _ = writeln!(s, "sold: {sold}");
            }
            None => s.push_str("expected over all groupings\n"),
        }
        s.push_str("agent  value      time       payment\n");
        for (i, v) in self.profile.values().iter().enumerate() {
            let _ = writeln!(s, "{i:<6} {v:<10.6} {:<10.6} {:.6}", self.times[i], self.payments[i]);
        }
        let _ = write!(s, "max delay: {}\nsum delay: {}", self.max_delay, self.sum_delay);
        s
    }

    pub fn csv(&self) -> Result<String, String> {
        let lines: Vec<AgentLine> = self
            .profile
            .values()
            .iter()
            .enumerate()
            .map(|(i, &value)| AgentLine {
                agent: i,
                value,
                time: self.times[i],
                payment: self.payments[i],
            })
            .collect();
        csv_string(&lines)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditOutput {
    pub mechanism: Mechanism,
    /// Seed of the random profiles, if any were drawn.
    pub seed: Option<u64>,
    pub profiles: usize,
    pub reports: Vec<AuditReport>,
    pub passed: bool,
}

#[derive(Serialize)]
struct ViolationLine {
    property: String,
    profile_index: usize,
    profile: String,
    agent: Option<usize>,
    report: Option<f64>,
    amount: f64,
}

impl AuditOutput {
    pub fn text(&self) -> String {
        let mut s = format!("mechanism: {}\nprofiles: {}\n", self.mechanism, self.profiles);
        if let Some(seed) = self.seed {
            let _ = writeln!(s, "seed: {seed}");
        }
        for r in &self.reports {
            let verdict = if r.passed { "pass" } else { "FAIL" };
            let _ = writeln!(s, "{}: {verdict} ({} violations)", r.property, r.violations.len());
            for v in &r.violations {
                let _ = write!(s, "  profile #{} ({})", v.profile_index, v.profile);
                if let Some(a) = v.agent {
                    let _ = write!(s, " agent {a}");
                }
                if let Some(x) = v.report {
                    let _ = write!(s, " at {x}");
                }
                let _ = writeln!(s, ": {}", v.amount);
            }
        }
        s.push_str(if self.passed { "all checks passed" } else { "violations found" });
        s
    }

    pub fn csv(&self) -> Result<String, String> {
        let lines: Vec<ViolationLine> = self
            .reports
            .iter()
            .flat_map(|r| {
                r.violations.iter().map(move |v| ViolationLine {
                    property: r.property.to_string(),
                    profile_index: v.profile_index,
                    profile: v.profile.to_string(),
                    agent: v.agent,
                    report: v.report,
                    amount: v.amount,
                })
            })
            .collect();
        if lines.is_empty() {
            return Ok("property,profile_index,profile,agent,report,amount\n".into());
        }
        csv_string(&lines)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaEntry {
    pub k: u64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaOutput {
    pub kmax: u64,
    pub values: Vec<AlphaEntry>,
    pub bound: f64,
    pub bound_holds: bool,
}

impl AlphaOutput {
    pub fn verdict(&self) -> &'static str {
        if self.bound_holds {
            "bound holds"
        } else {
            "bound violated"
        }
    }

    pub fn text(&self) -> String {
        let mut s = String::from("k     alpha(k)\n");
        for e in &self.values {
            let _ = writeln!(s, "{:<5} {}", e.k, e.alpha);
        }
        let _ = write!(s, "alpha(k) < {} for k <= {}: {}", self.bound, self.kmax, self.verdict());
        s
    }

    pub fn csv(&self) -> Result<String, String> {
        csv_string(&self.values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundOutput {
    pub distribution: DistributionSpec,
    pub n: usize,
    pub h: usize,
    pub max_delay: Option<f64>,
    pub sum_delay: Option<f64>,
}

#[derive(Serialize)]
struct BoundLine {
    distribution: String,
    n: usize,
    h: usize,
    objective: Objective,
    value: f64,
}

impl LowerBoundOutput {
    fn lines(&self) -> Vec<BoundLine> {
        [(Objective::Max, self.max_delay), (Objective::Sum, self.sum_delay)]
            .into_iter()
            .filter_map(|(objective, v)| {
                v.map(|value| BoundLine {
                    distribution: self.distribution.to_string(),
                    n: self.n,
                    h: self.h,
                    objective,
                    value,
                })
            })
            .collect()
    }

    pub fn text(&self) -> String {
        let mut s = format!("distribution: {}\nn: {}\nH: {}", self.distribution, self.n, self.h);
        for l in self.lines() {
            let _ = write!(s, "\n{}-delay lower bound: {}", l.objective, l.value);
        }
        s
    }

    pub fn csv(&self) -> Result<String, String> {
        csv_string(&self.lines())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateOutput {
    pub config: SimulationConfig,
    pub report: SimulationReport,
}

#[derive(Serialize)]
struct SimulateLine {
    mechanism: String,
    distribution: String,
    n: usize,
    samples: usize,
    seed: u64,
    expected_max_delay: f64,
    standard_error_max: f64,
    expected_sum_delay: f64,
    standard_error_sum: f64,
}

impl SimulateOutput {
    pub fn text(&self) -> String {
        let (c, r) = (&self.config, &self.report);
        format!(
            "mechanism: {}\ndistribution: {}\nn: {}\nsamples: {}\nseed: {}\n\
             expected max delay: {:.6} (se {:.6})\nexpected sum delay: {:.6} (se {:.6})",
            c.mechanism,
            c.spec,
            c.n,
            r.samples_used,
            r.seed,
            r.expected_max_delay,
            r.standard_error_max,
            r.expected_sum_delay,
            r.standard_error_sum
        )
    }

    pub fn csv(&self) -> Result<String, String> {
        let (c, r) = (&self.config, &self.report);
        csv_string(&[SimulateLine {
            mechanism: c.mechanism.to_string(),
            distribution: c.spec.to_string(),
            n: c.n,
            samples: r.samples_used,
            seed: r.seed,
            expected_max_delay: r.expected_max_delay,
            standard_error_max: r.standard_error_max,
            expected_sum_delay: r.expected_sum_delay,
            standard_error_sum: r.standard_error_sum,
        }])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableOutput {
    pub seed: u64,
    pub h: usize,
    pub samples: usize,
    pub rows: Vec<TableRow>,
}

impl TableOutput {
    pub fn text(&self) -> String {
        let mut s = format!(
            "seed={} H={} samples={}\n{:<18} {:>7} {:>7} {:>7} | {:>7} {:>7} {:>7}\n",
            self.seed, self.h, self.samples, "", "GCSOD", "CS", "LB", "GCSOD", "CS", "LB"
        );
        for row in &self.rows {
            let label = format!("{}, n={}", row.distribution, row.n);
            let _ = write!(s, "{label:<18}");
            for objective in [Objective::Max, Objective::Sum] {
                if objective == Objective::Sum {
                    s.push_str(" |");
                }
                for column in [Column::Gcsod, Column::Cs, Column::LowerBound] {
                    let _ = write!(s, " {:>7.4}", row.get(column, objective).value);
                }
            }
            s.push('\n');
        }
        s.pop();
        s
    }

    pub fn csv(&self) -> Result<String, String> {
        let mut buf = Vec::new();
        write_table_csv(&self.rows, self.seed, &mut buf).map_err(|e| e.to_string())?;
        String::from_utf8(buf).map_err(|e| e.to_string())
    }
}
