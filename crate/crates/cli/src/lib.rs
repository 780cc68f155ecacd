//! Command-line front end for `bugshare-core`.
//!
//! Exit codes: 0 on success, 1 on usage or input errors, 2 when an audit
//! finds violations.

pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use bugshare_core::audit::{
    check_bb, check_ir, check_monotonicity, check_sp, random_profiles, uniform_grid, verify_alpha_bound,
    alpha_table, AuditReport,
};
use bugshare_core::lowerbound::{max_delay_lower_bound, sum_delay_lower_bound, DEFAULT_SEGMENTS};
use bugshare_core::mechanisms::{gcsod_allocate, gcsod_expected, gcsod_sample, optimal_deadline};
use bugshare_core::simulate::{estimate, reproduce_table_with, TableOptions, DEFAULT_SAMPLES, TABLE_EXACT_GROUPING_MAX_N};
use bugshare_core::{
    DistributionSpec, Grouping, Mechanism, SimulationConfig, SimulationMode, TypeProfile,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use output::{
    AllocationOutput, AlphaEntry, AlphaOutput, AuditOutput, LowerBoundOutput, SimulateOutput, TableOutput,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VIOLATIONS: i32 = 2;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "BUGSHARE_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "bugshare",
    version,
    about = "Cost-sharing mechanisms for the timed release of security information"
)]
pub struct Cli {
    /// Output format; `table` defaults to csv, everything else to json.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Write to this file instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a mechanism on one profile.
    Allocate(AllocateArgs),
    /// Audit strategy-proofness, individual rationality, budget balance or monotonicity.
    Audit(AuditArgs),
    /// Tabulate alpha(k) and check alpha(k) < 4.
    Alpha(AlphaArgs),
    /// Solve the delay lower-bound linear programs.
    Lowerbound(LowerboundArgs),
    /// Estimate expected delays under a prior.
    Simulate(SimulateArgs),
    /// Reproduce the full comparison table.
    Table(TableArgs),
}

#[derive(Debug, Args)]
pub struct AllocateArgs {
    /// cs, csd:<deadline>, csod or gcsod.
    #[arg(long)]
    pub mechanism: Mechanism,
    /// Comma-separated valuations, e.g. 0.9,0.8,0.26,0.26.
    #[arg(long, allow_hyphen_values = true)]
    pub profile: TypeProfile,
    /// GCSOD grouping as a string of L and R, one per agent.
    #[arg(long, conflicts_with = "seed")]
    pub grouping: Option<Grouping>,
    /// Sample the GCSOD grouping from this seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PropertyArg {
    Sp,
    Ir,
    Bb,
    Mono,
    All,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[arg(long, value_enum, default_value = "all")]
    pub property: PropertyArg,
    #[arg(long)]
    pub mechanism: Mechanism,
    /// A profile to audit; repeatable.
    #[arg(long = "profile", allow_hyphen_values = true)]
    pub profiles: Vec<TypeProfile>,
    /// Also audit this many random profiles with values uniform on (0, 1].
    #[arg(long, default_value_t = 0)]
    pub random: usize,
    #[arg(long, default_value_t = 2)]
    pub min_agents: usize,
    #[arg(long, default_value_t = 6)]
    pub max_agents: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Evenly spaced misreports per agent (plus threshold points).
    #[arg(long, default_value_t = bugshare_core::audit::DEFAULT_GRID_POINTS)]
    pub grid_points: usize,
    /// Utility gain tolerated before a misreport counts as a violation.
    #[arg(long, default_value_t = bugshare_core::audit::EXACT_EPSILON)]
    pub epsilon: f64,
}

#[derive(Debug, Args)]
pub struct AlphaArgs {
    #[arg(long, default_value_t = 200)]
    pub kmax: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveArg {
    Max,
    Sum,
    Both,
}

#[derive(Debug, Args)]
pub struct LowerboundArgs {
    /// Prior, e.g. "U(0,1)" or "N(0.5,0.2)".
    #[arg(long)]
    pub dist: DistributionSpec,
    #[arg(long)]
    pub n: usize,
    /// Number of segments.
    #[arg(long = "H", default_value_t = DEFAULT_SEGMENTS)]
    pub h: usize,
    #[arg(long, value_enum, default_value = "both")]
    pub objective: ObjectiveArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    MonteCarlo,
    Exact,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub mechanism: Mechanism,
    #[arg(long)]
    pub dist: DistributionSpec,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// GCSOD only: enumerate groupings exactly instead of sampling one.
    #[arg(long, value_enum, default_value = "monte-carlo")]
    pub mode: ModeArg,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    pub samples: usize,
    #[arg(long = "H", default_value_t = DEFAULT_SEGMENTS)]
    pub h: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest n for which GCSOD groupings are enumerated exactly.
    #[arg(long, default_value_t = TABLE_EXACT_GROUPING_MAX_N)]
    pub exact_max_n: usize,
}

/// Rendered command result plus the exit code it implies.
struct Emitted {
    body: String,
    code: i32,
}

fn render<T: Serialize>(
    value: &T,
    format: Format,
    text: impl FnOnce(&T) -> String,
    csv: impl FnOnce(&T) -> Result<String, String>,
) -> Result<String, String> {
    match format {
        Format::Json => serde_json::to_string_pretty(value).map_err(|e| e.to_string()),
        Format::Text => Ok(text(value)),
        Format::Csv => csv(value),
    }
}

fn ok(body: String) -> Result<Emitted, String> {
    Ok(Emitted { body, code: EXIT_OK })
}

fn allocate(args: AllocateArgs, format: Format) -> Result<Emitted, String> {
    let profile = args.profile;
    let (outcome, expected, deadline, k_star, seed) = match (args.mechanism, args.grouping, args.seed) {
        (Mechanism::Gcsod, Some(g), _) => {
            let o = gcsod_allocate(&profile, &g).map_err(|e| e.to_string())?;
            (Some((o, Some(g))), None, None, None, None)
        }
        (Mechanism::Gcsod, None, Some(seed)) => {
            (Some((gcsod_sample(&profile, seed), None)), None, None, None, Some(seed))
        }
        (Mechanism::Gcsod, None, None) => {
            let e = gcsod_expected(&profile).map_err(|e| e.to_string())?;
            (None, Some(e), None, None, None)
        }
        (m, grouping, seed) => {
            if grouping.is_some() || seed.is_some() {
                return Err(format!("--grouping and --seed only apply to gcsod, not {m}"));
            }
            let (deadline, k) = match m {
                Mechanism::Csod => {
                    let d = optimal_deadline(&profile);
                    (d.t_star, d.k_star)
                }
                other => {
                    let d = other.fixed_deadline().unwrap_or(1.0);
                    let o = other.outcome(&profile).map_err(|e| e.to_string())?;
                    (d, o.payer_count())
                }
            };
            let o = m.outcome(&profile).map_err(|e| e.to_string())?;
            (Some((o, None)), None, Some(deadline), Some(k), None)
        }
    };
    let out = match (outcome, expected) {
        (Some((o, grouping)), _) => AllocationOutput {
            mechanism: args.mechanism,
            profile,
            deadline,
            k_star,
            grouping,
            seed,
            expected: false,
            max_delay: o.max_delay(),
            sum_delay: o.sum_delay(),
            sold: Some(o.sold),
            times: o.times,
            payments: o.payments,
        },
        (None, Some(e)) => AllocationOutput {
            mechanism: args.mechanism,
            profile,
            deadline: None,
            k_star: None,
            grouping: None,
            seed: None,
            expected: true,
            max_delay: e.expected_max_delay,
            sum_delay: e.expected_sum_delay,
            sold: None,
            times: e.expected_times,
            payments: e.expected_payments,
        },
        (None, None) => unreachable!("one branch always produces a result"),
    };
    ok(render(&out, format, AllocationOutput::text, AllocationOutput::csv)?)
}

fn audit(args: AuditArgs, format: Format) -> Result<Emitted, String> {
    let mut profiles = args.profiles;
    let seed = if args.random > 0 {
        profiles.extend(
            random_profiles(args.random, args.min_agents..=args.max_agents, args.seed).map_err(|e| e.to_string())?,
        );
        Some(args.seed)
    } else {
        None
    };
    if profiles.is_empty() {
        return Err("nothing to audit: pass --profile and/or --random".into());
    }
    let upper = profiles.iter().map(TypeProfile::max_value).fold(1.0, f64::max);
    let grid = uniform_grid(upper, args.grid_points);
    let m = &args.mechanism;
    let run = |p: PropertyArg| -> bugshare_core::Result<AuditReport> {
        match p {
            PropertyArg::Sp => check_sp(m, &profiles, &grid, args.epsilon),
            PropertyArg::Ir => check_ir(m, &profiles),
            PropertyArg::Bb => check_bb(m, &profiles),
            PropertyArg::Mono => check_monotonicity(m, &profiles, &grid),
            PropertyArg::All => unreachable!(),
        }
    };
    let properties = match args.property {
        PropertyArg::All => vec![PropertyArg::Sp, PropertyArg::Ir, PropertyArg::Bb, PropertyArg::Mono],
        p => vec![p],
    };
    let reports = properties
        .into_iter()
        .map(run)
        .collect::<bugshare_core::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    let passed = reports.iter().all(|r| r.passed);
    let out = AuditOutput {
        mechanism: args.mechanism,
        seed,
        profiles: profiles.len(),
        reports,
        passed,
    };
    Ok(Emitted {
        body: render(&out, format, AuditOutput::text, AuditOutput::csv)?,
        code: if passed { EXIT_OK } else { EXIT_VIOLATIONS },
    })
}

fn alpha(args: AlphaArgs, format: Format) -> Result<Emitted, String> {
    if args.kmax == 0 {
        return Err("--kmax must be at least 1".into());
    }
    let out = AlphaOutput {
        kmax: args.kmax,
        values: alpha_table(args.kmax)
            .into_iter()
            .map(|(k, alpha)| AlphaEntry { k, alpha })
            .collect(),
        bound: 4.0,
        bound_holds: verify_alpha_bound(args.kmax),
    };
    ok(render(&out, format, AlphaOutput::text, AlphaOutput::csv)?)
}

fn lowerbound(args: LowerboundArgs, format: Format) -> Result<Emitted, String> {
    if args.n == 0 || args.h == 0 {
        return Err("--n and --H must be at least 1".into());
    }
    let max = matches!(args.objective, ObjectiveArg::Max | ObjectiveArg::Both)
        .then(|| max_delay_lower_bound(&args.dist, args.n, args.h))
        .transpose()
        .map_err(|e| e.to_string())?;
    let sum = matches!(args.objective, ObjectiveArg::Sum | ObjectiveArg::Both)
        .then(|| sum_delay_lower_bound(&args.dist, args.n, args.h))
        .transpose()
        .map_err(|e| e.to_string())?;
    let out = LowerBoundOutput {
        distribution: args.dist,
        n: args.n,
        h: args.h,
        max_delay: max,
        sum_delay: sum,
    };
    ok(render(&out, format, LowerBoundOutput::text, LowerBoundOutput::csv)?)
}

fn simulate(args: SimulateArgs, format: Format) -> Result<Emitted, String> {
    let config = SimulationConfig::new(args.mechanism, args.dist, args.n)
        .with_samples(args.samples)
        .with_seed(args.seed)
        .with_mode(match args.mode {
            ModeArg::MonteCarlo => SimulationMode::MonteCarlo,
            ModeArg::Exact => SimulationMode::ExactGrouping,
        });
    let report = estimate(&config).map_err(|e| e.to_string())?;
    let out = SimulateOutput { config, report };
    ok(render(&out, format, SimulateOutput::text, SimulateOutput::csv)?)
}

fn table(args: TableArgs, format: Format) -> Result<Emitted, String> {
    if args.samples == 0 || args.h == 0 {
        return Err("--samples and --H must be at least 1".into());
    }
    let options = TableOptions {
        h: args.h,
        samples: args.samples,
        seed: args.seed,
        exact_grouping_max_n: args.exact_max_n,
    };
    let rows = reproduce_table_with(&options).map_err(|e| e.to_string())?;
    let out = TableOutput {
        seed: args.seed,
        h: args.h,
        samples: args.samples,
        rows,
    };
    ok(render(&out, format, TableOutput::text, TableOutput::csv)?)
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got {raw:?}"))?;
    // A pool may already exist when running inside tests; that is fine.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

fn dispatch(cli: Cli) -> Result<Emitted, String> {
    configure_threads()?;
    let default = if matches!(cli.command, Command::Table(_)) { Format::Csv } else { Format::Json };
    let format = cli.format.unwrap_or(default);
    match cli.command {
        Command::Allocate(a) => allocate(a, format),
        Command::Audit(a) => audit(a, format),
        Command::Alpha(a) => alpha(a, format),
        Command::Lowerbound(a) => lowerbound(a, format),
        Command::Simulate(a) => simulate(a, format),
        Command::Table(a) => table(a, format),
    }
}

/// Parses `argv`, runs the command and writes the result to `stdout` (or
/// `--output`). Returns the process exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(sink, "{rendered}");
            return code;
        }
    };
    let target = cli.output.clone();
    let emitted = match dispatch(cli) {
        Ok(e) => e,
        Err(msg) => {
            let _ = writeln!(stderr, "error: {msg}");
            return EXIT_USAGE;
        }
    };
    let mut body = emitted.body;
    if !body.ends_with('\n') {
        body.push('\n');
    }
    let written = match target {
        Some(path) => std::fs::write(&path, &body).map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => stdout.write_all(body.as_bytes()).map_err(|e| e.to_string()),
    };
    match written {
        Ok(()) => emitted.code,
        Err(msg) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_USAGE
        }
    }
}
