//! Command-line front end. Subcommands read files, write machine output to
//! files and log to stderr. Exit codes: 0 success, 2 invalid input or
//! configuration, 3 runtime failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::audit::{run_audit, AuditConfig, Mechanism};
use crate::error::{Error, Result};
use crate::io::{read_csv, read_points, write_csv};
use crate::metrics::{wasserstein1, wasserstein2, EmpiricalMeasure, Metric};
use crate::pipeline::{generate, BudgetSplit, DimensionChoice, PipelineConfig, Subroutine};
use crate::psmm::DeltaMode;
use crate::record::{write_json, Evaluation, InputSummary, RunRecord, Timings, TOOL};
use crate::sweep::{run_sweep, SweepConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// File names written by `generate` inside its output directory.
pub const SYNTHETIC_CSV: &str = "synthetic.csv";
pub const RUN_RECORD: &str = "run.json";

#[derive(Debug, Parser)]
#[command(
    name = "lowdim-synth",
    version,
    about = "Differentially private synthetic data near low-dimensional subspaces"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a private synthetic dataset from a CSV file.
    Generate(GenerateArgs),
    /// Exact W1 and W2 between two CSV datasets.
    Evaluate(EvaluateArgs),
    /// Accuracy sweep over planted data.
    Sweep(SweepArgs),
    /// Monte-Carlo privacy audit of a single mechanism.
    Audit(AuditArgs),
}

/// `k` or `auto`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DPrimeArg {
    Auto,
    Fixed(usize),
}

impl std::str::FromStr for DPrimeArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "auto" {
            return Ok(DPrimeArg::Auto);
        }
        match s.parse::<usize>() {
            Ok(k) if k > 0 => Ok(DPrimeArg::Fixed(k)),
            _ => Err(format!("expected a positive integer or `auto`, got {s:?}")),
        }
    }
}

fn parse_from_str<T: std::str::FromStr<Err = Error>>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Input CSV, one point per row.
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory; receives synthetic.csv and run.json.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
    #[arg(long, default_value = "auto")]
    pub dprime: DPrimeArg,
    /// Spectral drop threshold used with `--dprime auto`.
    #[arg(long, default_value_t = 0.1)]
    pub tau: f64,
    #[arg(long, default_value = "auto", value_parser = parse_from_str::<Subroutine>)]
    pub subroutine: Subroutine,
    #[arg(long, default_value = "three", value_parser = parse_from_str::<BudgetSplit>)]
    pub budget_split: BudgetSplit,
    #[arg(long, default_value = "alg5", value_parser = parse_from_str::<DeltaMode>)]
    pub delta_mode: DeltaMode,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Min-max rescale every column to [0, 1] before anything else.
    #[arg(long)]
    pub rescale: bool,
    /// Skip all noise. For testing only; the output is flagged as not private.
    #[arg(long)]
    pub zero_noise: bool,
    /// Also record W1 and W2 (l-infinity) against the input. Not private.
    #[arg(long)]
    pub evaluate: bool,
    /// Record wall-clock timings (records then differ between runs).
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub synthetic: PathBuf,
    #[arg(long, default_value = "linf", value_parser = parse_from_str::<Metric>)]
    pub metric: Metric,
    /// JSON report path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Dataset sizes, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub epsilon: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "2")]
    pub dprime: Vec<usize>,
    /// Ambient dimension of the planted data.
    #[arg(long, default_value_t = 10)]
    pub ambient: usize,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value = "auto", value_parser = parse_from_str::<Subroutine>)]
    pub subroutine: Subroutine,
    #[arg(long, default_value = "three", value_parser = parse_from_str::<BudgetSplit>)]
    pub budget_split: BudgetSplit,
    #[arg(long, default_value = "alg5", value_parser = parse_from_str::<DeltaMode>)]
    pub delta_mode: DeltaMode,
    #[arg(long, default_value = "linf", value_parser = parse_from_str::<Metric>)]
    pub metric: Metric,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Stop starting new trials after this many seconds.
    #[arg(long)]
    pub time_budget: Option<f64>,
    /// JSON results path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[arg(long, value_parser = parse_from_str::<Mechanism>)]
    pub mechanism: Mechanism,
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Compare the mechanism against itself on one input.
    #[arg(long)]
    pub identical: bool,
    /// Bins with fewer samples on either side are ignored.
    #[arg(long, default_value_t = 1000)]
    pub min_bin_count: u64,
    /// JSON report path.
    #[arg(long)]
    pub out: PathBuf,
}

/// Output of `evaluate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub tool: String,
    pub input: String,
    pub synthetic: String,
    pub n: usize,
    pub m: usize,
    pub metric: Metric,
    pub w1: f64,
    pub w2: f64,
}

/// Parses `args` (program name first) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Generate(a) => cmd_generate(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Audit(a) => cmd_audit(&a),
    }
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let ingested = read_csv(&args.input, args.rescale)?;
    let data = &ingested.dataset;
    log::info!("read {} points in {} dimensions from {}", data.len(), data.dim(), args.input.display());
    let config = PipelineConfig {
        epsilon: args.epsilon,
        d_prime: match args.dprime {
            DPrimeArg::Auto => DimensionChoice::Auto { tau: args.tau },
            DPrimeArg::Fixed(k) => DimensionChoice::Fixed(k),
        },
        subroutine: args.subroutine,
        seed: args.seed,
        budget_split: args.budget_split,
        delta_mode: args.delta_mode,
        zero_noise: args.zero_noise,
        ..PipelineConfig::default()
    };
    let start = Instant::now();
    let out = generate(data, &config)?;
    let generate_seconds = start.elapsed().as_secs_f64();
    let p = &out.provenance;
    log::info!("d'={} subroutine={:?} m={}", p.d_prime, p.subroutine, out.len());
    for w in &p.warnings {
        log::warn!("{w}");
    }

    let mut evaluate_seconds = None;
    let evaluation = if args.evaluate && !out.is_empty() {
        let start = Instant::now();
        let x = EmpiricalMeasure::uniform(data.points());
        let y = EmpiricalMeasure::uniform(&out.points);
        let ev = Evaluation {
            metric: Metric::LInf,
            w1: wasserstein1(&x, &y, Metric::LInf)?,
            w2: wasserstein2(&x, &y, Metric::LInf)?,
        };
        evaluate_seconds = Some(start.elapsed().as_secs_f64());
        Some(ev)
    } else {
        None
    };

    let record = RunRecord {
        tool: TOOL.to_string(),
        input: InputSummary {
            path: Some(display(&args.input)),
            n: data.len(),
            d: data.dim(),
            columns: ingested.columns.clone(),
            rescaling: ingested.rescaling.clone(),
        },
        config,
        m: out.len(),
        provenance: out.provenance.clone(),
        evaluation,
        timings: args.timings.then_some(Timings { generate_seconds, evaluate_seconds }),
    };
    std::fs::create_dir_all(&args.out)?;
    write_csv(args.out.join(SYNTHETIC_CSV), &ingested.columns, &out.points)?;
    write_json(args.out.join(RUN_RECORD), &record)?;
    log::info!("wrote {}", args.out.display());
    Ok(())
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let (_, x) = read_points(&args.input)?;
    let (_, y) = read_points(&args.synthetic)?;
    if x.nrows() != y.nrows() {
        return Err(Error::param("synthetic", "column count differs from the input"));
    }
    if x.ncols() == 0 || y.ncols() == 0 {
        return Err(Error::param("synthetic", "both files need at least one data row"));
    }
    let p = EmpiricalMeasure::uniform(&x);
    let q = EmpiricalMeasure::uniform(&y);
    let report = EvaluationReport {
        tool: TOOL.to_string(),
        input: display(&args.input),
        synthetic: display(&args.synthetic),
        n: x.ncols(),
        m: y.ncols(),
        metric: args.metric,
        w1: wasserstein1(&p, &q, args.metric)?,
        w2: wasserstein2(&p, &q, args.metric)?,
    };
    log::info!("W1 = {}, W2 = {}", report.w1, report.w2);
    write_json(&args.out, &report)
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let config = SweepConfig {
        ns: args.n.clone(),
        epsilons: args.epsilon.clone(),
        d_primes: args.dprime.clone(),
        ambient: args.ambient,
        trials: args.trials,
        seed: args.seed,
        subroutine: args.subroutine,
        budget_split: args.budget_split,
        delta_mode: args.delta_mode,
        metric: args.metric,
        jobs: args.jobs,
        time_budget: args.time_budget,
    };
    let report = run_sweep(&config)?;
    for g in &report.summary {
        log::info!("d'={}: slope {:?} over {} grid points", g.d_prime, g.slope, g.points.len());
    }
    if report.skipped > 0 {
        log::warn!("{} trials skipped after the time budget ran out", report.skipped);
    }
    write_json(&args.out, &report)
}

pub fn cmd_audit(args: &AuditArgs) -> Result<()> {
    let config = AuditConfig {
        mechanism: args.mechanism,
        epsilon: args.epsilon,
        samples: args.samples,
        seed: args.seed,
        identical: args.identical,
        min_bin_count: args.min_bin_count,
    };
    let report = run_audit(&config)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    log::info!(
        "max log-ratio {:.4} (SE {:.4}) against epsilon {}",
        report.max_log_ratio,
        report.standard_error,
        args.epsilon
    );
    write_json(&args.out, &report)
}
