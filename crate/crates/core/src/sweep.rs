//! Accuracy sweeps: planted data, full pipeline, W1 against the input.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{wasserstein1, EmpiricalMeasure, Metric};
use crate::noise::SeededGenerator;
use crate::pipeline::{generate, BudgetSplit, DimensionChoice, PipelineConfig, Subroutine, SubroutineKind};
use crate::planted::planted_dataset;
use crate::psmm::DeltaMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub ns: Vec<usize>,
    pub epsilons: Vec<f64>,
    pub d_primes: Vec<usize>,
    /// Ambient dimension of the planted data.
    pub ambient: usize,
    pub trials: usize,
    pub seed: u64,
    pub subroutine: Subroutine,
    pub budget_split: BudgetSplit,
    pub delta_mode: DeltaMode,
    pub metric: Metric,
    pub jobs: usize,
    /// Trials not yet started when this many seconds have passed are skipped.
    pub time_budget: Option<f64>,
}

impl SweepConfig {
    pub fn new(ns: Vec<usize>, d_prime: usize, ambient: usize, trials: usize) -> Self {
        SweepConfig {
            ns,
            epsilons: vec![1.0],
            d_primes: vec![d_prime],
            ambient,
            trials,
            seed: 0,
            subroutine: Subroutine::Auto,
            budget_split: BudgetSplit::Three,
            delta_mode: DeltaMode::Alg5,
            metric: Metric::LInf,
            jobs: 1,
            time_budget: None,
        }
    }

    /// Grid points in row order: d', then epsilon, then n, then trial.
    fn grid(&self) -> Vec<(usize, f64, usize, usize)> {
        let mut out = Vec::new();
        for &k in &self.d_primes {
            for &eps in &self.epsilons {
                for &n in &self.ns {
                    for t in 0..self.trials {
                        out.push((k, eps, n, t));
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub d_prime: usize,
    pub epsilon: f64,
    pub n: usize,
    pub trial: usize,
    /// Seed of the planted dataset.
    pub data_seed: u64,
    /// Seed handed to the pipeline.
    pub pipeline_seed: u64,
    pub subroutine: SubroutineKind,
    pub m: usize,
    /// `None` when the synthetic dataset is empty.
    pub w1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub d_prime: usize,
    /// `(epsilon n, mean W1, trials)` per grid point, by increasing epsilon n.
    pub points: Vec<(f64, f64, usize)>,
    /// Least-squares slope of log mean W1 against log(epsilon n).
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: SweepConfig,
    pub rows: Vec<TrialRow>,
    pub summary: Vec<GroupSummary>,
    /// Trials skipped because the time budget ran out.
    pub skipped: usize,
}

/// Ordinary least squares of `ys` on `xs`; `None` with fewer than two
/// distinct abscissae.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len() as f64;
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    fit_line(&lx, &ly).map(|l| l.0)
}

/// Seeds of trial `index`: one for the planted data, one for the pipeline.
pub fn trial_seeds(seed: u64, index: usize) -> (u64, u64) {
    let gen = SeededGenerator::new(seed).split("trial").split_index(index as u64);
    (gen.split("data").next_u64(), gen.split("pipeline").next_u64())
}

pub fn run_trial(
    config: &SweepConfig,
    d_prime: usize,
    epsilon: f64,
    n: usize,
    trial: usize,
    index: usize,
) -> Result<TrialRow> {
    let (data_seed, pipeline_seed) = trial_seeds(config.seed, index);
    let data = planted_dataset(config.ambient, d_prime, n, &mut SeededGenerator::new(data_seed))?;
    let pipeline = PipelineConfig {
        d_prime: DimensionChoice::Fixed(d_prime),
        subroutine: config.subroutine,
        seed: pipeline_seed,
        budget_split: config.budget_split,
        delta_mode: config.delta_mode,
        ..PipelineConfig::new(epsilon)
    };
    let out = generate(&data, &pipeline)?;
    let w1 = if out.is_empty() {
        None
    } else {
        let p = EmpiricalMeasure::uniform(data.points());
        let q = EmpiricalMeasure::uniform(&out.points);
        Some(wasserstein1(&p, &q, config.metric)?)
    };
    Ok(TrialRow {
        d_prime,
        epsilon,
        n,
        trial,
        data_seed,
        pipeline_seed,
        subroutine: out.provenance.subroutine,
        m: out.len(),
        w1,
    })
}

/// Runs every trial of the grid on a pool of `config.jobs` threads. Rows come
/// back in grid order whatever the completion order.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepReport> {
    if config.ns.is_empty() || config.epsilons.is_empty() || config.d_primes.is_empty() || config.trials == 0 {
        return Err(Error::param("grid", "every grid axis needs at least one value and trials must be positive"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs.max(1))
        .build()
        .map_err(|e| Error::param("jobs", e.to_string()))?;
    let start = Instant::now();
    let budget = config.time_budget.map(Duration::from_secs_f64);
    let grid = config.grid();
    let results: Vec<Option<Result<TrialRow>>> = pool.install(|| {
        grid.par_iter()
            .enumerate()
            .map(|(index, &(k, eps, n, t))| {
                if budget.is_some_and(|b| start.elapsed() > b) {
                    return None;
                }
                let row = run_trial(config, k, eps, n, t, index);
                if let Ok(r) = &row {
                    log::info!("d'={k} eps={eps} n={n} trial={t}: m={} w1={:?}", r.m, r.w1);
                }
                Some(row)
            })
            .collect()
    });
    let mut rows = Vec::new();
    let mut skipped = 0;
    for r in results {
        match r {
            Some(row) => rows.push(row?),
            None => skipped += 1,
        }
    }
    let summary = summarize(config, &rows);
    Ok(SweepReport { config: config.clone(), rows, summary, skipped })
}

pub fn summarize(config: &SweepConfig, rows: &[TrialRow]) -> Vec<GroupSummary> {
    config
        .d_primes
        .iter()
        .map(|&k| {
            let mut points: Vec<(f64, f64, usize)> = Vec::new();
            for &eps in &config.epsilons {
                for &n in &config.ns {
                    let w: Vec<f64> = rows
                        .iter()
                        .filter(|r| r.d_prime == k && r.epsilon == eps && r.n == n)
                        .filter_map(|r| r.w1)
                        .collect();
                    if !w.is_empty() {
                        points.push((eps * n as f64, w.iter().sum::<f64>() / w.len() as f64, w.len()));
                    }
                }
            }
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
            let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
            let fit = fit_line(&lx, &ly);
            GroupSummary { d_prime: k, points, slope: fit.map(|f| f.0), intercept: fit.map(|f| f.1) }
        })
        .collect()
}
