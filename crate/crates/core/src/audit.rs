//! Monte-Carlo privacy audit of single mechanisms.
//!
//! Each mechanism is run many times on two neighbouring inputs. Outputs are
//! binned, and the largest absolute log-ratio of bin frequencies estimates
//! the privacy loss. Bins seen fewer than `min_bin_count` times on either side
//! are skipped, since their ratios are dominated by sampling error.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_budget, Error, Result};
use crate::noise::{sample_integer_laplace, sample_symmetric_laplace_matrix, NoiseScale, SeededGenerator};
use crate::pca::{centered_covariance, covariance_noise_scale, Dataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mechanism {
    /// A count of 10 against 11, released with integer Laplace noise at scale 1/epsilon.
    IntegerLaplaceCount,
    /// One off-diagonal entry of the private covariance of two datasets that
    /// differ in a single point.
    CovarianceEntry,
}

impl std::str::FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "integer-laplace-count" => Ok(Mechanism::IntegerLaplaceCount),
            "covariance-entry" => Ok(Mechanism::CovarianceEntry),
            _ => {
                Err(Error::param("mechanism", format!("expected integer-laplace-count or covariance-entry, got {s:?}")))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub mechanism: Mechanism,
    pub epsilon: f64,
    pub samples: usize,
    pub seed: u64,
    /// Runs both sides on the same input; the loss should then be near zero.
    pub identical: bool,
    pub min_bin_count: u64,
}

impl AuditConfig {
    pub fn new(mechanism: Mechanism, epsilon: f64, samples: usize) -> Self {
        AuditConfig { mechanism, epsilon, samples, seed: 0, identical: false, min_bin_count: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub config: AuditConfig,
    pub bins_used: usize,
    /// Largest |log(p_b / q_b)| over the usable bins.
    pub max_log_ratio: f64,
    /// Delta-method standard error of the log-ratio in the maximising bin.
    pub standard_error: f64,
    /// Output value (or bin lower edge) of the maximising bin.
    pub argmax: f64,
    pub within_bound: bool,
    pub warnings: Vec<String>,
}

impl AuditReport {
    pub fn bound(&self) -> f64 {
        self.config.epsilon + 3.0 * self.standard_error
    }
}

/// Frequency comparison on integer-labelled bins.
fn compare(a: &[(i64, u64)], b: &[(i64, u64)], samples: usize, min: u64) -> (usize, f64, f64, i64) {
    let n = samples as f64;
    let lookup = |v: &[(i64, u64)], key: i64| v.binary_search_by_key(&key, |e| e.0).map(|i| v[i].1).unwrap_or(0);
    let (mut used, mut best, mut se, mut arg) = (0, 0.0, 0.0, 0);
    for &(key, ka) in a {
        let kb = lookup(b, key);
        if ka < min || kb < min {
            continue;
        }
        used += 1;
        let ratio = ((ka as f64) / (kb as f64)).ln().abs();
        if ratio > best || used == 1 {
            best = ratio;
            se = (1.0 / ka as f64 - 1.0 / n + 1.0 / kb as f64 - 1.0 / n).max(0.0).sqrt();
            arg = key;
        }
    }
    (used, best, se, arg)
}

fn histogram(mut keys: Vec<i64>) -> Vec<(i64, u64)> {
    keys.sort_unstable();
    let mut out: Vec<(i64, u64)> = Vec::new();
    for k in keys {
        match out.last_mut() {
            Some(last) if last.0 == k => last.1 += 1,
            _ => out.push((k, 1)),
        }
    }
    out
}

/// Toy dataset for the covariance audit and its neighbour (last point moved
/// to the opposite corner).
pub fn covariance_pair(seed: u64) -> Result<(Dataset, Dataset)> {
    let (d, n) = (2, 50);
    let mut gen = SeededGenerator::new(seed).split("audit-data");
    let base = DMatrix::from_fn(d, n, |_, _| gen.uniform_open());
    let mut other = base.clone();
    other[(0, n - 1)] = 1.0;
    other[(1, n - 1)] = 0.0;
    Ok((Dataset::new(base)?, Dataset::new(other)?))
}

pub fn run_audit(config: &AuditConfig) -> Result<AuditReport> {
    check_budget(config.epsilon)?;
    if config.samples == 0 {
        return Err(Error::param("samples", "must be positive"));
    }
    let root = SeededGenerator::new(config.seed);
    let (mut ga, mut gb) = (root.split("left"), root.split("right"));
    let (a, b, bin_width) = match config.mechanism {
        Mechanism::IntegerLaplaceCount => {
            let scale = NoiseScale::new(1.0 / config.epsilon)?;
            let (ca, cb) = (10, if config.identical { 10 } else { 11 });
            let draw = |c: i64, gen: &mut SeededGenerator| {
                (0..config.samples).map(|_| c + sample_integer_laplace(scale, gen)).collect::<Vec<_>>()
            };
            (draw(ca, &mut ga), draw(cb, &mut gb), 1.0)
        }
        Mechanism::CovarianceEntry => {
            let (x, y) = covariance_pair(config.seed)?;
            let y = if config.identical { x.clone() } else { y };
            let scale = covariance_noise_scale(x.dim(), x.len(), config.epsilon)?;
            let width = scale.sigma() / 4.0;
            let draw = |data: &Dataset, gen: &mut SeededGenerator| -> Result<Vec<i64>> {
                let entry = centered_covariance(data).matrix[(0, 1)];
                (0..config.samples)
                    .map(|_| {
                        let noise = sample_symmetric_laplace_matrix(data.dim(), scale, gen)?;
                        Ok(((entry + noise[(0, 1)]) / width).floor() as i64)
                    })
                    .collect()
            };
            (draw(&x, &mut ga)?, draw(&y, &mut gb)?, width)
        }
    };
    let (ha, hb) = (histogram(a), histogram(b));
    let (used, best, se, arg) = compare(&ha, &hb, config.samples, config.min_bin_count);
    let mut warnings = Vec::new();
    if used < 2 {
        warnings.push(format!(
            "only {used} bins reached {} samples on both sides; increase the sample count",
            config.min_bin_count
        ));
    }
    let within = best <= config.epsilon + 3.0 * se;
    Ok(AuditReport {
        config: config.clone(),
        bins_used: used,
        max_log_ratio: best,
        standard_error: se,
        argmax: arg as f64 * bin_width,
        within_bound: within,
        warnings,
    })
}
