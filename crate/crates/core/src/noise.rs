//! Seeded noise sources.
//!
//! Every random draw in the crate goes through a [`SeededGenerator`]. A
//! generator is a ChaCha20 keystream addressed by `(seed, stream)`; stages of
//! the pipeline obtain their own sub-streams with [`SeededGenerator::split`]
//! so that adding a stage never shifts the draws of another one.

use nalgebra::DMatrix;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scale parameter of a Laplace-type distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseScale(f64);

impl NoiseScale {
    pub fn new(sigma: f64) -> Result<Self> {
        if sigma.is_finite() && sigma > 0.0 {
            Ok(NoiseScale(sigma))
        } else {
            Err(Error::param("sigma", format!("must be finite and > 0, got {sigma}")))
        }
    }

    pub fn sigma(self) -> f64 {
        self.0
    }
}

/// Deterministic random source addressed by a seed and a stream id.
pub struct SeededGenerator {
    seed: u64,
    stream: u64,
    rng: ChaCha20Rng,
}

impl SeededGenerator {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        SeededGenerator { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Number of 32-bit words consumed so far.
    pub fn position(&self) -> u128 {
        self.rng.get_word_pos()
    }

    /// Independent child stream keyed by a label. The child does not depend on
    /// how much of the parent has been consumed.
    pub fn split(&self, label: &str) -> SeededGenerator {
        self.split_index(fnv1a(label.as_bytes()))
    }

    /// Independent child stream keyed by an integer (node index, anchor index, trial).
    pub fn split_index(&self, key: u64) -> SeededGenerator {
        let child = splitmix(self.seed ^ splitmix(self.stream.wrapping_add(0x9e37_79b9_7f4a_7c15)));
        SeededGenerator::with_stream(child, key)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform draw in the open interval (0, 1).
    pub fn uniform_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in [lo, hi).
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        let u = (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        lo + (hi - lo) * u
    }

    pub fn standard_normal(&mut self) -> f64 {
        // Box-Muller; the second variate is discarded to keep the stream simple.
        let u1 = self.uniform_open();
        let u2 = self.uniform_open();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

impl std::fmt::Debug for SeededGenerator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SeededGenerator")
            .field("seed", &self.seed)
            .field("stream", &self.stream)
            .field("position", &self.position())
            .finish()
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3))
}

/// Inverse CDF of the centered Laplace distribution with scale `sigma`.
pub fn laplace_from_uniform(u: f64, sigma: f64) -> f64 {
    let centered = u - 0.5;
    if centered == 0.0 {
        return 0.0;
    }
    -sigma * centered.signum() * (1.0 - 2.0 * centered.abs()).ln()
}

/// Draw from Lap(sigma): density exp(-|x|/sigma) / (2 sigma).
pub fn sample_laplace(scale: NoiseScale, gen: &mut SeededGenerator) -> f64 {
    laplace_from_uniform(gen.uniform_open(), scale.sigma())
}

/// Geometric variable on {0, 1, ...} with P(G >= k) = exp(-k / sigma).
fn geometric(sigma: f64, gen: &mut SeededGenerator) -> i64 {
    let g = (-sigma * gen.uniform_open().ln()).floor();
    if g >= i64::MAX as f64 {
        i64::MAX
    } else {
        g as i64
    }
}

/// Draw from the integer Laplace law P(z) = (1-p)/(1+p) exp(-|z|/sigma), p = exp(-1/sigma),
/// as the difference of two i.i.d. geometric variables.
pub fn sample_integer_laplace(scale: NoiseScale, gen: &mut SeededGenerator) -> i64 {
    let a = geometric(scale.sigma(), gen);
    let b = geometric(scale.sigma(), gen);
    a.saturating_sub(b)
}

/// Exact probability mass of the integer Laplace law at `z`.
pub fn integer_laplace_pmf(z: i64, sigma: f64) -> f64 {
    let p = (-1.0 / sigma).exp();
    (1.0 - p) / (1.0 + p) * (-(z.unsigned_abs() as f64) / sigma).exp()
}

/// Symmetric d x d matrix with A_ij = A_ji = Lap(sigma) above the diagonal and
/// A_ii = 2 Lap(sigma). Draws are consumed in row-major upper-triangular order.
pub fn sample_symmetric_laplace_matrix(d: usize, scale: NoiseScale, gen: &mut SeededGenerator) -> Result<DMatrix<f64>> {
    if d == 0 {
        return Err(Error::InvalidDimension { got: 0, min: 1, max: usize::MAX });
    }
    let mut a = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let draw = sample_laplace(scale, gen);
            if i == j {
                a[(i, i)] = 2.0 * draw;
            } else {
                a[(i, j)] = draw;
                a[(j, i)] = draw;
            }
        }
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scale(s: f64) -> NoiseScale {
        NoiseScale::new(s).unwrap()
    }

    #[test]
    fn inverse_cdf_closed_forms() {
        assert_eq!(laplace_from_uniform(0.5, 1.0), 0.0);
        assert!((laplace_from_uniform(0.75, 1.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((laplace_from_uniform(0.25, 1.0) + std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn reflection_flips_sign_exactly() {
        for k in 1..512 {
            let t = k as f64 / 1024.0;
            let x = laplace_from_uniform(0.5 + t, 1.7);
            let y = laplace_from_uniform(0.5 - t, 1.7);
            assert_eq!(x, -y);
        }
    }

    #[test]
    fn rejects_bad_scale() {
        assert!(NoiseScale::new(0.0).is_err());
        assert!(NoiseScale::new(-1.0).is_err());
        assert!(NoiseScale::new(f64::NAN).is_err());
    }

    #[test]
    fn laplace_variance_matches_two_sigma_squared() {
        let mut gen = SeededGenerator::new(11);
        let n = 1_000_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let x = sample_laplace(scale(2.0), &mut gen);
            s += x;
            s2 += x * x;
        }
        let mean = s / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!((var - 8.0).abs() < 0.1, "variance {var}");
    }

    #[test]
    fn integer_laplace_mass_at_zero() {
        let e = (-1.0f64).exp();
        assert!((integer_laplace_pmf(0, 1.0) - (1.0 - e) / (1.0 + e)).abs() < 1e-15);
        assert!((integer_laplace_pmf(0, 1.0) - 0.4621).abs() < 1e-4);
    }

    #[test]
    fn integer_laplace_moments() {
        let mut gen = SeededGenerator::new(5);
        let n = 1_000_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let z = sample_integer_laplace(scale(3.0), &mut gen) as f64;
            s += z;
            s2 += z * z;
        }
        let mean = s / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!(var <= 18.0, "variance {var}");
    }

    #[test]
    fn integer_laplace_density_ratio() {
        let sigma = 1.5;
        let mut gen = SeededGenerator::new(77);
        let n = 2_000_000;
        let mut hist = std::collections::HashMap::<i64, u64>::new();
        for _ in 0..n {
            *hist.entry(sample_integer_laplace(scale(sigma), &mut gen)).or_default() += 1;
        }
        for z in 0..4 {
            let a = hist[&z] as f64;
            let b = hist[&(z + 1)] as f64;
            let log_ratio = (a / b).ln();
            let se = (1.0 / a + 1.0 / b).sqrt();
            assert!((log_ratio - 1.0 / sigma).abs() < 3.0 * se, "z={z} ratio {log_ratio}");
        }
    }

    #[test]
    fn matrix_sampler_shapes() {
        let mut gen = SeededGenerator::new(1);
        let one = sample_symmetric_laplace_matrix(1, scale(1.0), &mut gen).unwrap();
        let mut replay = SeededGenerator::new(1);
        assert_eq!(one[(0, 0)], 2.0 * sample_laplace(scale(1.0), &mut replay));

        let a = sample_symmetric_laplace_matrix(2, scale(1.0), &mut gen).unwrap();
        assert_eq!(a[(0, 1)].to_bits(), a[(1, 0)].to_bits());
        assert!(sample_symmetric_laplace_matrix(0, scale(1.0), &mut gen).is_err());
    }

    #[test]
    fn matrix_sampler_consumes_triangular_draws() {
        let d = 5;
        let mut gen = SeededGenerator::new(9);
        sample_symmetric_laplace_matrix(d, scale(1.0), &mut gen).unwrap();
        let mut count = SeededGenerator::new(9);
        for _ in 0..d * (d + 1) / 2 {
            count.next_u64();
        }
        assert_eq!(gen.position(), count.position());
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let a = sample_symmetric_laplace_matrix(3, scale(0.5), &mut SeededGenerator::new(42)).unwrap();
        let b = sample_symmetric_laplace_matrix(3, scale(0.5), &mut SeededGenerator::new(42)).unwrap();
        let bits = |m: &DMatrix<f64>| m.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn split_streams_are_independent_of_parent_position() {
        let parent = SeededGenerator::new(8);
        let mut consumed = SeededGenerator::new(8);
        consumed.next_u64();
        let mut a = parent.split("covariance");
        let mut b = consumed.split("covariance");
        assert_eq!(a.next_u64(), b.next_u64());
        let mut c = parent.split("mean");
        let mut a2 = parent.split("covariance");
        assert_ne!(c.next_u64(), a2.next_u64());
        assert_ne!(parent.split_index(1).next_u64(), parent.split_index(2).next_u64());
    }
}
