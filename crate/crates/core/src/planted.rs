//! Synthetic test inputs: points spread uniformly over a random affine
//! subspace through the center of the cube.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::noise::SeededGenerator;
use crate::pca::Dataset;

/// A random `d'`-dimensional affine subspace through `(1/2, ..., 1/2)`.
#[derive(Debug, Clone)]
pub struct PlantedSubspace {
    /// `d x d'` with orthonormal columns.
    pub basis: DMatrix<f64>,
    /// Coordinates are drawn uniformly from `[-half_width, half_width]^{d'}`;
    /// the width keeps every point inside `[0, 1]^d`.
    pub half_width: f64,
}

impl PlantedSubspace {
    /// Orthonormalises a Gaussian `d x d'` matrix (Gram-Schmidt).
    pub fn random(d: usize, d_prime: usize, gen: &mut SeededGenerator) -> Result<Self> {
        if d_prime == 0 || d_prime > d {
            return Err(Error::InvalidDimension { got: d_prime, min: 1, max: d });
        }
        let mut basis = DMatrix::zeros(d, d_prime);
        let mut k = 0;
        while k < d_prime {
            let mut v = nalgebra::DVector::from_fn(d, |_, _| gen.standard_normal());
            for j in 0..k {
                let proj = basis.column(j).dot(&v);
                v -= basis.column(j) * proj;
            }
            let norm = v.norm();
            if norm > 1e-8 {
                basis.set_column(k, &(v / norm));
                k += 1;
            }
        }
        let widest = basis.row_iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
        Ok(PlantedSubspace { basis, half_width: 0.5 / widest })
    }

    pub fn sample(&self, n: usize, gen: &mut SeededGenerator) -> Result<Dataset> {
        let h = self.half_width;
        let coords = DMatrix::from_fn(self.basis.ncols(), n, |_, _| gen.uniform_in(-h, h));
        let points = (&self.basis * coords).map(|x| (0.5 + x).clamp(0.0, 1.0));
        Dataset::new(points)
    }
}

/// `n` points on a fresh random `d'`-dimensional subspace of `[0, 1]^d`.
pub fn planted_dataset(d: usize, d_prime: usize, n: usize, gen: &mut SeededGenerator) -> Result<Dataset> {
    let subspace = PlantedSubspace::random(d, d_prime, &mut gen.split("basis"))?;
    subspace.sample(n, &mut gen.split("points"))
}
