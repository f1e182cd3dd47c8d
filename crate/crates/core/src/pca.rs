//! Private covariance estimation and projection onto the private principal
//! subspace.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{check_budget, Error, Result};
use crate::noise::{sample_laplace, sample_symmetric_laplace_matrix, NoiseScale, SeededGenerator};

/// `n` points of `[0, 1]^d`, stored as the columns of a `d x n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: DMatrix<f64>,
}

impl Dataset {
    pub fn new(points: DMatrix<f64>) -> Result<Self> {
        if points.nrows() == 0 {
            return Err(Error::InvalidDimension { got: 0, min: 1, max: usize::MAX });
        }
        if points.ncols() < 2 {
            return Err(Error::InsufficientData { needed: 2, got: points.ncols() });
        }
        for (col, p) in points.column_iter().enumerate() {
            if let Some(row) = p.iter().position(|&x| !(0.0..=1.0).contains(&x)) {
                return Err(Error::OutOfDomain {
                    index: col,
                    reason: format!("coordinate {row} = {} is outside [0, 1]", p[row]),
                });
            }
        }
        Ok(Dataset { points })
    }

    pub fn dim(&self) -> usize {
        self.points.nrows()
    }

    pub fn len(&self) -> usize {
        self.points.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.points.ncols() == 0
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn mean(&self) -> DVector<f64> {
        self.points.column_mean()
    }

    /// Columns minus the sample mean.
    pub fn centered(&self) -> DMatrix<f64> {
        let mean = self.mean();
        let mut z = self.points.clone();
        for mut c in z.column_iter_mut() {
            c -= &mean;
        }
        z
    }
}

/// M = (1/(n-1)) sum (X_i - mean)(X_i - mean)^T together with the mean.
#[derive(Debug, Clone)]
pub struct CenteredCovariance {
    pub matrix: DMatrix<f64>,
    pub mean: DVector<f64>,
}

impl CenteredCovariance {
    /// Eigenvalues in non-increasing order with rounding-level negatives clamped to zero.
    pub fn spectrum(&self) -> Vec<f64> {
        sorted_symmetric_eigen(&self.matrix)
            .0
            .into_iter()
            .map(|s| if s < 0.0 && s > -1e-12 { 0.0 } else { s })
            .collect()
    }
}

pub fn centered_covariance(data: &Dataset) -> CenteredCovariance {
    let n = data.len() as f64;
    let z = data.centered();
    let mut matrix = &z * z.transpose() / (n - 1.0);
    symmetrize(&mut matrix);
    CenteredCovariance { matrix, mean: data.mean() }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let d = m.nrows();
    for i in 0..d {
        for j in i + 1..d {
            let v = m[(i, j)];
            m[(j, i)] = v;
        }
    }
}

/// Noisy covariance M + A and its eigendecomposition.
#[derive(Debug, Clone)]
pub struct PrivateCovariance {
    pub matrix: DMatrix<f64>,
    /// `None` in zero-noise mode.
    pub noise_scale: Option<NoiseScale>,
    /// Eigenvalues, algebraically non-increasing.
    pub spectrum: Vec<f64>,
    /// Orthonormal eigenvectors as columns, matching `spectrum`.
    pub eigenvectors: DMatrix<f64>,
}

impl PrivateCovariance {
    /// Builds the released matrix from a covariance and an explicit perturbation.
    pub fn from_parts(cov: &CenteredCovariance, noise: &DMatrix<f64>, noise_scale: Option<NoiseScale>) -> Self {
        let mut matrix = &cov.matrix + noise;
        symmetrize(&mut matrix);
        let (spectrum, eigenvectors) = sorted_symmetric_eigen(&matrix);
        PrivateCovariance { matrix, noise_scale, spectrum, eigenvectors }
    }

    /// Covariance without noise. Not private.
    pub fn zero_noise(data: &Dataset) -> Self {
        let cov = centered_covariance(data);
        let d = data.dim();
        Self::from_parts(&cov, &DMatrix::zeros(d, d), None)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Laplace scale 3 d^2 / (epsilon n) that makes the released covariance epsilon-DP.
pub fn covariance_noise_scale(d: usize, n: usize, epsilon: f64) -> Result<NoiseScale> {
    check_budget(epsilon)?;
    NoiseScale::new(3.0 * (d * d) as f64 / (epsilon * n as f64))
}

pub fn private_covariance(data: &Dataset, epsilon: f64, gen: &mut SeededGenerator) -> Result<PrivateCovariance> {
    let scale = covariance_noise_scale(data.dim(), data.len(), epsilon)?;
    let cov = centered_covariance(data);
    let noise = sample_symmetric_laplace_matrix(data.dim(), scale, gen)?;
    Ok(PrivateCovariance::from_parts(&cov, &noise, Some(scale)))
}

/// Symmetric eigendecomposition with eigenvalues sorted algebraically
/// non-increasing (ties keep solver order) and each eigenvector's first
/// component above 1e-12 in magnitude made positive.
pub fn sorted_symmetric_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(m.nrows(), m.ncols());
    for (k, &i) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
            if *first < 0.0 {
                v.neg_mut();
            }
        }
        vectors.set_column(k, &v);
    }
    (values, vectors)
}

/// Largest absolute eigenvalue of a symmetric matrix.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.iter().fold(0.0, |acc: f64, x| acc.max(x.abs()))
}

pub fn top_eigenvectors(cov: &PrivateCovariance, d_prime: usize) -> Result<DMatrix<f64>> {
    check_dimension(d_prime, cov.dim())?;
    Ok(cov.eigenvectors.columns(0, d_prime).into_owned())
}

fn check_dimension(d_prime: usize, d: usize) -> Result<()> {
    if d_prime == 0 || d_prime > d {
        Err(Error::InvalidDimension { got: d_prime, min: 1, max: d })
    } else {
        Ok(())
    }
}

/// Smallest d' in [1, d_max - 1] with sigma_{d'+1} <= tau * max(sigma_{d'}, 1e-12); else d_max.
pub fn select_dimension(spectrum: &[f64], tau: f64, d_max: usize) -> Result<usize> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::param("tau", format!("must lie in (0, 1), got {tau}")));
    }
    check_dimension(d_max, spectrum.len())?;
    Ok((1..d_max).find(|&k| spectrum[k] <= tau * spectrum[k - 1].max(1e-12)).unwrap_or(d_max))
}

/// Data expressed in the private basis, relative to the private mean.
#[derive(Debug, Clone)]
pub struct ProjectedDataset {
    /// d x d' with orthonormal columns.
    pub basis: DMatrix<f64>,
    /// d' x n coordinates.
    pub coords: DMatrix<f64>,
    /// sqrt(d) + ||private_mean||_2; bounds every coordinate column's norm.
    pub radius: f64,
    pub private_mean: DVector<f64>,
    /// `None` in zero-noise mode.
    pub mean_noise_scale: Option<NoiseScale>,
}

impl ProjectedDataset {
    pub fn dim(&self) -> usize {
        self.coords.nrows()
    }

    /// Ambient points V c (without the mean).
    pub fn lift(&self, coords: &DMatrix<f64>) -> DMatrix<f64> {
        &self.basis * coords
    }
}

/// Laplace scale d / (epsilon n) for the private mean.
pub fn mean_noise_scale(d: usize, n: usize, epsilon: f64) -> Result<NoiseScale> {
    check_budget(epsilon)?;
    NoiseScale::new(d as f64 / (epsilon * n as f64))
}

pub fn noisy_projection(
    data: &Dataset,
    cov: &PrivateCovariance,
    d_prime: usize,
    epsilon: f64,
    gen: &mut SeededGenerator,
) -> Result<ProjectedDataset> {
    let scale = mean_noise_scale(data.dim(), data.len(), epsilon)?;
    check_dimension(d_prime, data.dim())?;
    let offset = DVector::from_fn(data.dim(), |_, _| sample_laplace(scale, gen));
    let mut projected = project_with_offset(data, cov, d_prime, &offset)?;
    projected.mean_noise_scale = Some(scale);
    Ok(projected)
}

/// Projection with an explicit mean perturbation; `offset = 0` is the zero-noise mode.
pub fn project_with_offset(
    data: &Dataset,
    cov: &PrivateCovariance,
    d_prime: usize,
    offset: &DVector<f64>,
) -> Result<ProjectedDataset> {
    let basis = top_eigenvectors(cov, d_prime)?;
    let private_mean = data.mean() + offset;
    let radius = (data.dim() as f64).sqrt() + private_mean.norm();
    let mut shifted = data.points().clone();
    for mut c in shifted.column_iter_mut() {
        c -= &private_mean;
    }
    let mut coords = basis.transpose() * shifted;
    // The bound holds exactly in real arithmetic; pull back rounding overshoot.
    for mut c in coords.column_iter_mut() {
        let norm = c.norm();
        if norm > radius {
            debug_assert!(norm <= radius * (1.0 + 1e-12));
            c *= radius / norm;
        }
    }
    Ok(ProjectedDataset { basis, coords, radius, private_mean, mean_noise_scale: None })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(cols: &[&[f64]]) -> Dataset {
        let d = cols[0].len();
        Dataset::new(DMatrix::from_iterator(d, cols.len(), cols.iter().flat_map(|c| c.iter().copied()))).unwrap()
    }

    #[test]
    fn validation() {
        assert!(matches!(Dataset::new(DMatrix::zeros(2, 1)), Err(Error::InsufficientData { .. })));
        let bad = DMatrix::from_vec(1, 2, vec![0.5, 1.5]);
        assert!(matches!(Dataset::new(bad), Err(Error::OutOfDomain { index: 1, .. })));
    }

    #[test]
    fn covariance_of_two_points() {
        let cov = centered_covariance(&dataset(&[&[0.0, 0.0], &[1.0, 0.0]]));
        assert_eq!(cov.matrix, DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn equal_columns_have_zero_covariance() {
        let cov = centered_covariance(&dataset(&[&[0.3, 0.7], &[0.3, 0.7], &[0.3, 0.7]]));
        assert!(cov.matrix.iter().all(|&x| x == 0.0));
        assert_eq!(cov.spectrum(), vec![0.0, 0.0]);
    }

    #[test]
    fn noise_scale_formula() {
        let s = covariance_noise_scale(4, 1200, 1.0).unwrap();
        assert!((s.sigma() - 0.04).abs() < 1e-15);
        assert!(matches!(covariance_noise_scale(4, 10, 0.0), Err(Error::InvalidBudget(_))));
        assert!(private_covariance(&dataset(&[&[0.0], &[1.0]]), -1.0, &mut SeededGenerator::new(0)).is_err());
    }

    #[test]
    fn zero_noise_spectrum_matches_covariance() {
        let data = dataset(&[&[0.1, 0.2, 0.9], &[0.4, 0.1, 0.3], &[0.8, 0.8, 0.5], &[0.2, 0.6, 0.6]]);
        let private = PrivateCovariance::zero_noise(&data);
        let plain = centered_covariance(&data).spectrum();
        for (a, b) in private.spectrum.iter().zip(&plain) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn diagonal_top_eigenvector() {
        let cov = CenteredCovariance {
            matrix: DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 0.0])),
            mean: DVector::zeros(3),
        };
        let p = PrivateCovariance::from_parts(&cov, &DMatrix::zeros(3, 3), None);
        assert_eq!(p.spectrum[0], 3.0);
        let v = top_eigenvectors(&p, 1).unwrap();
        assert!((v[(0, 0)] - 1.0).abs() < 1e-15 && v[(1, 0)].abs() < 1e-15 && v[(2, 0)].abs() < 1e-15);
        assert!(top_eigenvectors(&p, 0).is_err());
        assert!(top_eigenvectors(&p, 4).is_err());
    }

    #[test]
    fn degenerate_identity_obeys_sign_convention() {
        let cov = CenteredCovariance { matrix: DMatrix::identity(3, 3), mean: DVector::zeros(3) };
        let p = PrivateCovariance::from_parts(&cov, &DMatrix::zeros(3, 3), None);
        let v = top_eigenvectors(&p, 2).unwrap();
        let gram = v.transpose() * &v;
        assert!((gram - DMatrix::identity(2, 2)).amax() < 1e-12);
        for c in v.column_iter() {
            let first = c.iter().find(|x| x.abs() > 1e-12).unwrap();
            assert!(*first > 0.0);
        }
    }

    #[test]
    fn dimension_selection_rules() {
        assert_eq!(select_dimension(&[5.0, 0.1, 0.05, 0.01], 0.2, 4).unwrap(), 1);
        assert_eq!(select_dimension(&[1.0, 1.0, 1.0, 1.0], 0.2, 4).unwrap(), 4);
        assert_eq!(select_dimension(&[4.0, 3.0, 0.01, 0.01], 0.1, 4).unwrap(), 2);
        assert_eq!(select_dimension(&[1.0, 1.0, 1.0, 1.0], 0.2, 2).unwrap(), 2);
        assert!(select_dimension(&[1.0], 1.5, 1).is_err());
    }

    #[test]
    fn radius_is_root_d_when_mean_vanishes() {
        // Symmetric data around zero is impossible in [0,1]^d, so offset the mean to zero.
        let data = dataset(&[&[0.2; 9], &[0.4; 9]]);
        let cov = PrivateCovariance::zero_noise(&data);
        let offset = -data.mean();
        let p = project_with_offset(&data, &cov, 1, &offset).unwrap();
        assert!((p.radius - 3.0).abs() < 1e-15);
    }

    #[test]
    fn lossless_projection_when_subspace_contains_data() {
        // Points on the line 0.5 + t (1, 1, 0) / sqrt 2.
        let cols: Vec<Vec<f64>> = [-0.3, -0.1, 0.0, 0.2, 0.3]
            .iter()
            .map(|t| vec![0.5 + t / 2f64.sqrt(), 0.5 + t / 2f64.sqrt(), 0.5])
            .collect();
        let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        let data = dataset(&refs);
        let cov = PrivateCovariance::zero_noise(&data);
        let p = project_with_offset(&data, &cov, 1, &DVector::zeros(3)).unwrap();
        let z = data.centered();
        assert!((z - p.lift(&p.coords)).norm() <= 1e-10);
        for c in p.coords.column_iter() {
            assert!(c.norm() <= p.radius);
        }
    }
}
