//! End-to-end generator: private covariance, noisy projection, a synthetic
//! measure in the projected coordinates, lift back to `d` dimensions and clamp.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_budget, Error, Result};
use crate::metrics::{projection_diagnostics, ProjectionDiagnostics};
use crate::noise::{sample_laplace, SeededGenerator};
use crate::pca::{
    centered_covariance, mean_noise_scale, noisy_projection, private_covariance, project_with_offset, select_dimension,
    Dataset, PrivateCovariance, ProjectedDataset,
};
use crate::pmm::{self, SampleMode};
use crate::psmm::{self, DeltaMode, DEFAULT_ANCHOR_CAP};

/// Target dimension of the projection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DimensionChoice {
    Fixed(usize),
    /// First spectral drop of the released covariance below `tau`.
    Auto {
        tau: f64,
    },
}

impl Default for DimensionChoice {
    fn default() -> Self {
        DimensionChoice::Auto { tau: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subroutine {
    Pmm,
    Psmm,
    /// PMM for d' <= 2, PSMM above.
    #[default]
    Auto,
}

impl Subroutine {
    pub fn resolve(self, d_prime: usize) -> SubroutineKind {
        match self {
            Subroutine::Pmm => SubroutineKind::Pmm,
            Subroutine::Psmm => SubroutineKind::Psmm,
            Subroutine::Auto if d_prime <= 2 => SubroutineKind::Pmm,
            Subroutine::Auto => SubroutineKind::Psmm,
        }
    }
}

impl std::str::FromStr for Subroutine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pmm" => Ok(Subroutine::Pmm),
            "psmm" => Ok(Subroutine::Psmm),
            "auto" => Ok(Subroutine::Auto),
            _ => Err(Error::param("subroutine", format!("expected pmm, psmm or auto, got {s:?}"))),
        }
    }
}

/// The subroutine actually run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubroutineKind {
    Pmm,
    Psmm,
}

/// How the total budget is divided between the mechanisms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BudgetSplit {
    /// Covariance, projection and subroutine at epsilon/3 each; the private
    /// mean saved by the projection is reused for the add-back.
    #[default]
    Three,
    /// Same three stages at epsilon/4 plus a fresh private mean for the add-back.
    Four,
}

impl std::str::FromStr for BudgetSplit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "three" => Ok(BudgetSplit::Three),
            "four" => Ok(BudgetSplit::Four),
            _ => Err(Error::param("budget-split", format!("expected three or four, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub epsilon: f64,
    pub d_prime: DimensionChoice,
    pub subroutine: Subroutine,
    pub seed: u64,
    pub budget_split: BudgetSplit,
    pub delta_mode: DeltaMode,
    pub sample_mode: SampleMode,
    pub anchor_cap: usize,
    /// Skips every noise draw. The output is not private.
    pub zero_noise: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            epsilon: 1.0,
            d_prime: DimensionChoice::default(),
            subroutine: Subroutine::default(),
            seed: 0,
            budget_split: BudgetSplit::default(),
            delta_mode: DeltaMode::default(),
            sample_mode: SampleMode::default(),
            anchor_cap: DEFAULT_ANCHOR_CAP,
            zero_noise: false,
        }
    }
}

impl PipelineConfig {
    pub fn new(epsilon: f64) -> Self {
        PipelineConfig { epsilon, ..Default::default() }
    }

    /// Stage budgets in pipeline order. They add up to `epsilon` exactly when
    /// summed left to right.
    pub fn stage_budgets(&self) -> Result<Vec<(Stage, f64)>> {
        check_budget(self.epsilon)?;
        let eps = self.epsilon;
        Ok(match self.budget_split {
            BudgetSplit::Three => {
                let part = eps / 3.0;
                vec![(Stage::Covariance, part), (Stage::Projection, part), (Stage::Subroutine, eps - (part + part))]
            }
            BudgetSplit::Four => {
                let part = eps / 4.0;
                vec![
                    (Stage::Covariance, part),
                    (Stage::Projection, part),
                    (Stage::Subroutine, part),
                    (Stage::AddBack, eps - (part + part + part)),
                ]
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Covariance,
    Projection,
    Subroutine,
    AddBack,
}

impl Stage {
    fn label(self) -> &'static str {
        match self {
            Stage::Covariance => "covariance",
            Stage::Projection => "projection",
            Stage::Subroutine => "subroutine",
            Stage::AddBack => "add-back",
        }
    }
}

/// Address of the random sub-stream a stage drew from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamId {
    pub label: String,
    pub seed: u64,
    pub stream: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub epsilon: f64,
    /// Laplace scale of the stage's noise. For PMM this is the root level and
    /// `level_scales` in the subroutine details lists all of them.
    pub noise_scale: Option<f64>,
    pub stream: StreamId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SubroutineDetails {
    Pmm { depth: u32, level_scales: Vec<f64>, max_leaf_linf_radius: f64 },
    Psmm { delta: f64, anchors: usize, objective: f64, pricing_rounds: usize, pivots: usize },
}

/// Distance between the centered data and its private projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionError {
    /// sqrt((1/n) sum ||(X_i - mean) - V V^T (X_i - mean - lambda)||^2), an
    /// upper bound on the 2-Wasserstein distance through the identity coupling.
    pub coupled_w2: f64,
    /// sqrt(2 sum_{i > d'} sigma_i(M)).
    pub tail_term: f64,
}

/// Everything needed to audit and replay one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub epsilon: f64,
    pub private: bool,
    pub stages: Vec<StageRecord>,
    pub d_prime: usize,
    pub d_prime_auto: bool,
    pub subroutine: SubroutineKind,
    /// Released covariance spectrum, non-increasing.
    pub spectrum: Vec<f64>,
    pub radius: f64,
    pub details: SubroutineDetails,
    /// Computed from the raw data; not covered by the privacy guarantee.
    pub diagnostics: ProjectionDiagnostics,
    pub projection_error: ProjectionError,
    pub warnings: Vec<String>,
}

impl Provenance {
    pub fn budget_total(&self) -> f64 {
        self.stages.iter().map(|s| s.epsilon).sum()
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    /// `d x m`, every entry in `[0, 1]`.
    pub points: DMatrix<f64>,
    /// Points before clamping; they lie on the private affine subspace.
    pub unclamped: DMatrix<f64>,
    /// Mean added back to the lifted coordinates.
    pub offset: DVector<f64>,
    pub basis: DMatrix<f64>,
    pub provenance: Provenance,
}

impl SyntheticDataset {
    pub fn len(&self) -> usize {
        self.points.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.points.ncols() == 0
    }
}

pub const EMPTY_OUTPUT_WARNING: &str = "empty-output: the subroutine released a total count of zero";
pub const NON_PRIVATE_WARNING: &str = "zero-noise: no noise was added, the output is not private";

fn stream_of(gen: &SeededGenerator, label: &str) -> StreamId {
    StreamId { label: label.to_string(), seed: gen.seed(), stream: gen.stream() }
}

/// Runs the whole generator on `data`.
pub fn generate(data: &Dataset, config: &PipelineConfig) -> Result<SyntheticDataset> {
    let budgets = config.stage_budgets()?;
    let (n, d) = (data.len(), data.dim());
    let regime = config.epsilon * n as f64;
    if regime <= 1.0 {
        return Err(Error::InvalidRegime(regime));
    }
    if let DimensionChoice::Fixed(k) = config.d_prime {
        if k == 0 || k > d {
            return Err(Error::InvalidDimension { got: k, min: 1, max: d });
        }
    }
    let budget = |stage: Stage| budgets.iter().find(|b| b.0 == stage).map(|b| b.1);
    let root = SeededGenerator::new(config.seed);
    let noise = !config.zero_noise;
    let mut stages = Vec::new();

    // Covariance.
    let eps_cov = budget(Stage::Covariance).unwrap_or_default();
    let mut gen = root.split(Stage::Covariance.label());
    let stream = stream_of(&gen, Stage::Covariance.label());
    let cov = if noise { private_covariance(data, eps_cov, &mut gen)? } else { PrivateCovariance::zero_noise(data) };
    stages.push(StageRecord {
        stage: Stage::Covariance,
        epsilon: eps_cov,
        noise_scale: cov.noise_scale.map(|s| s.sigma()),
        stream,
    });

    let (d_prime, d_prime_auto) = match config.d_prime {
        DimensionChoice::Fixed(k) => (k, false),
        DimensionChoice::Auto { tau } => (select_dimension(&cov.spectrum, tau, d)?, true),
    };

    // Projection.
    let eps_proj = budget(Stage::Projection).unwrap_or_default();
    let mut gen = root.split(Stage::Projection.label());
    let stream = stream_of(&gen, Stage::Projection.label());
    let projected = if noise {
        noisy_projection(data, &cov, d_prime, eps_proj, &mut gen)?
    } else {
        project_with_offset(data, &cov, d_prime, &DVector::zeros(d))?
    };
    stages.push(StageRecord {
        stage: Stage::Projection,
        epsilon: eps_proj,
        noise_scale: projected.mean_noise_scale.map(|s| s.sigma()),
        stream,
    });

    // Subroutine.
    let eps_sub = budget(Stage::Subroutine).unwrap_or_default();
    let gen = root.split(Stage::Subroutine.label());
    let stream = stream_of(&gen, Stage::Subroutine.label());
    let subroutine = config.subroutine.resolve(d_prime);
    let (coords, details, root_scale) = match subroutine {
        SubroutineKind::Pmm => {
            let out = pmm::run(&projected.coords, projected.radius, eps_sub, noise, config.sample_mode, &gen)?;
            let details = SubroutineDetails::Pmm {
                depth: out.tree.depth(),
                level_scales: out.scales.iter().map(|s| s.sigma()).collect(),
                max_leaf_linf_radius: out.tree.max_leaf_linf_radius(),
            };
            (out.coords, details, out.scales.first().map(|s| s.sigma()))
        }
        SubroutineKind::Psmm => {
            let delta = psmm::lattice_delta(d, d_prime, eps_sub, n, config.delta_mode, projected.radius)?;
            let out = psmm::run(&projected.coords, projected.radius, delta, eps_sub, noise, config.anchor_cap, &gen)?;
            let details = SubroutineDetails::Psmm {
                delta,
                anchors: out.lattice.len(),
                objective: out.projection.objective,
                pricing_rounds: out.projection.pricing_rounds,
                pivots: out.projection.pivots,
            };
            (out.coords, details, Some(1.0 / eps_sub))
        }
    };
    stages.push(StageRecord {
        stage: Stage::Subroutine,
        epsilon: eps_sub,
        noise_scale: if noise { root_scale } else { None },
        stream,
    });

    // Mean add-back.
    let offset = match budget(Stage::AddBack) {
        None => projected.private_mean.clone(),
        Some(eps_add) => {
            let mut gen = root.split(Stage::AddBack.label());
            let stream = stream_of(&gen, Stage::AddBack.label());
            let (offset, scale) = if noise {
                let scale = mean_noise_scale(d, n, eps_add)?;
                let lambda = DVector::from_fn(d, |_, _| sample_laplace(scale, &mut gen));
                (data.mean() + lambda, Some(scale.sigma()))
            } else {
                (data.mean(), None)
            };
            stages.push(StageRecord { stage: Stage::AddBack, epsilon: eps_add, noise_scale: scale, stream });
            offset
        }
    };
    let mut unclamped = projected.lift(&coords);
    for mut c in unclamped.column_iter_mut() {
        c += &offset;
    }
    let points = clamp(&unclamped);

    let mut warnings = Vec::new();
    if config.zero_noise {
        warnings.push(NON_PRIVATE_WARNING.to_string());
    }
    if points.ncols() == 0 {
        log::warn!("subroutine released an empty synthetic dataset");
        warnings.push(EMPTY_OUTPUT_WARNING.to_string());
    }
    let (diagnostics, projection_error) = diagnose(data, &cov, &projected);
    if !(diagnostics.stability_holds && diagnostics.weyl_holds) {
        log::warn!("projection diagnostics failed: {diagnostics:?}");
    }

    Ok(SyntheticDataset {
        points,
        unclamped,
        offset,
        basis: projected.basis.clone(),
        provenance: Provenance {
            seed: config.seed,
            epsilon: config.epsilon,
            private: noise,
            stages,
            d_prime,
            d_prime_auto,
            subroutine,
            spectrum: cov.spectrum.clone(),
            radius: projected.radius,
            details,
            diagnostics,
            projection_error,
            warnings,
        },
    })
}

/// Stability diagnostics for the released covariance. The perturbation is
/// taken relative to `(1/n) Z Z^T`, so it also absorbs the `1/(n-1)`
/// normalisation of the covariance.
fn diagnose(
    data: &Dataset,
    cov: &PrivateCovariance,
    projected: &ProjectedDataset,
) -> (ProjectionDiagnostics, ProjectionError) {
    let z = data.centered();
    let n = data.len() as f64;
    let a_eff = &cov.matrix - &z * z.transpose() / n;
    let diagnostics = projection_diagnostics(&z, &a_eff, &projected.basis, projected.dim());

    let lambda = &projected.private_mean - data.mean();
    let mut shifted = z.clone();
    for mut c in shifted.column_iter_mut() {
        c -= &lambda;
    }
    let residual = &z - &projected.basis * (projected.basis.transpose() * shifted);
    let tail: f64 = centered_covariance(data).spectrum().iter().skip(projected.dim()).map(|s| s.max(0.0)).sum();
    let error = ProjectionError { coupled_w2: (residual.norm_squared() / n).sqrt(), tail_term: (2.0 * tail).sqrt() };
    (diagnostics, error)
}

/// Coordinatewise metric projection onto `[0, 1]^d`.
pub fn clamp(points: &DMatrix<f64>) -> DMatrix<f64> {
    points.map(|x| x.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn on_plane(n: usize) -> Dataset {
        // Points on the plane x2 = 0.5 inside [0.2, 0.8]^2 x {0.5}.
        let mut gen = SeededGenerator::new(3);
        let pts = DMatrix::from_fn(3, n, |r, _| if r == 2 { 0.5 } else { gen.uniform_in(0.2, 0.8) });
        Dataset::new(pts).unwrap()
    }

    #[test]
    fn clamp_examples() {
        let p = DMatrix::from_vec(3, 1, vec![-0.2, 0.5, 1.3]);
        assert_eq!(clamp(&p).as_slice(), &[0.0, 0.5, 1.0]);
        let q = DMatrix::from_vec(2, 1, vec![0.0, 1.0]);
        assert_eq!(clamp(&q), q);
    }

    #[test]
    fn three_way_budgets() {
        let cfg = PipelineConfig::new(2.0);
        let b = cfg.stage_budgets().unwrap();
        assert_eq!(b.len(), 3);
        for (_, e) in &b {
            assert!((e - 2.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(b.iter().map(|x| x.1).sum::<f64>(), 2.0);
    }

    #[test]
    fn subroutine_resolution() {
        assert_eq!(Subroutine::Auto.resolve(1), SubroutineKind::Pmm);
        assert_eq!(Subroutine::Auto.resolve(2), SubroutineKind::Pmm);
        assert_eq!(Subroutine::Auto.resolve(3), SubroutineKind::Psmm);
        assert_eq!(Subroutine::Pmm.resolve(5), SubroutineKind::Pmm);
    }

    #[test]
    fn zero_noise_run_stays_on_the_plane() {
        let data = on_plane(200);
        let cfg = PipelineConfig {
            d_prime: DimensionChoice::Fixed(2),
            zero_noise: true,
            sample_mode: SampleMode::LeafCenter,
            ..PipelineConfig::new(1.0)
        };
        let out = generate(&data, &cfg).unwrap();
        assert!(!out.provenance.private);
        assert_eq!(out.provenance.subroutine, SubroutineKind::Pmm);
        assert_eq!(out.len(), 200);
        for c in out.points.column_iter() {
            assert!((c[2] - 0.5).abs() < 1e-12);
        }
        assert!(out.provenance.diagnostics.stability_holds);
    }

    #[test]
    fn rejects_small_regime() {
        let data = on_plane(4);
        assert!(matches!(generate(&data, &PipelineConfig::new(0.2)), Err(Error::InvalidRegime(_))));
    }
}
