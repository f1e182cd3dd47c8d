//! Differentially private synthetic data for point clouds that lie near a
//! low-dimensional affine subspace of `[0, 1]^d`.

pub mod audit;
pub mod cli;
pub mod error;
pub mod flow;
pub mod io;
pub mod kdtree;
pub mod metrics;
pub mod noise;
pub mod pca;
pub mod pipeline;
pub mod planted;
pub mod pmm;
pub mod psmm;
pub mod record;
pub mod sweep;

pub use error::{Error, Result};
