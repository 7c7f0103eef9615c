//! Log-correlated Gaussian fields: kernels, grid and point samplers, binary cache.

mod circulant;
mod covariance;
mod grid;
pub mod io;
mod points;

pub use circulant::{sample_field_grid, CirculantSampler, CoupledLevelsSampler, Embedding, CLIP_TOLERANCE, MAX_TORUS_CELLS};
pub use covariance::{band_covariance, covariance_mff, cutoff_covariance, CovarianceSpec, Dim};
pub use grid::{FieldSample, GridSpec};
pub use points::{sample_field_at_points, ConditionalPointSampler, PointSampler, MAX_POINTS};
