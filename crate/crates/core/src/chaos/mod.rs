//! Gaussian multiplicative chaos on grids.

mod ballmass;
mod measure;

pub use ballmass::{ball_mass_exponent, multifractal_beta, BallMassReport, Region};
pub use measure::{critical_boundary_measure, gmc_measure, ChaosMeasure, CriticalMeasures, Flavor};
