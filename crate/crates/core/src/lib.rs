//! Simulation toolkit for Liouville quantum gravity.

pub mod boundary;
pub mod bridge;
pub mod chaos;
pub mod error;
pub mod experiment;
pub mod field;
pub mod lbm2d;
pub mod quad;
pub mod rng;
pub mod scalar;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::{Point2, Real};

/// Double-precision aliases of the generic types.
pub mod double {
    pub type FieldSample = crate::field::FieldSample<f64>;
    pub type ChaosMeasure = crate::chaos::ChaosMeasure<f64>;
    pub type MonotoneMap = crate::boundary::MonotoneMap<f64>;
    pub type TransformEstimate = crate::bridge::TransformEstimate<f64>;
    pub type WalkPath = crate::lbm2d::WalkPath<f64>;
}
