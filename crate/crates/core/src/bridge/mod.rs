//! Brownian bridges and the bridge decomposition of Liouville heat kernel
//! transforms.

mod coupling;
mod path;
mod transform;

pub use coupling::{couple_paths, write_coupling_csv, CoupledPaths};
pub use path::{bridge_clock, rn_weight, rn_weight_at, sample_bridge, BridgePath};
pub use transform::{
    box_transform, direct_box_functional, integral_transform, spectral_dimension_estimate, transform_table, write_transform_csv, FieldMode,
    LogGrowth, RefinementRow, SpectralDimension, TransformConfig, TransformEstimate, REFINEMENT_LEVELS,
};

use crate::scalar::{dist2, Point2, Real};
use crate::special::exp_integral_e1;

/// Constant in the two-branch bound on the occupation kernel.
pub const OCCUPATION_BOUND_CONSTANT: f64 = std::f64::consts::FRAC_1_PI;

/// `∫_0^{t/2} p_s(y, z) ds = E₁(|y-z|²/t)/(2π)`; `+∞` on the diagonal.
pub fn occupation_kernel_integral<T: Real>(y: Point2<T>, z: Point2<T>, t: T) -> crate::Result<T> {
    if !(t > T::zero() && t.is_finite()) {
        return Err(crate::error::invalid("t", format!("{t} must be positive")));
    }
    let u = dist2(y, z) / t;
    Ok(exp_integral_e1(u) / (T::lit(2.0) * T::PI()))
}

/// `C(1 + ln(√t/|y-z|))` inside the ball of radius `√t`, `C e^{-|y-z|²/t}` outside.
pub fn occupation_kernel_bound<T: Real>(y: Point2<T>, z: Point2<T>, t: T) -> T {
    let c = T::lit(OCCUPATION_BOUND_CONSTANT);
    let r2 = dist2(y, z);
    if r2 <= t {
        c * (T::one() + T::lit(0.5) * (t / r2).ln())
    } else {
        c * (-r2 / t).exp()
    }
}
