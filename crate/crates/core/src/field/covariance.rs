//! Massive free field covariance and its cutoff family.
//!
//! All kernels are written as the scale integral
//! `∫ exp(-m²u/2 - r²/(2u)) du/(2u)` over some range of `u`; the cutoff
//! field at scale ε keeps only `u ≥ ε²`. The integral is evaluated in
//! `v = ln u`, where the integrand decays double-exponentially at both ends.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quad::integrate;
use crate::scalar::Real;

/// Spatial dimension of a field: the plane, or the trace on the real line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dim {
    One,
    Two,
}

impl Dim {
    pub fn as_usize(self) -> usize {
        match self {
            Dim::One => 1,
            Dim::Two => 2,
        }
    }

    pub fn from_usize(d: usize) -> Result<Self> {
        match d {
            1 => Ok(Dim::One),
            2 => Ok(Dim::Two),
            _ => Err(invalid("dimension", format!("{d} not in {{1, 2}}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSpec<T> {
    pub dimension: Dim,
    pub mass: T,
    /// ε; zero means the uncut kernel.
    pub cutoff: T,
}

impl<T: Real> CovarianceSpec<T> {
    pub fn new(dimension: Dim, mass: T, cutoff: T) -> Result<Self> {
        if !(mass.is_finite() && mass > T::zero()) {
            return Err(invalid("mass", format!("m = {mass} must be positive and finite")));
        }
        if !(cutoff.is_finite() && cutoff >= T::zero()) {
            return Err(invalid("cutoff", format!("ε = {cutoff} must be ≥ 0 and finite")));
        }
        Ok(Self { dimension, mass, cutoff })
    }

    /// Cutoff field variance σ_ε² = K_ε(0).
    pub fn variance(&self) -> Result<T> {
        cutoff_covariance(T::zero(), self)
    }
}

/// Integrand cut where the exponent passes this value.
const EXP_CUT: f64 = 745.0;

/// `∫_{u_lo}^{u_hi} exp(-m²u/2 - r²/(2u)) du/(2u)` with `u_hi = None` meaning ∞.
pub(crate) fn scale_integral<T: Real>(r: T, m: T, u_lo: T, u_hi: Option<T>) -> T {
    let half = T::lit(0.5);
    let cut = T::lit(2.0 * EXP_CUT);
    let m2 = m * m;
    let r2 = r * r;
    // beyond these the integrand is below e^{-745}
    let mut v_hi = (cut / m2).ln();
    if let Some(h) = u_hi {
        v_hi = v_hi.min(h.ln());
    }
    let mut v_lo = if u_lo > T::zero() { u_lo.ln() } else { T::neg_infinity() };
    if r2 > T::zero() {
        v_lo = v_lo.max((r2 / cut).ln());
    }
    if !(v_lo < v_hi) {
        return T::zero();
    }
    let f = |v: T| {
        let u = v.exp();
        half * (-(half * m2 * u) - half * r2 / u).exp()
    };
    // The peak sits near v = ln(r/m); splitting there keeps the adaptive
    // rule from missing a narrow bump on a long interval.
    let peak = if r > T::zero() { (r / m).ln() } else { v_lo };
    let tol_abs = T::lit(1e-15).max(T::EPS);
    let tol_rel = T::lit(1e-13).max(T::EPS * T::lit(16.0));
    let mut total = T::zero();
    let mut edges = vec![v_lo];
    if peak > v_lo && peak < v_hi {
        edges.push(peak);
    }
    edges.push(v_hi);
    for w in edges.windows(2) {
        total = total
            + integrate(f, w[0], w[1], tol_abs, tol_rel)
                .map(|q| q.value)
                .unwrap_or_else(|_| T::nan());
    }
    total
}

fn check_r<T: Real>(r: T) -> Result<()> {
    if !r.is_finite() {
        return Err(Error::NonFinite(format!("distance r = {r}")));
    }
    if r < T::zero() {
        return Err(invalid("r", format!("distance {r} is negative")));
    }
    Ok(())
}

/// Massive free field Green function `G_m(r)`; `+∞` at `r = 0`.
pub fn covariance_mff<T: Real>(r: T, m: T) -> Result<T> {
    check_r(r)?;
    if !(m.is_finite() && m > T::zero()) {
        return Err(invalid("mass", format!("m = {m} must be positive and finite")));
    }
    if r == T::zero() {
        return Ok(T::infinity());
    }
    Ok(scale_integral(r, m, T::zero(), None))
}

/// Cutoff kernel `K_ε(r) = ∫_{ε²}^∞ exp(-m²u/2 - r²/(2u)) du/(2u)`.
pub fn cutoff_covariance<T: Real>(r: T, spec: &CovarianceSpec<T>) -> Result<T> {
    check_r(r)?;
    if spec.cutoff <= T::zero() {
        return Err(invalid("cutoff", "ε = 0 has no finite cutoff kernel; use covariance_mff"));
    }
    Ok(scale_integral(r, spec.mass, spec.cutoff * spec.cutoff, None))
}

/// Covariance of the scale band `eps_fine ≤ √u < eps_coarse`, i.e.
/// `K_{eps_fine} - K_{eps_coarse}`.
pub fn band_covariance<T: Real>(r: T, m: T, eps_fine: T, eps_coarse: T) -> Result<T> {
    check_r(r)?;
    if !(eps_fine > T::zero() && eps_coarse > eps_fine) {
        return Err(invalid("band", format!("need 0 < {eps_fine} < {eps_coarse}")));
    }
    Ok(scale_integral(r, m, eps_fine * eps_fine, Some(eps_coarse * eps_coarse)))
}
