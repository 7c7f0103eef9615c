//! Boundary Liouville quantum gravity on the line.
//!
//! Everything here is explicit once the map `φ(x) = M([0, x])` is tabulated:
//! the quantum distance is `|φ(x) - φ(y)|`, the boundary Liouville Brownian
//! motion is `φ⁻¹(φ(x) + B_t)` and the heat kernel with respect to `M` is the
//! Gaussian kernel in the `φ` coordinate.

use std::io::Write;

use serde::Serialize;

use crate::chaos::{ChaosMeasure, Flavor};
use crate::error::{invalid, Error, Result};
use crate::field::Dim;
use crate::rng::{derive_seed, rng_from_seed, stream};
use crate::scalar::Real;
use crate::stats::ols;

/// Tolerance of the inverse in `φ`-space.
pub const INVERSE_TOL: f64 = 1e-12;

/// Width of the cell aggregates whose masses must be positive for a critical
/// realization to be accepted.
pub const CRITICAL_AGGREGATE: f64 = 1.0 / 16.0;

/// Piecewise-linear strictly increasing map given at knots.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotoneMap<T> {
    pub knots_x: Vec<T>,
    pub knots_phi: Vec<T>,
    pub gamma: T,
    pub flavor: Flavor,
}

impl<T: Real> MonotoneMap<T> {
    pub fn domain(&self) -> (T, T) {
        (self.knots_x[0], *self.knots_x.last().unwrap())
    }

    pub fn range(&self) -> (T, T) {
        (self.knots_phi[0], *self.knots_phi.last().unwrap())
    }

    /// `φ(x)` by linear interpolation.
    pub fn phi(&self, x: T) -> Result<T> {
        let (lo, hi) = self.domain();
        if !(x >= lo && x <= hi) {
            return Err(Error::OutOfRange { value: x.as_f64(), lo: lo.as_f64(), hi: hi.as_f64() });
        }
        Ok(interpolate(&self.knots_x, &self.knots_phi, x))
    }

    /// `φ⁻¹(y)`: bisection over the knots, then linear interpolation.
    pub fn inverse(&self, y: T) -> Result<T> {
        let (lo, hi) = self.range();
        if !(y >= lo && y <= hi) {
            return Err(Error::OutOfRange { value: y.as_f64(), lo: lo.as_f64(), hi: hi.as_f64() });
        }
        Ok(interpolate(&self.knots_phi, &self.knots_x, y))
    }
}

/// Linear interpolation of `ys` against strictly increasing `xs` at `x` in range.
pub(crate) fn interpolate<T: Real>(xs: &[T], ys: &[T], x: T) -> T {
    // first index with xs[i] > x
    let i = xs.partition_point(|&k| k <= x);
    if i == 0 {
        return ys[0];
    }
    if i == xs.len() {
        return ys[xs.len() - 1];
    }
    let (x0, x1) = (xs[i - 1], xs[i]);
    let w = (x - x0) / (x1 - x0);
    if w == T::zero() {
        ys[i - 1]
    } else {
        ys[i - 1] + w * (ys[i] - ys[i - 1])
    }
}

/// Cumulative map `φ(x) = ∫₀ˣ dM` at the cell edges.
///
/// Subcritical measures must have positive cells. For the critical flavor the
/// masses come from the signed derivative form; a realization is rejected with
/// [`Error::NonMonotone`] if a cell aggregate of width 1/16 has nonpositive
/// mass, and inside accepted aggregates only knots strictly between the
/// aggregate endpoints' values are kept.
pub fn build_phi<T: Real>(measure: &ChaosMeasure<T>) -> Result<MonotoneMap<T>> {
    let g = &measure.grid;
    if g.dim != Dim::One {
        return Err(invalid("measure", "φ needs a measure on the line"));
    }
    if measure.flavor == Flavor::Bulk {
        return Err(invalid("flavor", "φ needs a boundary or critical boundary measure"));
    }
    let n = g.resolution;
    let (left, right) = (g.edge(0), g.edge(n));
    if !(left <= T::zero() && right >= T::zero()) {
        return Err(invalid("grid", format!("[{left}, {right}] does not contain 0")));
    }
    let masses = &measure.masses;
    if measure.flavor == Flavor::Boundary {
        if let Some(i) = masses.iter().position(|&m| !(m > T::zero())) {
            return Err(Error::NonMonotone { x: g.edge(i).as_f64(), mass: masses[i].as_f64() });
        }
    }
    let h = g.cell_size();
    // anchor: the edge at or just left of 0
    let i0 = ((-left) / h).floor().to_usize().unwrap_or(0).min(n);
    let mut cum = vec![T::zero(); n + 1];
    for i in i0 + 1..=n {
        cum[i] = cum[i - 1] + masses[i - 1];
    }
    for i in (0..i0).rev() {
        cum[i] = cum[i + 1] - masses[i];
    }
    let xs: Vec<T> = (0..=n).map(|i| g.edge(i)).collect();
    if measure.flavor == Flavor::CriticalBoundary {
        let block = ((T::lit(CRITICAL_AGGREGATE) / h).round().to_usize().unwrap_or(1)).max(1);
        return critical_knots(measure, &xs, &cum, block, i0);
    }
    // zero was strictly inside cell i0: shift so that the interpolated φ(0) vanishes
    if xs[i0] != T::zero() {
        let at0 = interpolate(&xs, &cum, T::zero());
        for c in cum.iter_mut() {
            *c = *c - at0;
        }
    }
    Ok(MonotoneMap { knots_x: xs, knots_phi: cum, gamma: measure.gamma, flavor: measure.flavor })
}

fn critical_knots<T: Real>(measure: &ChaosMeasure<T>, xs: &[T], cum: &[T], block: usize, i0: usize) -> Result<MonotoneMap<T>> {
    let n = xs.len() - 1;
    // aggregate boundaries aligned with the anchor knot
    let first = i0 % block;
    let mut bounds: Vec<usize> = Vec::new();
    if first != 0 {
        bounds.push(0);
    }
    bounds.extend((first..=n).step_by(block));
    if *bounds.last().unwrap() != n {
        bounds.push(n);
    }
    for w in bounds.windows(2) {
        if !(cum[w[1]] > cum[w[0]]) {
            return Err(Error::NonMonotone { x: xs[w[0]].as_f64(), mass: (cum[w[1]] - cum[w[0]]).as_f64() });
        }
    }
    let mut kx = vec![xs[0]];
    let mut kp = vec![cum[0]];
    for w in bounds.windows(2) {
        let top = cum[w[1]];
        for i in w[0] + 1..w[1] {
            if cum[i] > *kp.last().unwrap() && cum[i] < top {
                kx.push(xs[i]);
                kp.push(cum[i]);
            }
        }
        kx.push(xs[w[1]]);
        kp.push(top);
    }
    let mut map = MonotoneMap { knots_x: kx, knots_phi: kp, gamma: measure.gamma, flavor: measure.flavor };
    if xs[i0] != T::zero() {
        let at0 = map.phi(T::zero())?;
        for p in map.knots_phi.iter_mut() {
            *p = *p - at0;
        }
    }
    Ok(map)
}

/// Inverse of the map, with range errors carrying the tabulated interval.
pub fn phi_inverse<T: Real>(map: &MonotoneMap<T>, y: T) -> Result<T> {
    map.inverse(y)
}

/// Quantum distance `|φ(x) - φ(y)|`.
pub fn boundary_distance<T: Real>(map: &MonotoneMap<T>, x: T, y: T) -> Result<T> {
    Ok((map.phi(x)? - map.phi(y)?).abs())
}

/// Boundary Liouville Brownian motion `φ⁻¹(φ(x0) + B_t)` at sorted `times`.
///
/// Leaving the tabulated range gives [`Error::RangeExit`] with the first
/// offending time.
pub fn boundary_lbm_path<T: Real>(map: &MonotoneMap<T>, x0: T, times: &[T], seed: u64) -> Result<Vec<T>> {
    if times.windows(2).any(|w| !(w[1] >= w[0])) || times.first().is_some_and(|&t| t < T::zero()) {
        return Err(invalid("times", "times must be sorted and nonnegative"));
    }
    let base = map.phi(x0)?;
    let (lo, hi) = map.range();
    let mut rng = rng_from_seed(derive_seed(seed, stream::PATH));
    let mut b = T::zero();
    let mut prev = T::zero();
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let dt = t - prev;
        if dt > T::zero() {
            b = b + dt.sqrt() * T::std_normal(&mut rng);
        }
        prev = t;
        let target = base + b;
        if !(target >= lo && target <= hi) {
            return Err(Error::RangeExit { time: t.as_f64(), position: target.as_f64(), lo: lo.as_f64(), hi: hi.as_f64() });
        }
        out.push(if t == T::zero() { x0 } else { map.inverse(target)? });
    }
    Ok(out)
}

/// `p_t(x, y) = (2πt)^{-1/2} exp(-d(x,y)²/(2t))` with respect to `M`.
pub fn boundary_heat_kernel<T: Real>(map: &MonotoneMap<T>, x: T, y: T, t: T) -> Result<T> {
    if !(t > T::zero()) || !t.is_finite() {
        return Err(invalid("t", format!("t = {t} must be positive")));
    }
    let d = boundary_distance(map, x, y)?;
    let two = T::lit(2.0);
    Ok((-(d * d) / (two * t)).exp() / (two * T::PI() * t).sqrt())
}

/// `-2 ×` the OLS slope of `ln p_t(x, x)` against `ln t`.
pub fn boundary_spectral_dimension<T: Real>(map: &MonotoneMap<T>, x: T, t_grid: &[T]) -> Result<T> {
    if t_grid.len() < 4 {
        return Err(invalid("t_grid", "need at least 4 times"));
    }
    if t_grid.iter().any(|&t| !(t > T::zero() && t.is_finite())) {
        return Err(invalid("t_grid", "times must be positive"));
    }
    if t_grid.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(invalid("t_grid", "times must be strictly decreasing"));
    }
    if t_grid[0] / t_grid[t_grid.len() - 1] < T::lit(100.0) * (T::one() - T::lit(1e-9)) {
        return Err(invalid("t_grid", "times must span at least two decades"));
    }
    let lx: Vec<T> = t_grid.iter().map(|t| t.ln()).collect();
    let mut ly = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        ly.push(boundary_heat_kernel(map, x, x, t)?.ln());
    }
    Ok(-T::lit(2.0) * ols(&lx, &ly).slope)
}

/// CSV `replicate,t,position`.
pub fn write_paths_csv<T: Real, W: Write>(mut w: W, times: &[T], paths: &[Vec<T>]) -> Result<()> {
    writeln!(w, "replicate,t,position")?;
    for (r, path) in paths.iter().enumerate() {
        for (t, x) in times.iter().zip(path) {
            writeln!(w, "{},{},{}", r, t.as_f64(), x.as_f64())?;
        }
    }
    Ok(())
}

/// CSV `t,x,y,p` over all combinations.
pub fn write_heat_kernel_csv<T: Real, W: Write>(mut w: W, map: &MonotoneMap<T>, times: &[T], points: &[(T, T)]) -> Result<()> {
    writeln!(w, "t,x,y,p")?;
    for &t in times {
        for &(x, y) in points {
            let p = boundary_heat_kernel(map, x, y, t)?;
            writeln!(w, "{},{},{},{}", t.as_f64(), x.as_f64(), y.as_f64(), p.as_f64())?;
        }
    }
    Ok(())
}
