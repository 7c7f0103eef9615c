use serde::Serialize;

use super::measure::{ChaosMeasure, Flavor};
use crate::error::{invalid, Result};
use crate::field::Dim;
use crate::scalar::{Point2, Real};
use crate::stats::ols;

/// Axis-aligned box `[lo, hi]`; 1d measures use the first coordinate only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Region<T> {
    pub lo: Point2<T>,
    pub hi: Point2<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallMassReport<T> {
    pub radii: Vec<T>,
    /// `sup_x M(B(x, r))` over cell centers in the region, per radius.
    pub sup_masses: Vec<T>,
    /// Least-squares slope of `ln sup_mass` against `ln r`.
    pub fitted_exponent: T,
    pub r_squared: T,
    /// Almost-sure lower bound exponent `(√d - a/√2)²`; `2(1 - γ/2)²` for bulk chaos.
    pub beta: T,
}

/// `(√d - a/√2)²` with `a` the field coefficient of the flavor.
pub fn multifractal_beta<T: Real>(gamma: T, flavor: Flavor) -> T {
    let two = T::lit(2.0);
    match flavor {
        Flavor::Bulk => two * (T::one() - gamma / two) * (T::one() - gamma / two),
        Flavor::Boundary | Flavor::CriticalBoundary => {
            let a = gamma / two;
            let b = T::one() - a / T::SQRT_2();
            b * b
        }
    }
}

/// Sup over grid centers of the mass of grid balls (cells whose centers lie
/// within `r`), with an OLS exponent fit across radii.
pub fn ball_mass_exponent<T: Real>(measure: &ChaosMeasure<T>, radii: &[T], region: Region<T>) -> Result<BallMassReport<T>> {
    if radii.len() < 4 {
        return Err(invalid("radii", "need at least 4 radii"));
    }
    if radii.iter().any(|&r| !(r > T::zero() && r < T::one())) {
        return Err(invalid("radii", "radii must lie in (0, 1)"));
    }
    let rmin = radii.iter().copied().fold(T::infinity(), T::min);
    let rmax = radii.iter().copied().fold(T::zero(), T::max);
    if rmax < T::lit(10.0) * rmin * (T::one() - T::lit(1e-9)) {
        return Err(invalid("radii", "radii must span at least a decade"));
    }
    let g = &measure.grid;
    let axes = g.dim.as_usize();
    for a in 0..axes {
        if region.lo[a] > region.hi[a] {
            return Err(invalid("region", "empty region"));
        }
        if region.lo[a] - rmax < g.origin[a] || region.hi[a] + rmax > g.origin[a] + g.extent {
            return Err(invalid("region", "region plus the largest radius exceeds the sampled grid"));
        }
    }
    let n = g.resolution;
    let h = g.cell_size();
    let half = T::lit(0.5);
    // cell index range whose centers are inside the region
    let span = |a: usize| -> (usize, usize) {
        let lo = ((region.lo[a] - g.origin[a]) / h - half).ceil().max(T::zero());
        let hi = ((region.hi[a] - g.origin[a]) / h - half).floor().min(T::nat(n - 1));
        (lo.to_usize().unwrap_or(0), hi.to_usize().unwrap_or(0))
    };
    let (x0, x1) = span(0);
    let rows = match g.dim {
        Dim::One => 1,
        Dim::Two => n,
    };
    // prefix[row][i] = mass of cells 0..i in that row
    let prefix: Vec<Vec<T>> = (0..rows)
        .map(|row| {
            let mut p = Vec::with_capacity(n + 1);
            p.push(T::zero());
            let mut acc = T::zero();
            for ix in 0..n {
                acc = acc + measure.masses[row * n + ix];
                p.push(acc);
            }
            p
        })
        .collect();
    let row_sum = |row: usize, a: usize, b: usize| prefix[row][b + 1] - prefix[row][a];
    let mut sup_masses = Vec::with_capacity(radii.len());
    for &r in radii {
        let rc = r / h; // radius in cells
        let reach = rc.floor().to_usize().unwrap_or(0);
        let mut best = T::neg_infinity();
        match g.dim {
            Dim::One => {
                for cx in x0..=x1 {
                    let a = cx.saturating_sub(reach);
                    let b = (cx + reach).min(n - 1);
                    best = best.max(row_sum(0, a, b));
                }
            }
            Dim::Two => {
                let (y0, y1) = span(1);
                let widths: Vec<usize> = (0..=reach)
                    .map(|dy| {
                        let w2 = rc * rc - T::nat(dy * dy);
                        let mut w = w2.max(T::zero()).sqrt().floor().to_usize().unwrap_or(0);
                        while (w + 1) * (w + 1) + dy * dy <= (rc * rc).floor().to_usize().unwrap_or(0) {
                            w += 1;
                        }
                        w
                    })
                    .collect();
                for cy in y0..=y1 {
                    for cx in x0..=x1 {
                        let mut s = T::zero();
                        for (dy, &w) in widths.iter().enumerate() {
                            let a = cx.saturating_sub(w);
                            let b = (cx + w).min(n - 1);
                            if cy + dy < n {
                                s = s + row_sum(cy + dy, a, b);
                            }
                            if dy > 0 && cy >= dy {
                                s = s + row_sum(cy - dy, a, b);
                            }
                        }
                        best = best.max(s);
                    }
                }
            }
        }
        sup_masses.push(best);
    }
    let lx: Vec<T> = radii.iter().map(|r| r.ln()).collect();
    let ly: Vec<T> = sup_masses.iter().map(|m| m.max(T::min_positive_value()).ln()).collect();
    let fit = ols(&lx, &ly);
    Ok(BallMassReport {
        radii: radii.to_vec(),
        sup_masses,
        fitted_exponent: fit.slope,
        r_squared: fit.r_squared,
        beta: multifractal_beta(measure.gamma, measure.flavor),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GridSpec;
    use crate::stats::log_space;

    fn lebesgue(dim: Dim, n: usize) -> ChaosMeasure<f64> {
        let grid = GridSpec::new(dim, [0.0, 0.0], 1.0, n).unwrap();
        ChaosMeasure { grid, masses: vec![grid.cell_volume(); grid.n_cells()], gamma: 0.0, flavor: Flavor::Bulk, eps: 0.01 }
    }

    #[test]
    fn beta_values() {
        assert_eq!(multifractal_beta(1.0, Flavor::Bulk), 0.5);
        assert_eq!(multifractal_beta(0.0, Flavor::Bulk), 2.0);
        assert!((multifractal_beta(0.0, Flavor::Boundary) - 1.0f64).abs() < 1e-15);
        assert!(multifractal_beta(2.0 * 2f64.sqrt(), Flavor::CriticalBoundary).abs() < 1e-15);
    }

    #[test]
    fn lebesgue_bulk_exponent_two() {
        let m = lebesgue(Dim::Two, 512);
        let radii = log_space(0.02, 0.2, 5);
        let rep = ball_mass_exponent(&m, &radii, Region { lo: [0.3, 0.3], hi: [0.7, 0.7] }).unwrap();
        assert!((rep.fitted_exponent - 2.0).abs() < 0.1, "{}", rep.fitted_exponent);
        for (r, s) in rep.radii.iter().zip(&rep.sup_masses) {
            let disk = std::f64::consts::PI * r * r;
            assert!((s - disk).abs() / disk < 0.1);
        }
        assert!(rep.sup_masses.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn lebesgue_line_exponent_one() {
        let mut m = lebesgue(Dim::One, 4096);
        m.flavor = Flavor::Boundary;
        let radii = log_space(0.01, 0.2, 6);
        let rep = ball_mass_exponent(&m, &radii, Region { lo: [0.3, 0.0], hi: [0.7, 0.0] }).unwrap();
        assert!((rep.fitted_exponent - 1.0).abs() < 0.1);
    }

    #[test]
    fn region_must_fit() {
        let m = lebesgue(Dim::Two, 64);
        let radii = log_space(0.02, 0.2, 4);
        assert!(ball_mass_exponent(&m, &radii, Region { lo: [0.1, 0.3], hi: [0.7, 0.7] }).is_err());
        assert!(ball_mass_exponent(&m, &radii[..3], Region { lo: [0.3, 0.3], hi: [0.7, 0.7] }).is_err());
        assert!(ball_mass_exponent(&m, &log_space(0.05, 0.2, 4), Region { lo: [0.3, 0.3], hi: [0.7, 0.7] }).is_err());
    }
}
