use serde::{Deserialize, Serialize};

use super::covariance::{CovarianceSpec, Dim};
use crate::error::{invalid, Result};
use crate::scalar::{Point2, Real};

/// Regular grid of `resolution` cells per axis covering `[origin, origin + extent]`
/// along each axis. One-dimensional grids ignore `origin[1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec<T> {
    pub dim: Dim,
    pub origin: Point2<T>,
    pub extent: T,
    pub resolution: usize,
}

impl<T: Real> GridSpec<T> {
    pub fn new(dim: Dim, origin: Point2<T>, extent: T, resolution: usize) -> Result<Self> {
        if !(extent.is_finite() && extent > T::zero()) {
            return Err(invalid("extent", format!("L = {extent} must be positive")));
        }
        if resolution < 2 || !resolution.is_power_of_two() {
            return Err(invalid("resolution", format!("n = {resolution} must be a power of two ≥ 2")));
        }
        if !(origin[0].is_finite() && origin[1].is_finite()) {
            return Err(invalid("origin", "non-finite origin"));
        }
        Ok(Self { dim, origin, extent, resolution })
    }

    pub fn line(x0: T, extent: T, resolution: usize) -> Result<Self> {
        Self::new(Dim::One, [x0, T::zero()], extent, resolution)
    }

    pub fn square(origin: Point2<T>, extent: T, resolution: usize) -> Result<Self> {
        Self::new(Dim::Two, origin, extent, resolution)
    }

    #[inline]
    pub fn cell_size(&self) -> T {
        self.extent / T::nat(self.resolution)
    }

    pub fn n_cells(&self) -> usize {
        match self.dim {
            Dim::One => self.resolution,
            Dim::Two => self.resolution * self.resolution,
        }
    }

    /// Lebesgue measure of one cell.
    pub fn cell_volume(&self) -> T {
        let h = self.cell_size();
        match self.dim {
            Dim::One => h,
            Dim::Two => h * h,
        }
    }

    /// Center of cell `idx` (row-major, `x` fastest).
    pub fn cell_center(&self, idx: usize) -> Point2<T> {
        let h = self.cell_size();
        let half = T::lit(0.5);
        match self.dim {
            Dim::One => [self.origin[0] + (T::nat(idx) + half) * h, T::zero()],
            Dim::Two => {
                let n = self.resolution;
                let (ix, iy) = (idx % n, idx / n);
                [self.origin[0] + (T::nat(ix) + half) * h, self.origin[1] + (T::nat(iy) + half) * h]
            }
        }
    }

    /// Coordinate of the left edge of 1d cell `i` (`i = n` gives the right end).
    pub fn edge(&self, i: usize) -> T {
        self.origin[0] + T::nat(i) * self.cell_size()
    }

    pub fn contains(&self, p: Point2<T>) -> bool {
        let inside = |c: T, o: T| c >= o && c <= o + self.extent;
        match self.dim {
            Dim::One => inside(p[0], self.origin[0]),
            Dim::Two => inside(p[0], self.origin[0]) && inside(p[1], self.origin[1]),
        }
    }
}

/// One realization of the cutoff field on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSample<T> {
    pub grid: GridSpec<T>,
    pub values: Vec<T>,
    /// σ_ε² = K_ε(0), used to normalize exponentials of the field.
    pub sigma2: T,
    pub spec: CovarianceSpec<T>,
    pub seed: u64,
    /// Whether the field lives on the torus spanned by the grid.
    pub periodic: bool,
    /// Relative spectral mass removed by eigenvalue clipping (0 when exact).
    pub clipped_mass: T,
}

impl<T: Real> FieldSample<T> {
    /// Bilinear interpolation between cell centers. Periodic fields wrap;
    /// others clamp to the outermost centers.
    pub fn value_at(&self, p: Point2<T>) -> T {
        let g = &self.grid;
        let n = g.resolution;
        let h = g.cell_size();
        let half = T::lit(0.5);
        // continuous index in center coordinates
        let locate = |c: T, o: T| -> (usize, usize, T) {
            let s = (c - o) / h - half;
            if self.periodic {
                let nf = T::nat(n);
                let s = s - (s / nf).floor() * nf;
                let i0 = s.floor();
                let w = s - i0;
                let i0 = i0.to_usize().unwrap_or(0).min(n - 1);
                (i0, (i0 + 1) % n, w)
            } else {
                let top = T::nat(n - 1);
                let s = s.max(T::zero()).min(top);
                let i0 = s.floor().to_usize().unwrap_or(0).min(n - 2);
                let w = s - T::nat(i0);
                (i0, i0 + 1, w)
            }
        };
        match g.dim {
            Dim::One => {
                let (i0, i1, w) = locate(p[0], g.origin[0]);
                self.values[i0] * (T::one() - w) + self.values[i1] * w
            }
            Dim::Two => {
                let (x0, x1, wx) = locate(p[0], g.origin[0]);
                let (y0, y1, wy) = locate(p[1], g.origin[1]);
                let v = &self.values;
                let a = v[y0 * n + x0] * (T::one() - wx) + v[y0 * n + x1] * wx;
                let b = v[y1 * n + x0] * (T::one() - wx) + v[y1 * n + x1] * wx;
                a * (T::one() - wy) + b * wy
            }
        }
    }

    /// GMC density `exp(γX(p) - γ²σ²/2)` at `p`.
    #[inline]
    pub fn weight_at(&self, p: Point2<T>, gamma: T) -> T {
        (gamma * self.value_at(p) - T::lit(0.5) * gamma * gamma * self.sigma2).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_field(dim: Dim, periodic: bool) -> FieldSample<f64> {
        let grid = GridSpec::new(dim, [0.0, 0.0], 1.0, 8).unwrap();
        let values = (0..grid.n_cells()).map(|i| i as f64).collect();
        FieldSample {
            grid,
            values,
            sigma2: 1.0,
            spec: CovarianceSpec::new(dim, 1.0, 0.25).unwrap(),
            seed: 0,
            periodic,
            clipped_mass: 0.0,
        }
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::line(0.0, 1.0, 6).is_err());
        assert!(GridSpec::line(0.0, 1.0, 1).is_err());
        assert!(GridSpec::line(0.0, -1.0, 8).is_err());
        let g = GridSpec::square([0.0, 0.0], 2.0, 4).unwrap();
        assert_eq!(g.n_cells(), 16);
        assert_eq!(g.cell_center(5), [0.75, 0.75]);
        assert_eq!(g.cell_volume(), 0.25);
    }

    #[test]
    fn bilinear_hits_centers() {
        for dim in [Dim::One, Dim::Two] {
            for periodic in [false, true] {
                let f = constant_field(dim, periodic);
                for idx in 0..f.grid.n_cells() {
                    let p = f.grid.cell_center(idx);
                    assert!((f.value_at(p) - f.values[idx]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn periodic_wrap_and_clamp() {
        let f = constant_field(Dim::One, true);
        // halfway between last center (7.5/8) and first center wrapped (8.5/8)
        assert!((f.value_at([1.0, 0.0]) - 3.5).abs() < 1e-12);
        assert!((f.value_at([3.0 + 0.5 / 8.0, 0.0]) - 0.0).abs() < 1e-12);
        let g = constant_field(Dim::One, false);
        assert_eq!(g.value_at([-5.0, 0.0]), 0.0);
        assert_eq!(g.value_at([5.0, 0.0]), 7.0);
    }
}
