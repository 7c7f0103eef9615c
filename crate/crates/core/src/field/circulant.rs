//! FFT sampling of stationary fields on regular grids by circulant embedding.
//!
//! The kernel is laid out on a torus of `torus` cells per axis (minimum image
//! distance), its eigenvalues are obtained with one FFT, negative eigenvalues
//! are clipped to zero, and each draw costs a single complex FFT which yields
//! two independent real fields (real and imaginary parts).

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::covariance::{band_covariance, cutoff_covariance, CovarianceSpec, Dim};
use super::grid::{FieldSample, GridSpec};
use crate::error::{invalid, Result};
use crate::rng::{derive_seed, rng_from_seed, stream};
use crate::scalar::Real;

/// How the grid is embedded in a torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Embedding {
    /// Torus of at least twice the grid per axis, grown until the clipped
    /// spectral mass is negligible (or the size cap is hit). The sample is an
    /// aperiodic field on the grid.
    #[default]
    Padded,
    /// The grid itself is the torus; the sample is a periodic field.
    Periodic,
}

/// Relative clipped mass accepted without growing a padded torus further.
pub const CLIP_TOLERANCE: f64 = 1e-6;
/// Largest torus, in total cells, a padded embedding may grow to.
pub const MAX_TORUS_CELLS: usize = 1 << 22;

/// Reusable sampler: eigenvalues are computed once per (grid, kernel).
pub struct CirculantSampler<T: Real> {
    grid: GridSpec<T>,
    spec: CovarianceSpec<T>,
    sigma2: T,
    torus: usize,
    scale: Vec<T>,
    clipped_mass: T,
    periodic: bool,
    fft: Arc<dyn Fft<T>>,
}

impl<T: Real> std::fmt::Debug for CirculantSampler<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CirculantSampler")
            .field("grid", &self.grid)
            .field("spec", &self.spec)
            .field("torus", &self.torus)
            .field("clipped_mass", &self.clipped_mass)
            .finish()
    }
}

fn check_resolvable<T: Real>(grid: &GridSpec<T>, spec: &CovarianceSpec<T>) -> Result<()> {
    if grid.dim != spec.dimension {
        return Err(invalid("dimension", "grid and covariance dimensions differ"));
    }
    if !(spec.cutoff > T::zero()) {
        return Err(invalid("cutoff", "grid sampling needs ε > 0"));
    }
    let h = grid.cell_size();
    if spec.cutoff < T::lit(0.5) * h {
        return Err(invalid(
            "cutoff",
            format!("ε = {} unresolved on a grid with cell size {} (need ε ≥ h/2)", spec.cutoff, h),
        ));
    }
    Ok(())
}

impl<T: Real> CirculantSampler<T> {
    pub fn new(grid: GridSpec<T>, spec: CovarianceSpec<T>, embedding: Embedding) -> Result<Self> {
        check_resolvable(&grid, &spec)?;
        let sigma2 = cutoff_covariance(T::zero(), &spec)?;
        Self::with_kernel(grid, spec, sigma2, embedding, |r| cutoff_covariance(r, &spec))
    }

    /// Sampler for the independent scale band between two cutoffs.
    pub fn band(grid: GridSpec<T>, mass: T, eps_fine: T, eps_coarse: T, embedding: Embedding) -> Result<Self> {
        let spec = CovarianceSpec::new(grid.dim, mass, eps_fine)?;
        check_resolvable(&grid, &spec)?;
        let var = band_covariance(T::zero(), mass, eps_fine, eps_coarse)?;
        Self::with_kernel(grid, spec, var, embedding, |r| band_covariance(r, mass, eps_fine, eps_coarse))
    }

    fn with_kernel(
        grid: GridSpec<T>,
        spec: CovarianceSpec<T>,
        sigma2: T,
        embedding: Embedding,
        kernel: impl Fn(T) -> Result<T>,
    ) -> Result<Self> {
        let n = grid.resolution;
        let d = grid.dim.as_usize();
        let h = grid.cell_size();
        let mut cache: HashMap<u64, T> = HashMap::new();
        let mut planner = FftPlanner::new();
        let mut torus = match embedding {
            Embedding::Padded => 2 * n,
            Embedding::Periodic => n,
        };
        loop {
            let fft = planner.plan_fft_forward(torus);
            let eig = eigenvalues(torus, d, h, &fft, &mut cache, &kernel)?;
            let total: T = eig.iter().map(|l| l.abs()).sum();
            let neg: T = eig.iter().filter(|l| **l < T::zero()).map(|l| -*l).sum();
            let clipped = if total > T::zero() { neg / total } else { T::zero() };
            let next_cells = (2 * torus).pow(d as u32);
            let grow = embedding == Embedding::Padded && clipped.as_f64() > CLIP_TOLERANCE && next_cells <= MAX_TORUS_CELLS;
            if !grow {
                let cells = T::nat(eig.len());
                let scale = eig.iter().map(|&l| (l.max(T::zero()) / cells).sqrt()).collect();
                return Ok(Self {
                    grid,
                    spec,
                    sigma2,
                    torus,
                    scale,
                    clipped_mass: clipped,
                    periodic: embedding == Embedding::Periodic,
                    fft,
                });
            }
            torus *= 2;
        }
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    pub fn spec(&self) -> &CovarianceSpec<T> {
        &self.spec
    }

    pub fn sigma2(&self) -> T {
        self.sigma2
    }

    pub fn torus_size(&self) -> usize {
        self.torus
    }

    /// Relative spectral mass clipped from negative eigenvalues.
    pub fn clipped_mass(&self) -> T {
        self.clipped_mass
    }

    /// Two independent samples from one FFT.
    pub fn sample_pair(&self, seed: u64) -> (FieldSample<T>, FieldSample<T>) {
        let mut rng = rng_from_seed(derive_seed(seed, stream::FIELD));
        let mut buf: Vec<Complex<T>> = self.scale.iter().map(|&s| Complex::new(s * T::std_normal(&mut rng), s * T::std_normal(&mut rng))).collect();
        let d = self.grid.dim.as_usize();
        fft_nd(&mut buf, self.torus, d, &self.fft);
        let n = self.grid.resolution;
        let (re, im): (Vec<T>, Vec<T>) = match self.grid.dim {
            Dim::One => buf[..n].iter().map(|c| (c.re, c.im)).unzip(),
            Dim::Two => (0..n).flat_map(|iy| buf[iy * self.torus..iy * self.torus + n].iter()).map(|c| (c.re, c.im)).unzip(),
        };
        let make = |values| FieldSample {
            grid: self.grid,
            values,
            sigma2: self.sigma2,
            spec: self.spec,
            seed,
            periodic: self.periodic,
            clipped_mass: self.clipped_mass,
        };
        (make(re), make(im))
    }

    pub fn sample(&self, seed: u64) -> FieldSample<T> {
        self.sample_pair(seed).0
    }

    /// Replicate `index` of a run: pairs of replicates share one FFT.
    pub fn sample_replicate(&self, master: u64, index: u64) -> FieldSample<T> {
        let (a, b) = self.sample_pair(derive_seed(master, index / 2));
        if index % 2 == 0 {
            a
        } else {
            b
        }
    }
}

fn eigenvalues<T: Real>(
    torus: usize,
    d: usize,
    h: T,
    fft: &Arc<dyn Fft<T>>,
    cache: &mut HashMap<u64, T>,
    kernel: &impl Fn(T) -> Result<T>,
) -> Result<Vec<T>> {
    let mut value = |k2: u64| -> Result<T> {
        if let Some(v) = cache.get(&k2) {
            return Ok(*v);
        }
        let v = kernel(h * T::lit(k2 as f64).sqrt())?;
        cache.insert(k2, v);
        Ok(v)
    };
    let wrap = |j: usize| -> u64 { j.min(torus - j) as u64 };
    let mut buf: Vec<Complex<T>> = match d {
        1 => (0..torus).map(|j| value(wrap(j) * wrap(j)).map(|v| Complex::new(v, T::zero()))).collect::<Result<_>>()?,
        _ => {
            let mut b = Vec::with_capacity(torus * torus);
            for iy in 0..torus {
                for ix in 0..torus {
                    let k2 = wrap(ix) * wrap(ix) + wrap(iy) * wrap(iy);
                    b.push(Complex::new(value(k2)?, T::zero()));
                }
            }
            b
        }
    };
    fft_nd(&mut buf, torus, d, fft);
    Ok(buf.into_iter().map(|c| c.re).collect())
}

fn fft_nd<T: Real>(buf: &mut [Complex<T>], n: usize, d: usize, fft: &Arc<dyn Fft<T>>) {
    fft.process(buf);
    if d == 2 {
        transpose(buf, n);
        fft.process(buf);
        transpose(buf, n);
    }
}

fn transpose<T: Copy>(buf: &mut [T], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

/// Grid sample with the default padded embedding.
pub fn sample_field_grid<T: Real>(grid: GridSpec<T>, spec: CovarianceSpec<T>, seed: u64) -> Result<FieldSample<T>> {
    Ok(CirculantSampler::new(grid, spec, Embedding::Padded)?.sample(seed))
}

/// Fields at several cutoffs `eps[0] > eps[1] > ...` coupled through shared
/// coarse scales: level `k` is the sum of independent scale bands down to `eps[k]`.
pub struct CoupledLevelsSampler<T: Real> {
    specs: Vec<CovarianceSpec<T>>,
    sigma2: Vec<T>,
    bands: Vec<CirculantSampler<T>>,
}

impl<T: Real> CoupledLevelsSampler<T> {
    pub fn new(grid: GridSpec<T>, mass: T, eps: &[T], embedding: Embedding) -> Result<Self> {
        if eps.is_empty() || eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("eps", "cutoff levels must be nonempty and strictly decreasing"));
        }
        let specs = eps.iter().map(|&e| CovarianceSpec::new(grid.dim, mass, e)).collect::<Result<Vec<_>>>()?;
        let sigma2 = specs.iter().map(|s| cutoff_covariance(T::zero(), s)).collect::<Result<Vec<_>>>()?;
        let mut bands = vec![CirculantSampler::new(grid, specs[0], embedding)?];
        for w in eps.windows(2) {
            bands.push(CirculantSampler::band(grid, mass, w[1], w[0], embedding)?);
        }
        Ok(Self { specs, sigma2, bands })
    }

    pub fn sample(&self, seed: u64) -> Vec<FieldSample<T>> {
        let mut out: Vec<FieldSample<T>> = Vec::with_capacity(self.bands.len());
        for (k, band) in self.bands.iter().enumerate() {
            let mut f = band.sample(derive_seed(seed, k as u64));
            if let Some(prev) = out.last() {
                for (v, p) in f.values.iter_mut().zip(&prev.values) {
                    *v = *v + *p;
                }
            }
            f.spec = self.specs[k];
            f.sigma2 = self.sigma2[k];
            f.seed = seed;
            out.push(f);
        }
        out
    }

    pub fn clipped_mass(&self) -> T {
        self.bands.iter().map(|b| b.clipped_mass()).fold(T::zero(), T::max)
    }
}

/// Draws `n` standard normals; shared with tests of other modules.
pub(crate) fn normals<T: Real, R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<T> {
    (0..n).map(|_| T::std_normal(rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::mean_se;

    fn spec1(eps: f64) -> CovarianceSpec<f64> {
        CovarianceSpec::new(Dim::One, 1.0, eps).unwrap()
    }

    #[test]
    fn deterministic_in_seed() {
        let grid = GridSpec::line(0.0, 1.0, 64).unwrap();
        let a = sample_field_grid(grid, spec1(0.05), 11).unwrap();
        let b = sample_field_grid(grid, spec1(0.05), 11).unwrap();
        let c = sample_field_grid(grid, spec1(0.05), 12).unwrap();
        assert_eq!(a.values, b.values);
        assert_ne!(a.values, c.values);
        assert_eq!(a.sigma2.to_bits(), cutoff_covariance(0.0, &spec1(0.05)).unwrap().to_bits());
    }

    #[test]
    fn rejects_unresolved_cutoff() {
        let grid = GridSpec::line(0.0, 1.0, 16).unwrap();
        assert!(CirculantSampler::new(grid, spec1(0.01), Embedding::Padded).is_err());
        assert!(CirculantSampler::new(grid, spec1(0.0), Embedding::Padded).is_err());
    }

    #[test]
    fn padded_embedding_grows_until_clean() {
        let grid = GridSpec::line(0.0, 1.0, 256).unwrap();
        let s = CirculantSampler::new(grid, spec1(1.0 / 128.0), Embedding::Padded).unwrap();
        assert!(s.clipped_mass() <= CLIP_TOLERANCE);
        assert!(s.torus_size() >= 512);
    }

    #[test]
    fn empirical_variance_and_lags_1d() {
        // 200 replicates on a 256-cell grid; pooled statistics per replicate.
        let grid = GridSpec::line(0.0, 1.0, 256).unwrap();
        let spec = spec1(1.0 / 128.0);
        let sampler = CirculantSampler::new(grid, spec, Embedding::Padded).unwrap();
        let h = grid.cell_size();
        let reps: Vec<_> = (0..200).map(|r| sampler.sample_replicate(5, r)).collect();
        for lag in [0usize, 1, 4, 16] {
            let per: Vec<f64> = reps
                .iter()
                .map(|f| {
                    let n = f.values.len() - lag;
                    (0..n).map(|i| f.values[i] * f.values[i + lag]).sum::<f64>() / n as f64
                })
                .collect();
            let m = mean_se(&per);
            let want = cutoff_covariance(lag as f64 * h, &spec).unwrap();
            assert!((m.mean - want).abs() < 3.0 * m.stderr, "lag {lag}: {} ± {} vs {want}", m.mean, m.stderr);
        }
    }

    #[test]
    fn coupled_levels_share_coarse_scales() {
        let grid = GridSpec::line(0.0, 1.0, 128).unwrap();
        let s = CoupledLevelsSampler::new(grid, 1.0, &[0.1, 0.05, 0.02], Embedding::Padded).unwrap();
        let levels = s.sample(3);
        assert_eq!(levels.len(), 3);
        assert!(levels[2].sigma2 > levels[1].sigma2 && levels[1].sigma2 > levels[0].sigma2);
        // variance of the level differences matches the band variance
        let reps: Vec<f64> = (0..300)
            .map(|r| {
                let l = s.sample(r);
                l[2].values.iter().zip(&l[1].values).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / 128.0
            })
            .collect();
        let m = mean_se(&reps);
        let want = band_covariance(0.0, 1.0, 0.02, 0.05).unwrap();
        assert!((m.mean - want).abs() < 3.0 * m.stderr, "{} ± {} vs {want}", m.mean, m.stderr);
        assert!(CoupledLevelsSampler::new(grid, 1.0, &[0.05, 0.1], Embedding::Padded).is_err());
    }
}
