//! Planar Liouville Brownian motion by time change of a Brownian path.

use std::io::Write;

use rand::Rng;
use serde::Serialize;

use crate::boundary::interpolate;
use crate::error::{invalid, Error, Result};
use crate::field::{ConditionalPointSampler, CovarianceSpec, FieldSample, PointSampler};
use crate::rng::{derive_seed, rng_from_seed, stream};
use crate::scalar::{Point2, Real};

/// How the cutoff field is evaluated along paths.
#[derive(Debug, Clone, Copy)]
pub enum FieldAccess<'a, T> {
    /// Bilinear interpolation of a grid sample.
    Grid(&'a FieldSample<T>),
    /// Exact Gaussian draw at the path points.
    Exact { spec: CovarianceSpec<T>, seed: u64 },
}

impl<T: Real> FieldAccess<'_, T> {
    pub fn cutoff(&self) -> T {
        match self {
            FieldAccess::Grid(f) => f.spec.cutoff,
            FieldAccess::Exact { spec, .. } => spec.cutoff,
        }
    }
}

/// Field values along a stream of points.
pub(crate) enum FieldCursor<'a, T> {
    Grid(&'a FieldSample<T>),
    Exact(Box<ConditionalPointSampler<T>>),
}

impl<'a, T: Real> FieldCursor<'a, T> {
    pub(crate) fn new(access: &FieldAccess<'a, T>) -> Result<Self> {
        Ok(match *access {
            FieldAccess::Grid(f) => FieldCursor::Grid(f),
            FieldAccess::Exact { spec, seed } => FieldCursor::Exact(Box::new(ConditionalPointSampler::new(&spec, seed)?)),
        })
    }

    pub(crate) fn sigma2(&self) -> T {
        match self {
            FieldCursor::Grid(f) => f.sigma2,
            FieldCursor::Exact(s) => s.sigma2(),
        }
    }

    pub(crate) fn value(&mut self, p: Point2<T>) -> Result<T> {
        match self {
            FieldCursor::Grid(f) => Ok(f.value_at(p)),
            FieldCursor::Exact(s) => s.value(p),
        }
    }
}

/// Field values at all `points`: one joint exact draw, or grid lookups.
pub(crate) fn field_along<T: Real>(access: &FieldAccess<'_, T>, points: &[Point2<T>]) -> Result<(Vec<T>, T)> {
    match *access {
        FieldAccess::Grid(f) => Ok((points.iter().map(|&p| f.value_at(p)).collect(), f.sigma2)),
        FieldAccess::Exact { spec, seed } => {
            let s = PointSampler::new(points, &spec)?;
            Ok((s.sample(seed), s.sigma2()))
        }
    }
}

pub(crate) fn check_gamma<T: Real>(gamma: T) -> Result<()> {
    if !(gamma >= T::zero() && gamma < T::lit(2.0)) {
        return Err(Error::Supercritical { flavor: "bulk", gamma: gamma.as_f64(), requirement: "γ ∈ [0,2) required" });
    }
    Ok(())
}

/// The cutoff must be at least twice the typical step `√Δt`.
pub(crate) fn check_resolved<T: Real>(eps: T, dt: T) -> Result<()> {
    if eps * (T::one() + T::lit(1e-12)) < T::lit(2.0) * dt.sqrt() {
        return Err(Error::UnresolvedCutoff { eps: eps.as_f64(), step: dt.sqrt().as_f64() });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WalkPath<T> {
    pub times: Vec<T>,
    pub positions: Vec<Point2<T>>,
    pub start: Point2<T>,
    pub seed: u64,
}

impl<T: Real> WalkPath<T> {
    pub fn horizon(&self) -> T {
        *self.times.last().unwrap()
    }

    pub fn max_step(&self) -> T {
        self.times.windows(2).map(|w| w[1] - w[0]).fold(T::zero(), T::max)
    }

    /// Same path with Brownian-bridge midpoints inserted in every step.
    pub fn refine(&self, seed: u64) -> WalkPath<T> {
        let mut rng = rng_from_seed(derive_seed(seed, stream::BRIDGE));
        let n = self.times.len();
        let mut times = Vec::with_capacity(2 * n - 1);
        let mut positions = Vec::with_capacity(2 * n - 1);
        let half = T::lit(0.5);
        for i in 0..n - 1 {
            let (t0, t1) = (self.times[i], self.times[i + 1]);
            let (a, b) = (self.positions[i], self.positions[i + 1]);
            let sd = ((t1 - t0) / T::lit(4.0)).sqrt();
            times.push(t0);
            times.push(t0 + half * (t1 - t0));
            positions.push(a);
            positions.push([
                half * (a[0] + b[0]) + sd * T::std_normal(&mut rng),
                half * (a[1] + b[1]) + sd * T::std_normal(&mut rng),
            ]);
        }
        times.push(self.times[n - 1]);
        positions.push(self.positions[n - 1]);
        WalkPath { times, positions, start: self.start, seed: self.seed }
    }
}

pub(crate) fn gaussian_step<T: Real, R: Rng + ?Sized>(rng: &mut R, p: Point2<T>, sd: T) -> Point2<T> {
    [p[0] + sd * T::std_normal(rng), p[1] + sd * T::std_normal(rng)]
}

/// Planar Brownian motion from `start` on `n_steps` equal steps up to `horizon`.
pub fn sample_walk<T: Real>(start: Point2<T>, horizon: T, n_steps: usize, seed: u64) -> Result<WalkPath<T>> {
    if n_steps < 2 {
        return Err(invalid("n_steps", "need at least 2 steps"));
    }
    if !(horizon > T::zero() && horizon.is_finite()) {
        return Err(invalid("horizon", format!("{horizon} must be positive")));
    }
    let mut rng = rng_from_seed(derive_seed(seed, stream::PATH));
    let dt = horizon / T::nat(n_steps);
    let sd = dt.sqrt();
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut positions = Vec::with_capacity(n_steps + 1);
    let mut p = start;
    for i in 0..=n_steps {
        times.push(if i == n_steps { horizon } else { T::nat(i) * dt });
        positions.push(p);
        p = gaussian_step(&mut rng, p, sd);
    }
    Ok(WalkPath { times, positions, start, seed })
}

/// Tabulated clock `F(x, t)` at the path times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Clock<T> {
    pub times: Vec<T>,
    pub values: Vec<T>,
}

impl<T: Real> Clock<T> {
    /// `F` at the last tabulated time.
    pub fn total(&self) -> T {
        *self.values.last().unwrap()
    }

    /// CSV `t,F`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,F")?;
        for (t, f) in self.times.iter().zip(&self.values) {
            writeln!(w, "{},{}", t.as_f64(), f.as_f64())?;
        }
        Ok(())
    }
}

/// Left-endpoint Riemann sum of `exp(γX_ε(B_r) - γ²σ²/2)` along the path.
pub fn clock<T: Real>(path: &WalkPath<T>, gamma: T, access: &FieldAccess<'_, T>) -> Result<Clock<T>> {
    check_gamma(gamma)?;
    check_resolved(access.cutoff(), path.max_step())?;
    if gamma == T::zero() {
        return Ok(Clock { times: path.times.clone(), values: path.times.clone() });
    }
    let n = path.times.len();
    let (x, sigma2) = field_along(access, &path.positions[..n - 1])?;
    let shift = T::lit(0.5) * gamma * gamma * sigma2;
    let mut values = Vec::with_capacity(n);
    let mut acc = T::zero();
    values.push(acc);
    for i in 0..n - 1 {
        let inc = (gamma * x[i] - shift).exp() * (path.times[i + 1] - path.times[i]);
        if !(inc > T::zero() && inc.is_finite()) {
            return Err(Error::NonFinite(format!("clock increment {inc} at t = {}", path.times[i])));
        }
        acc = acc + inc;
        values.push(acc);
    }
    Ok(Clock { times: path.times.clone(), values })
}

/// Piecewise-linear inverse `F⁻¹(s)`.
pub fn clock_inverse<T: Real>(clock: &Clock<T>, s: T) -> Result<T> {
    let top = clock.total();
    if !(s >= T::zero() && s <= top) {
        return Err(Error::OutOfRange { value: s.as_f64(), lo: 0.0, hi: top.as_f64() });
    }
    Ok(interpolate(&clock.values, &clock.times, s))
}

/// Step size and horizon policy for [`lbm_position`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LbmConfig<T> {
    pub dt: T,
    /// Initial Euclidean horizon; doubled while the clock falls short.
    pub horizon: T,
    pub max_extensions: usize,
}

impl<T: Real> LbmConfig<T> {
    /// `Δt = ε²/4`, the coarsest step allowed for cutoff `ε`.
    pub fn for_cutoff(eps: T) -> Self {
        Self { dt: eps * eps / T::lit(4.0), horizon: T::one(), max_extensions: 16 }
    }
}

/// One draw of the Liouville Brownian motion at Liouville time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LbmDraw<T> {
    pub position: Point2<T>,
    /// Euclidean time `F⁻¹(t)` of the underlying Brownian motion.
    pub euclidean_time: T,
}

/// `B` at time `F⁻¹(t_liouville)`, simulating the path until the clock passes
/// `t_liouville`. The position inside the final step is drawn from the
/// Brownian bridge between its endpoints.
pub fn lbm_sample<T: Real>(
    start: Point2<T>,
    t_liouville: T,
    gamma: T,
    access: &FieldAccess<'_, T>,
    cfg: &LbmConfig<T>,
    seed: u64,
) -> Result<LbmDraw<T>> {
    check_gamma(gamma)?;
    if !(t_liouville >= T::zero() && t_liouville.is_finite()) {
        return Err(invalid("t", format!("Liouville time {t_liouville} must be nonnegative")));
    }
    if !(cfg.dt > T::zero()) || !(cfg.horizon > T::zero()) {
        return Err(invalid("dt", "step and horizon must be positive"));
    }
    check_resolved(access.cutoff(), cfg.dt)?;
    if t_liouville == T::zero() {
        return Ok(LbmDraw { position: start, euclidean_time: T::zero() });
    }
    let mut cursor = FieldCursor::new(access)?;
    let shift = T::lit(0.5) * gamma * gamma * cursor.sigma2();
    let mut rng = rng_from_seed(derive_seed(seed, stream::PATH));
    let sd = cfg.dt.sqrt();
    let mut horizon = cfg.horizon;
    let mut extensions = 0;
    let (mut t, mut f, mut p) = (T::zero(), T::zero(), start);
    loop {
        while t < horizon {
            let w = if gamma == T::zero() { T::one() } else { (gamma * cursor.value(p)? - shift).exp() };
            let next = gaussian_step(&mut rng, p, sd);
            let inc = w * cfg.dt;
            if f + inc >= t_liouville {
                let frac = ((t_liouville - f) / inc).min(T::one()).max(T::zero());
                let bsd = (frac * (T::one() - frac) * cfg.dt).sqrt();
                let mid = [p[0] + frac * (next[0] - p[0]), p[1] + frac * (next[1] - p[1])];
                let position = gaussian_step(&mut rng, mid, bsd);
                return Ok(LbmDraw { position, euclidean_time: t + frac * cfg.dt });
            }
            f = f + inc;
            t = t + cfg.dt;
            p = next;
        }
        if extensions == cfg.max_extensions {
            return Err(Error::HorizonExhausted { attained: f.as_f64(), target: t_liouville.as_f64() });
        }
        extensions += 1;
        horizon = horizon + horizon;
    }
}

pub fn lbm_position<T: Real>(
    start: Point2<T>,
    t_liouville: T,
    gamma: T,
    access: &FieldAccess<'_, T>,
    cfg: &LbmConfig<T>,
    seed: u64,
) -> Result<Point2<T>> {
    Ok(lbm_sample(start, t_liouville, gamma, access, cfg, seed)?.position)
}

/// CSV `replicate,liouville_time,x,y`.
pub fn write_lbm_csv<T: Real, W: Write>(mut w: W, rows: &[(usize, T, Point2<T>)]) -> Result<()> {
    writeln!(w, "replicate,liouville_time,x,y")?;
    for (r, t, p) in rows {
        writeln!(w, "{},{},{},{}", r, t.as_f64(), p[0].as_f64(), p[1].as_f64())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{CirculantSampler, Dim, Embedding, GridSpec};
    use crate::special::normal_cdf;
    use crate::stats::{ks_critical_1pct, ks_statistic, mean_se, median};

    fn field(seed: u64) -> FieldSample<f64> {
        let grid = GridSpec::square([-3.2, -3.2], 6.4, 128).unwrap();
        let spec = CovarianceSpec::new(Dim::Two, 1.0, 0.2).unwrap();
        CirculantSampler::new(grid, spec, Embedding::Periodic).unwrap().sample(seed)
    }

    #[test]
    fn walk_increments_are_brownian() {
        let n = 10_000;
        let dt = 0.01;
        let mut dx: Vec<f64> = Vec::with_capacity(n);
        let mut dy: Vec<f64> = Vec::with_capacity(n);
        for r in 0..n as u64 {
            let w = sample_walk([1.0, -2.0], 0.02, 2, r).unwrap();
            assert_eq!(w.positions[0], [1.0, -2.0]);
            dx.push(w.positions[1][0] - w.positions[0][0]);
            dy.push(w.positions[1][1] - w.positions[0][1]);
        }
        for d in [&dx, &dy] {
            let m = mean_se(d);
            assert!(m.mean.abs() < 3.0 * m.stderr);
            let sq: Vec<f64> = d.iter().map(|v| v * v).collect();
            let v = mean_se(&sq);
            assert!((v.mean - dt).abs() < 3.0 * v.stderr);
        }
        let corr = dx.iter().zip(&dy).map(|(a, b)| a * b).sum::<f64>() / n as f64 / dt;
        assert!(corr.abs() < 3.0 / (n as f64).sqrt());
        assert!(sample_walk([0.0, 0.0], 1.0, 1, 0).is_err());
    }

    #[test]
    fn gamma_zero_clock_is_time() {
        let f = field(1);
        let w = sample_walk([0.0, 0.0], 1.0, 400, 3).unwrap();
        let c = clock(&w, 0.0, &FieldAccess::Grid(&f)).unwrap();
        assert_eq!(c.values, w.times);
        for &s in &[0.0, 0.123, 0.5, 1.0] {
            assert!((clock_inverse(&c, s).unwrap() - s).abs() < 1e-15);
        }
        assert!(clock_inverse(&c, 1.5).is_err());
    }

    #[test]
    fn clock_monotone_additive_and_invertible() {
        let f = field(2);
        let w = sample_walk([0.1, 0.2], 2.0, 800, 4).unwrap();
        let c = clock(&w, 1.0, &FieldAccess::Grid(&f)).unwrap();
        assert_eq!(c.values[0], 0.0);
        assert!(c.values.windows(2).all(|v| v[1] > v[0]));
        for (i, &v) in c.values.iter().enumerate().step_by(37) {
            let back = clock_inverse(&c, v).unwrap();
            assert!((back - c.times[i]).abs() <= 2.0 / 800.0 + 1e-12);
        }
        // increment over [t1, t2] recomputed from the tail of the path
        let k = 300;
        let tail = WalkPath { times: w.times[k..].to_vec(), positions: w.positions[k..].to_vec(), start: w.positions[k], seed: 0 };
        let ct = clock(&tail, 1.0, &FieldAccess::Grid(&f)).unwrap();
        assert!((c.values[k] + ct.total() - c.total()).abs() < 1e-12 * c.total());
    }

    #[test]
    fn unresolved_cutoff_and_supercritical_rejected() {
        let f = field(0);
        let w = sample_walk([0.0, 0.0], 1.0, 10, 0).unwrap();
        assert!(matches!(clock(&w, 1.0, &FieldAccess::Grid(&f)), Err(Error::UnresolvedCutoff { .. })));
        let w = sample_walk([0.0, 0.0], 1.0, 200, 0).unwrap();
        assert!(clock(&w, 2.0, &FieldAccess::Grid(&f)).is_err());
    }

    #[test]
    fn clock_mean_over_fields_is_time() {
        let w = sample_walk([0.0, 0.0], 1.0, 100, 9).unwrap();
        let spec = CovarianceSpec::new(Dim::Two, 1.0, 0.2).unwrap();
        let vals: Vec<f64> = (0..400)
            .map(|r| clock(&w, 1.0, &FieldAccess::Exact { spec, seed: r }).unwrap().total())
            .collect();
        let m = mean_se(&vals);
        assert!((m.mean - 1.0).abs() < 3.0 * m.stderr, "{} ± {}", m.mean, m.stderr);
    }

    #[test]
    fn refinement_changes_clock_little() {
        let f = field(5);
        let rel: Vec<f64> = (0..100)
            .map(|r| {
                let w = sample_walk([0.0, 0.0], 1.0, 100, r).unwrap();
                let a = clock(&w, 1.0, &FieldAccess::Grid(&f)).unwrap().total();
                let b = clock(&w.refine(r), 1.0, &FieldAccess::Grid(&f)).unwrap().total();
                ((b - a) / a).abs()
            })
            .collect();
        assert!(median(&rel) < 0.02, "{}", median(&rel));
    }

    #[test]
    fn gamma_zero_position_is_gaussian() {
        let f = field(0);
        let cfg = LbmConfig { dt: 0.01, horizon: 0.25, max_extensions: 4 };
        let n = 10_000;
        let t = 0.7;
        let draws: Vec<Point2<f64>> =
            (0..n).map(|r| lbm_position([0.5, -0.5], t, 0.0, &FieldAccess::Grid(&f), &cfg, r).unwrap()).collect();
        for (axis, c) in [(0, 0.5), (1, -0.5)] {
            let xs: Vec<f64> = draws.iter().map(|p| p[axis]).collect();
            let d = ks_statistic(&xs, |x| normal_cdf((x - c) / t.sqrt()));
            assert!(d < ks_critical_1pct(n as usize), "axis {axis}: D = {d}");
        }
    }

    #[test]
    fn small_time_stays_near_start() {
        let f = field(4);
        let cfg = LbmConfig::for_cutoff(0.2);
        let disp = |t: f64| {
            let d: Vec<f64> = (0..200)
                .map(|r| {
                    let p = lbm_position([0.0, 0.0], t, 1.0, &FieldAccess::Grid(&f), &cfg, r).unwrap();
                    p[0].hypot(p[1])
                })
                .collect();
            median(&d)
        };
        let (a, b, c) = (disp(1e-1), disp(1e-2), disp(1e-4));
        assert!(a > b && b > c && c < 0.02, "{a} {b} {c}");
        assert_eq!(lbm_position([0.3, 0.3], 0.0, 1.0, &FieldAccess::Grid(&f), &cfg, 1).unwrap(), [0.3, 0.3]);
    }

    #[test]
    fn horizon_exhaustion_reports_clock() {
        let f = field(4);
        let cfg = LbmConfig { dt: 0.01, horizon: 0.1, max_extensions: 2 };
        let e = lbm_position([0.0, 0.0], 5.0, 0.0, &FieldAccess::Grid(&f), &cfg, 0).unwrap_err();
        assert!(matches!(e, Error::HorizonExhausted { attained, .. } if attained < 5.0 && attained > 0.3));
    }

    #[test]
    fn exact_backend_streams() {
        let spec = CovarianceSpec::new(Dim::Two, 1.0, 0.2).unwrap();
        let cfg = LbmConfig { dt: 0.01, horizon: 0.2, max_extensions: 6 };
        let a = lbm_sample([0.0, 0.0], 0.5, 1.0, &FieldAccess::Exact { spec, seed: 7 }, &cfg, 3).unwrap();
        let b = lbm_sample([0.0, 0.0], 0.5, 1.0, &FieldAccess::Exact { spec, seed: 7 }, &cfg, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.euclidean_time > 0.0);
    }
}
