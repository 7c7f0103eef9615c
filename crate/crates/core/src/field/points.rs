//! Exact Gaussian draws of the cutoff field at arbitrary points (dense Cholesky).
//! Serves as the reference backend against which grid interpolation is checked.

use std::collections::HashMap;

use super::circulant::normals;
use super::covariance::{cutoff_covariance, CovarianceSpec};
use crate::error::{invalid, Error, Result};
use crate::rng::{derive_seed, rng_from_seed, stream};
use crate::scalar::{dist2, Point2, Real};

pub const MAX_POINTS: usize = 8192;

/// Diagonal jitter ladder, relative to σ_ε².
const JITTER: [f64; 6] = [0.0, 1e-14, 1e-12, 1e-10, 1e-8, 1e-6];

#[derive(Debug, Clone)]
pub struct PointSampler<T> {
    /// index into the unique-point list for each requested point
    map: Vec<usize>,
    n_unique: usize,
    /// row-major lower-triangular factor, `n_unique × n_unique`
    factor: Vec<T>,
    jitter: T,
    sigma2: T,
}

impl<T: Real> PointSampler<T> {
    pub fn new(points: &[Point2<T>], spec: &CovarianceSpec<T>) -> Result<Self> {
        if points.len() > MAX_POINTS {
            return Err(invalid("points", format!("{} points exceed the limit of {MAX_POINTS}", points.len())));
        }
        if !(spec.cutoff > T::zero()) {
            return Err(invalid("cutoff", "point sampling needs ε > 0"));
        }
        let mut index: HashMap<(u64, u64), usize> = HashMap::new();
        let mut unique: Vec<Point2<T>> = Vec::new();
        let map = points
            .iter()
            .map(|p| {
                let key = (p[0].as_f64().to_bits(), p[1].as_f64().to_bits());
                *index.entry(key).or_insert_with(|| {
                    unique.push(*p);
                    unique.len() - 1
                })
            })
            .collect();
        let m = unique.len();
        let sigma2 = cutoff_covariance(T::zero(), spec)?;
        let mut cov = vec![T::zero(); m * m];
        for i in 0..m {
            cov[i * m + i] = sigma2;
            for j in 0..i {
                let c = cutoff_covariance(dist2(unique[i], unique[j]).sqrt(), spec)?;
                cov[i * m + j] = c;
                cov[j * m + i] = c;
            }
        }
        let mut last = T::zero();
        for &rel in &JITTER {
            let jitter = T::lit(rel) * sigma2;
            last = jitter;
            if let Some(factor) = cholesky(&cov, m, jitter) {
                return Ok(Self { map, n_unique: m, factor, jitter, sigma2 });
            }
        }
        Err(Error::NotPositiveDefinite { jitter: last.as_f64() })
    }

    /// Diagonal jitter that was needed for the factorization.
    pub fn jitter(&self) -> T {
        self.jitter
    }

    pub fn sigma2(&self) -> T {
        self.sigma2
    }

    pub fn sample(&self, seed: u64) -> Vec<T> {
        let mut rng = rng_from_seed(derive_seed(seed, stream::POINT));
        let z: Vec<T> = normals(&mut rng, self.n_unique);
        let m = self.n_unique;
        let vals: Vec<T> = (0..m).map(|i| (0..=i).map(|j| self.factor[i * m + j] * z[j]).sum()).collect();
        self.map.iter().map(|&k| vals[k]).collect()
    }
}

/// Exact draws revealed point by point: each new point is sampled from its
/// Gaussian law conditional on every point drawn so far (one new Cholesky row
/// per point). Conditional variances are floored at `1e-10·σ²`.
#[derive(Debug, Clone)]
pub struct ConditionalPointSampler<T> {
    spec: CovarianceSpec<T>,
    sigma2: T,
    floor: T,
    points: Vec<Point2<T>>,
    rows: Vec<Vec<T>>,
    z: Vec<T>,
    values: Vec<T>,
    index: HashMap<(u64, u64), usize>,
    rng: crate::rng::SimRng,
    floored: usize,
}

impl<T: Real> ConditionalPointSampler<T> {
    pub fn new(spec: &CovarianceSpec<T>, seed: u64) -> Result<Self> {
        if !(spec.cutoff > T::zero()) {
            return Err(invalid("cutoff", "point sampling needs ε > 0"));
        }
        let sigma2 = cutoff_covariance(T::zero(), spec)?;
        Ok(Self {
            spec: *spec,
            sigma2,
            floor: T::lit(1e-10) * sigma2,
            points: Vec::new(),
            rows: Vec::new(),
            z: Vec::new(),
            values: Vec::new(),
            index: HashMap::new(),
            rng: rng_from_seed(derive_seed(seed, stream::POINT)),
            floored: 0,
        })
    }

    pub fn sigma2(&self) -> T {
        self.sigma2
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// How many conditional variances hit the floor.
    pub fn floored(&self) -> usize {
        self.floored
    }

    /// Field value at `p`, drawing it if `p` is new.
    pub fn value(&mut self, p: Point2<T>) -> Result<T> {
        let key = (p[0].as_f64().to_bits(), p[1].as_f64().to_bits());
        if let Some(&i) = self.index.get(&key) {
            return Ok(self.values[i]);
        }
        let n = self.points.len();
        if n >= MAX_POINTS {
            return Err(invalid("points", format!("more than {MAX_POINTS} distinct points requested")));
        }
        let mut row = Vec::with_capacity(n + 1);
        let mut sq = T::zero();
        for j in 0..n {
            let c = cutoff_covariance(dist2(p, self.points[j]).sqrt(), &self.spec)?;
            let prev = &self.rows[j];
            let dot: T = (0..j).map(|k| row[k] * prev[k]).sum();
            let l = (c - dot) / prev[j];
            sq = sq + l * l;
            row.push(l);
        }
        let mut d2 = self.sigma2 - sq;
        if d2 < self.floor {
            d2 = self.floor;
            self.floored += 1;
        }
        row.push(d2.sqrt());
        let z = T::std_normal(&mut self.rng);
        let v = (0..n).map(|k| row[k] * self.z[k]).sum::<T>() + row[n] * z;
        self.points.push(p);
        self.rows.push(row);
        self.z.push(z);
        self.values.push(v);
        self.index.insert(key, n);
        Ok(v)
    }
}

fn cholesky<T: Real>(a: &[T], m: usize, jitter: T) -> Option<Vec<T>> {
    let mut l = vec![T::zero(); m * m];
    for i in 0..m {
        for j in 0..=i {
            let mut s = a[i * m + j];
            if i == j {
                s = s + jitter;
            }
            for k in 0..j {
                s = s - l[i * m + k] * l[j * m + k];
            }
            if i == j {
                if !(s > T::zero()) {
                    return None;
                }
                l[i * m + i] = s.sqrt();
            } else {
                l[i * m + j] = s / l[j * m + j];
            }
        }
    }
    Some(l)
}

/// Exact multivariate Gaussian draw of `X_ε` at `points`.
pub fn sample_field_at_points<T: Real>(points: &[Point2<T>], spec: &CovarianceSpec<T>, seed: u64) -> Result<Vec<T>> {
    Ok(PointSampler::new(points, spec)?.sample(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::covariance::Dim;
    use crate::stats::{mean_se, variance};

    fn spec() -> CovarianceSpec<f64> {
        CovarianceSpec::new(Dim::Two, 1.0, 0.1).unwrap()
    }

    #[test]
    fn coincident_points_identical() {
        let p = [0.3, -0.2];
        for seed in 0..20 {
            let v = sample_field_at_points(&[p, [1.0, 1.0], p], &spec(), seed).unwrap();
            assert_eq!(v[0], v[2]);
        }
    }

    #[test]
    fn single_point_variance() {
        let s = PointSampler::new(&[[0.0, 0.0]], &spec()).unwrap();
        let sq: Vec<f64> = (0..500).map(|r| s.sample(r)[0].powi(2)).collect();
        let m = mean_se(&sq);
        let want = s.sigma2();
        assert!((m.mean - want).abs() < 3.0 * m.stderr, "{} ± {} vs {want}", m.mean, m.stderr);
    }

    #[test]
    fn far_points_nearly_uncorrelated() {
        let s = PointSampler::new(&[[0.0, 0.0], [10.0, 0.0]], &spec()).unwrap();
        let draws: Vec<Vec<f64>> = (0..500).map(|r| s.sample(r)).collect();
        let a: Vec<f64> = draws.iter().map(|d| d[0]).collect();
        let b: Vec<f64> = draws.iter().map(|d| d[1]).collect();
        let cov = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / 500.0;
        let corr = cov / (variance(&a) * variance(&b)).sqrt();
        let want = cutoff_covariance(10.0, &spec()).unwrap() / s.sigma2();
        assert!(want < 1e-3);
        assert!((corr - want).abs() < 3.0 / (500f64).sqrt());
    }

    #[test]
    fn conditional_matches_joint_covariance() {
        let pts = [[0.0, 0.0], [0.05, 0.0], [0.0, 0.2], [0.5, 0.5]];
        let n = 4000;
        let mut acc = [[0.0; 4]; 4];
        for r in 0..n {
            let mut s = ConditionalPointSampler::new(&spec(), r).unwrap();
            let v: Vec<f64> = pts.iter().map(|&p| s.value(p).unwrap()).collect();
            assert_eq!(s.value(pts[1]).unwrap(), v[1]);
            for i in 0..4 {
                for j in 0..4 {
                    acc[i][j] += v[i] * v[j] / n as f64;
                }
            }
        }
        let s2 = cutoff_covariance(0.0, &spec()).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = cutoff_covariance(dist2(pts[i], pts[j]).sqrt(), &spec()).unwrap();
                // sd of a product-moment estimate is at most √2·σ²/√n
                assert!((acc[i][j] - want).abs() < 4.0 * 2f64.sqrt() * s2 / (n as f64).sqrt(), "{i}{j}");
            }
        }
    }

    #[test]
    fn too_many_points_rejected() {
        let pts = vec![[0.0, 0.0]; MAX_POINTS + 1];
        assert!(PointSampler::new(&pts, &spec()).is_err());
    }

    #[test]
    fn near_duplicate_points_need_jitter_but_factor() {
        let pts: Vec<[f64; 2]> = (0..50).map(|i| [i as f64 * 1e-9, 0.0]).collect();
        let s = PointSampler::new(&pts, &spec()).unwrap();
        assert!(s.jitter() > 0.0);
        let v = s.sample(1);
        assert!((v[0] - v[49]).abs() < 1e-2);
    }
}
