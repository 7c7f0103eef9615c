//! Coordinate-wise coupling of two planar Brownian motions.

use std::io::Write;

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::rng::{derive_seed, rng_from_seed, stream};
use crate::scalar::{Point2, Real};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoupledPaths<T> {
    pub y0: Point2<T>,
    pub y: Point2<T>,
    /// Meeting time of each coordinate, `+∞` if none before the horizon.
    pub tau1: T,
    pub tau2: T,
    pub tau: T,
    pub times: Vec<T>,
    pub path_y0: Vec<Point2<T>>,
    pub path_y: Vec<Point2<T>>,
    /// Coordinate `i` follows `B^{y0}` up to `τ_i` and `B^y` afterwards.
    pub path_bar: Vec<Point2<T>>,
}

/// First sign change of `d` on the grid, with the crossing time linearly
/// interpolated inside the step. Returns the time and the first grid index
/// at or after it.
fn meeting<T: Real>(times: &[T], d: &[T]) -> (T, usize) {
    if d[0] == T::zero() {
        return (T::zero(), 0);
    }
    let s0 = d[0] > T::zero();
    for k in 1..d.len() {
        if d[k] == T::zero() {
            return (times[k], k);
        }
        if (d[k] > T::zero()) != s0 {
            let f = d[k - 1] / (d[k - 1] - d[k]);
            return (times[k - 1] + f * (times[k] - times[k - 1]), k);
        }
    }
    (T::infinity(), d.len())
}

/// `B^{y0}` and `B^y = y + B` with independent drivers on `n_steps` steps up to
/// `horizon`, and the spliced path.
pub fn couple_paths<T: Real>(y0: Point2<T>, y: Point2<T>, horizon: T, n_steps: usize, seed: u64) -> Result<CoupledPaths<T>> {
    if !(horizon > T::zero() && horizon.is_finite()) {
        return Err(invalid("horizon", format!("{horizon} must be positive")));
    }
    if n_steps < 1 {
        return Err(invalid("n_steps", "need at least one step"));
    }
    let mut rng = rng_from_seed(derive_seed(seed, stream::COUPLING));
    let dt = horizon / T::nat(n_steps);
    let sd = dt.sqrt();
    let n = n_steps + 1;
    let times: Vec<T> = (0..n).map(|i| if i == n_steps { horizon } else { T::nat(i) * dt }).collect();
    let mut path_y0 = Vec::with_capacity(n);
    let mut path_y = Vec::with_capacity(n);
    let (mut a, mut b) = (y0, y);
    for _ in 0..n {
        path_y0.push(a);
        path_y.push(b);
        a = [a[0] + sd * T::std_normal(&mut rng), a[1] + sd * T::std_normal(&mut rng)];
        b = [b[0] + sd * T::std_normal(&mut rng), b[1] + sd * T::std_normal(&mut rng)];
    }
    let mut taus = [T::zero(); 2];
    let mut switch = [0usize; 2];
    for c in 0..2 {
        let d: Vec<T> = path_y0.iter().zip(&path_y).map(|(p, q)| p[c] - q[c]).collect();
        (taus[c], switch[c]) = meeting(&times, &d);
    }
    let path_bar = (0..n)
        .map(|k| {
            let pick = |c: usize| if k >= switch[c] { path_y[k][c] } else { path_y0[k][c] };
            [pick(0), pick(1)]
        })
        .collect();
    Ok(CoupledPaths { y0, y, tau1: taus[0], tau2: taus[1], tau: taus[0].max(taus[1]), times, path_y0, path_y, path_bar })
}

/// CSV `replicate,tau1,tau2,tau` (`inf` for no meeting).
pub fn write_coupling_csv<T: Real, W: Write>(mut w: W, rows: &[CoupledPaths<T>]) -> Result<()> {
    writeln!(w, "replicate,tau1,tau2,tau")?;
    for (i, c) in rows.iter().enumerate() {
        writeln!(w, "{i},{},{},{}", c.tau1.as_f64(), c.tau2.as_f64(), c.tau.as_f64())?;
    }
    Ok(())
}
