//! Brownian bridges, the absolute-continuity weight and the bridge clock.

use rand::Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::lbm2d::{check_gamma, check_resolved, field_along, FieldAccess, WalkPath};
use crate::rng::{derive_seed, rng_from_seed, stream};
use crate::scalar::{dist2, Point2, Real};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BridgePath<T> {
    pub x: Point2<T>,
    pub y: Point2<T>,
    pub lifetime: T,
    pub times: Vec<T>,
    pub positions: Vec<Point2<T>>,
    pub seed: u64,
}

impl<T: Real> BridgePath<T> {
    pub fn max_step(&self) -> T {
        self.times.windows(2).map(|w| w[1] - w[0]).fold(T::zero(), T::max)
    }
}

/// Sequential sampler of a planar bridge from 0 to 0 on `n` equal steps.
///
/// Adding `x + (s/t)(y - x)` turns it into the bridge from `x` to `y`, so one
/// noise stream serves every pair of endpoints.
pub(crate) struct ZeroBridge<T> {
    b: Point2<T>,
    dt: T,
    remaining: usize,
}

impl<T: Real> ZeroBridge<T> {
    pub(crate) fn new(t: T, n: usize) -> Self {
        Self { b: [T::zero(); 2], dt: t / T::nat(n), remaining: n }
    }

    #[inline]
    pub(crate) fn current(&self) -> Point2<T> {
        self.b
    }

    /// Advances one step; the last step lands exactly on 0.
    #[inline]
    pub(crate) fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let r = T::nat(self.remaining);
        let keep = (r - T::one()) / r;
        let sd = (self.dt * keep).sqrt();
        if self.remaining == 1 {
            self.b = [T::zero(); 2];
        } else {
            self.b = [keep * self.b[0] + sd * T::std_normal(rng), keep * self.b[1] + sd * T::std_normal(rng)];
        }
        self.remaining -= 1;
    }
}

/// Bridge from `x` to `y` with lifetime `t` on `n_steps` equal steps.
pub fn sample_bridge<T: Real>(x: Point2<T>, y: Point2<T>, t: T, n_steps: usize, seed: u64) -> Result<BridgePath<T>> {
    if !(t > T::zero() && t.is_finite()) {
        return Err(invalid("t", format!("lifetime {t} must be positive")));
    }
    if n_steps < 2 {
        return Err(invalid("n_steps", "need at least 2 steps"));
    }
    let mut rng = rng_from_seed(derive_seed(seed, stream::BRIDGE));
    let mut zb = ZeroBridge::new(t, n_steps);
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut positions = Vec::with_capacity(n_steps + 1);
    for i in 0..=n_steps {
        let (s, p) = if i == 0 {
            (T::zero(), x)
        } else if i == n_steps {
            (t, y)
        } else {
            let s = T::nat(i) * t / T::nat(n_steps);
            let f = s / t;
            let b = zb.current();
            (s, [x[0] + f * (y[0] - x[0]) + b[0], x[1] + f * (y[1] - x[1]) + b[1]])
        };
        times.push(s);
        positions.push(p);
        if i < n_steps {
            zb.step(&mut rng);
        }
    }
    Ok(BridgePath { x, y, lifetime: t, times, positions, seed })
}

/// `t/(t-s) · exp(|y-x|²/(2t) - |b_s-y|²/(2(t-s)))` for a Brownian motion
/// from `x` found at `b_s` at time `s`.
pub fn rn_weight_at<T: Real>(x: Point2<T>, b_s: Point2<T>, s: T, y: Point2<T>, t: T) -> Result<T> {
    if !(s >= T::zero() && s < t) {
        return Err(invalid("s", format!("need 0 ≤ s < t, got s = {s}, t = {t}")));
    }
    let two = T::lit(2.0);
    let e = dist2(y, x) / (two * t) - dist2(b_s, y) / (two * (t - s));
    Ok(t / (t - s) * e.exp())
}

/// Absolute-continuity weight of a Brownian prefix up to its last time with
/// respect to the bridge to `y` with lifetime `t`.
pub fn rn_weight<T: Real>(prefix: &WalkPath<T>, y: Point2<T>, t: T) -> Result<T> {
    let s = prefix.horizon();
    rn_weight_at(prefix.start, *prefix.positions.last().unwrap(), s, y, t)
}

/// `F(x, y, t, s)`: left Riemann sum of `exp(γX_ε - γ²σ²/2)` along the bridge
/// over `[0, s]`, the last step taken fractionally.
pub fn bridge_clock<T: Real>(bridge: &BridgePath<T>, gamma: T, access: &FieldAccess<'_, T>, s: T) -> Result<T> {
    check_gamma(gamma)?;
    if !(s >= T::zero() && s <= bridge.lifetime) {
        return Err(invalid("s", format!("{s} outside [0, {}]", bridge.lifetime)));
    }
    check_resolved(access.cutoff(), bridge.max_step())?;
    if gamma == T::zero() {
        return Ok(s);
    }
    let times = &bridge.times;
    let used = times.partition_point(|&r| r < s).max(1).min(times.len() - 1);
    let (x, sigma2) = field_along(access, &bridge.positions[..used])?;
    let shift = T::lit(0.5) * gamma * gamma * sigma2;
    let mut acc = T::zero();
    for i in 0..used {
        let hi = times[i + 1].min(s);
        if hi <= times[i] {
            break;
        }
        acc = acc + (gamma * x[i] - shift).exp() * (hi - times[i]);
    }
    if !acc.is_finite() {
        return Err(Error::NonFinite(format!("bridge clock {acc}")));
    }
    Ok(acc)
}
