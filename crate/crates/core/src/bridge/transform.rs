//! Monte Carlo estimator of `∫ G(t) 𝐩_t(x, y) dt` through Brownian bridges,
//! for `G(t) = t^α e^{-λt}`.
//!
//! Each replicate draws one field (annealed) or reuses a fixed one (quenched)
//! and one bridge per time node. The time integral is a trapezoid rule in
//! `ln t` with a lower end correction; below `t_low` the clock is replaced by its small-time form
//! `F ≈ w·t` with `w` the chaos density near the endpoints.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::path::ZeroBridge;
use crate::chaos::Region;
use crate::error::{invalid, Error, Result};
use crate::field::{CirculantSampler, FieldSample};
use crate::lbm2d::{check_gamma, check_resolved};
use crate::quad::integrate;
use crate::rng::{derive_seed, rng_from_seed, stream, SimRng};
use crate::scalar::{dist2, Point2, Real};
use crate::special::{gamma as gamma_fn, gamma_p};
use crate::stats::{log_space, mean_se, ols, LinearFit};

/// Where field values along bridges come from.
#[derive(Debug, Clone, Copy)]
pub enum FieldMode<'a, T: Real> {
    /// A fresh grid field per replicate.
    Annealed(&'a CirculantSampler<T>),
    /// One fixed field shared by all replicates.
    Quenched(&'a FieldSample<T>),
}

impl<T: Real> FieldMode<'_, T> {
    pub fn cutoff(&self) -> T {
        match self {
            FieldMode::Annealed(s) => s.spec().cutoff,
            FieldMode::Quenched(f) => f.spec.cutoff,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransformConfig<T> {
    /// Replicates, each with one bridge per time node.
    pub n_bridges: usize,
    /// Minimum steps per bridge; raised so that every step is at most `ε²/4`.
    pub n_steps: usize,
    pub t_low: T,
    /// Upper cutoff; `None` means `50/λ` (smallest λ of a table).
    pub t_high: Option<T>,
    pub n_t_points: usize,
    pub seed: u64,
    /// Add the small-time part `∫_0^{t_low}` with `F ≈ w·t`.
    pub tail_correction: bool,
}

impl<T: Real> Default for TransformConfig<T> {
    fn default() -> Self {
        Self { n_bridges: 1000, n_steps: 32, t_low: T::lit(1e-4), t_high: None, n_t_points: 40, seed: 0, tail_correction: true }
    }
}

/// One row of the `t_low` refinement table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RefinementRow<T> {
    pub t_low: T,
    pub value: T,
    pub stderr: T,
}

/// Logarithmic growth of the truncated integral as `t_low → 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogGrowth<T> {
    /// Slope of value against `ln(1/t_low)`.
    pub coefficient: T,
    pub intercept: T,
    pub r_squared: T,
    pub table: Vec<RefinementRow<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransformEstimate<T> {
    pub gamma: T,
    pub alpha: T,
    pub lambda: T,
    pub x: Point2<T>,
    pub y: Point2<T>,
    pub value: T,
    /// Monte Carlo and quadrature errors combined in quadrature.
    pub stderr: T,
    pub mc_stderr: T,
    pub quad_error: T,
    pub n_bridges: usize,
    pub t_low: T,
    pub t_high: T,
    pub divergent: bool,
    pub log_growth: Option<LogGrowth<T>>,
    pub seed: u64,
}

/// Exponents at or below this underflow `exp` to exactly zero.
const UNDERFLOW: f64 = -746.0;

/// Clock value beyond which `F^α e^{-λF}` is zero for every pair.
fn underflow_clock<T: Real>(pairs: &[(T, T)]) -> T {
    let mut top = T::zero();
    for &(a, l) in pairs {
        // fixed point of F = (746 + α ln F)/λ on the decreasing branch
        let mut f = (T::lit(-UNDERFLOW) / l).max(a / l);
        for _ in 0..100 {
            f = (T::lit(-UNDERFLOW) + a * f.ln()) / l;
        }
        top = top.max(f * T::lit(1.001));
    }
    top
}

#[inline]
fn g_alpha_lambda<T: Real>(f: T, a: T, l: T) -> T {
    if a == T::zero() {
        (-l * f).exp()
    } else {
        (a * f.ln() - l * f).exp()
    }
}

struct Replicate<T> {
    y: Point2<T>,
    /// Multiplier of the replicate's integral (1, or `|A|·W(y)` for boxes).
    factor: T,
    /// Chaos density averaged along the segment from `x` to `y`.
    w_seg: T,
    clocks: Vec<T>,
}

/// How each replicate picks its endpoint `y` and multiplier.
type Endpoint<'e, T> = dyn Fn(Option<&FieldSample<T>>, &mut SimRng) -> (Point2<T>, T) + Sync + 'e;

struct Engine<'a, T: Real> {
    x: Point2<T>,
    gamma: T,
    nodes: Vec<T>,
    cfg: TransformConfig<T>,
    mode: FieldMode<'a, T>,
    f_stop: T,
}

impl<T: Real> Engine<'_, T> {
    fn dt_max(&self) -> T {
        let e = self.mode.cutoff();
        e * e / T::lit(4.0)
    }

    fn steps(&self, t: T) -> usize {
        let need = (t / self.dt_max()).ceil().to_usize().unwrap_or(usize::MAX);
        self.cfg.n_steps.max(need)
    }

    fn run(&self, endpoint: &Endpoint<'_, T>) -> Result<Vec<Replicate<T>>> {
        let n = self.cfg.n_bridges;
        let field_master = derive_seed(self.cfg.seed, stream::FIELD);
        let chunks: Vec<Result<Vec<Replicate<T>>>> = (0..n.div_ceil(2))
            .into_par_iter()
            .map(|c| {
                let fields: [Option<FieldSample<T>>; 2] = match self.mode {
                    FieldMode::Annealed(s) if self.gamma > T::zero() => {
                        let (a, b) = s.sample_pair(derive_seed(field_master, c as u64));
                        [Some(a), Some(b)]
                    }
                    _ => [None, None],
                };
                let mut out = Vec::with_capacity(2);
                for (j, f) in fields.iter().enumerate() {
                    let r = 2 * c + j;
                    if r >= n {
                        break;
                    }
                    let field = match self.mode {
                        FieldMode::Quenched(q) if self.gamma > T::zero() => Some(q),
                        _ => f.as_ref(),
                    };
                    out.push(self.replicate(r as u64, field, endpoint)?);
                }
                Ok(out)
            })
            .collect();
        let mut reps = Vec::with_capacity(n);
        for c in chunks {
            reps.extend(c?);
        }
        Ok(reps)
    }

    fn replicate(&self, r: u64, field: Option<&FieldSample<T>>, endpoint: &Endpoint<'_, T>) -> Result<Replicate<T>> {
        let rep_seed = derive_seed(self.cfg.seed, r);
        let mut prng = rng_from_seed(derive_seed(rep_seed, stream::POINT));
        let (y, factor) = endpoint(field, &mut prng);
        let x = self.x;
        let Some(field) = field else {
            return Ok(Replicate { y, factor, w_seg: T::one(), clocks: self.nodes.clone() });
        };
        let gamma = self.gamma;
        let shift = T::lit(0.5) * gamma * gamma * field.sigma2;
        let weight = |p: Point2<T>| (gamma * field.value_at(p) - shift).exp();
        let w_seg = if x == y {
            weight(x)
        } else {
            let k = 8;
            (0..k)
                .map(|i| {
                    let f = (T::nat(i) + T::lit(0.5)) / T::nat(k);
                    weight([x[0] + f * (y[0] - x[0]), x[1] + f * (y[1] - x[1])])
                })
                .sum::<T>()
                / T::nat(k)
        };
        let bridge_master = derive_seed(rep_seed, stream::BRIDGE);
        let mut clocks = Vec::with_capacity(self.nodes.len());
        for (k, &t) in self.nodes.iter().enumerate() {
            let n = self.steps(t);
            let dt = t / T::nat(n);
            let mut rng = rng_from_seed(derive_seed(bridge_master, k as u64));
            let mut zb = ZeroBridge::new(t, n);
            let mut f = T::zero();
            for i in 0..n {
                let s = T::nat(i) / T::nat(n);
                let b = zb.current();
                let p = [x[0] + s * (y[0] - x[0]) + b[0], x[1] + s * (y[1] - x[1]) + b[1]];
                f = f + weight(p) * dt;
                if f >= self.f_stop {
                    break;
                }
                zb.step(&mut rng);
            }
            if !(f > T::zero() && f.is_finite()) {
                return Err(Error::NonFinite(format!("bridge clock {f} at t = {t}")));
            }
            clocks.push(f);
        }
        Ok(Replicate { y, factor, w_seg, clocks })
    }
}

/// `∫_0^{t_low} (w t)^α e^{-λwt} e^{-d²/(2t)} dt / (2πt)`.
fn lower_tail<T: Real>(alpha: T, lambda: T, w: T, d2: T, t_low: T) -> T {
    let two_pi = T::lit(2.0) * T::PI();
    if d2 == T::zero() {
        if alpha == T::zero() {
            return T::infinity();
        }
        return gamma_fn(alpha) * lambda.powf(-alpha) * gamma_p(alpha, lambda * w * t_low) / two_pi;
    }
    // in u = ln t; below u_min the Gaussian factor is under e^{-750}
    let u_hi = t_low.ln();
    let u_min = (d2 / T::lit(1500.0)).ln();
    if u_min >= u_hi {
        return T::zero();
    }
    let u_lo = if alpha > T::zero() { u_min.max(u_hi - T::lit(80.0) / alpha) } else { u_min };
    let f = |u: T| {
        let t = u.exp();
        let wt = w * t;
        let a = if alpha == T::zero() { T::zero() } else { alpha * wt.ln() };
        (a - lambda * wt - d2 / (T::lit(2.0) * t)).exp() / two_pi
    };
    integrate(f, u_lo, u_hi, T::lit(1e-16), T::lit(1e-10)).map(|q| q.value).unwrap_or_else(|_| T::nan())
}

/// Trapezoid over the listed nodes with the second-order end correction at
/// the lower end (Gregory), where the integrand in `ln t` is not negligible.
fn corrected_trapezoid<T: Real>(u: &[T], g: &[T], idx: &[usize]) -> T {
    let half = T::lit(0.5);
    let mut sum = T::zero();
    for w in idx.windows(2) {
        sum = sum + half * (u[w[1]] - u[w[0]]) * (g[w[0]] + g[w[1]]);
    }
    if idx.len() >= 3 {
        let (a, b, c) = (idx[0], idx[1], idx[2]);
        let h = u[b] - u[a];
        if ((u[c] - u[b]) - h).abs() <= T::lit(1e-9) * h {
            sum = sum + h / T::lit(24.0) * (-T::lit(3.0) * g[a] + T::lit(4.0) * g[b] - g[c]);
        }
    }
    sum
}

/// Corrected trapezoid in `ln t` over `nodes[j0..]`, and the same rule on
/// every other node (the last node always kept).
fn trapezoids<T: Real>(u: &[T], g: &[T], j0: usize) -> (T, T) {
    let all: Vec<usize> = (j0..u.len()).collect();
    let mut idx: Vec<usize> = (j0..u.len()).step_by(2).collect();
    if *idx.last().unwrap() != u.len() - 1 {
        idx.push(u.len() - 1);
    }
    (corrected_trapezoid(u, g, &all), corrected_trapezoid(u, g, &idx))
}

/// Per-replicate integrals over `nodes[j0..]` plus the optional tail below `nodes[j0]`.
struct PairIntegral<T> {
    per_replicate: Vec<T>,
    quad_error: T,
}

fn integrate_pair<T: Real>(x: Point2<T>, reps: &[Replicate<T>], nodes: &[T], u: &[T], alpha: T, lambda: T, j0: usize, tail: bool) -> PairIntegral<T> {
    let two_pi = T::lit(2.0) * T::PI();
    let two = T::lit(2.0);
    let m = nodes.len();
    let mut mean_g = vec![T::zero(); m];
    let mut per_replicate = Vec::with_capacity(reps.len());
    let mut g = vec![T::zero(); m];
    for rep in reps {
        let d2 = dist2(x, rep.y);
        for k in j0..m {
            let gauss = if d2 == T::zero() { T::one() } else { (-d2 / (two * nodes[k])).exp() };
            g[k] = rep.factor * g_alpha_lambda(rep.clocks[k], alpha, lambda) * gauss / two_pi;
            mean_g[k] = mean_g[k] + g[k];
        }
        let (fine, _) = trapezoids(u, &g, j0);
        let lt = if tail { rep.factor * lower_tail(alpha, lambda, rep.w_seg, d2, nodes[j0]) } else { T::zero() };
        per_replicate.push(fine + lt);
    }
    let nr = T::nat(reps.len());
    for v in mean_g.iter_mut() {
        *v = *v / nr;
    }
    let (fine, coarse) = trapezoids(u, &mean_g, j0);
    PairIntegral { per_replicate, quad_error: (fine - coarse).abs() / T::lit(3.0) }
}

fn validate<T: Real>(gamma: T, alphas: &[T], lambdas: &[T], cfg: &TransformConfig<T>, mode: &FieldMode<'_, T>) -> Result<T> {
    check_gamma(gamma)?;
    if alphas.is_empty() || lambdas.is_empty() {
        return Err(invalid("alpha", "need at least one α and one λ"));
    }
    if let Some(a) = alphas.iter().find(|&&a| !(a >= T::zero() && a.is_finite())) {
        return Err(invalid("alpha", format!("α = {a} must be ≥ 0")));
    }
    if let Some(l) = lambdas.iter().find(|&&l| !(l > T::zero() && l.is_finite())) {
        return Err(invalid("lambda", format!("λ = {l} must be > 0")));
    }
    if cfg.n_bridges < 2 {
        return Err(invalid("n_bridges", "need at least 2 replicates"));
    }
    if cfg.n_t_points < 5 {
        return Err(invalid("n_t_points", "need at least 5 time nodes"));
    }
    if cfg.n_steps < 2 {
        return Err(invalid("n_steps", "need at least 2 steps"));
    }
    let lmin = lambdas.iter().copied().fold(T::infinity(), T::min);
    let t_high = cfg.t_high.unwrap_or(T::lit(50.0) / lmin);
    if !(cfg.t_low > T::zero() && t_high > cfg.t_low && t_high.is_finite()) {
        return Err(invalid("t_low", format!("need 0 < t_low = {} < t_high = {t_high}", cfg.t_low)));
    }
    if gamma > T::zero() {
        let e = mode.cutoff();
        if !(e > T::zero()) {
            return Err(invalid("cutoff", "field cutoff must be positive"));
        }
        check_resolved(e, e * e / T::lit(4.0))?;
    }
    Ok(t_high)
}

/// Nodes `t_low·10^{i/p}` up to `t_high`, with `t_high` appended. Returns the
/// nodes and `p`.
fn decade_nodes<T: Real>(t_low: T, t_high: T, n_t_points: usize) -> (Vec<T>, usize) {
    let decades = (t_high / t_low).log10();
    let p = ((T::nat(n_t_points - 1) / decades).ceil().to_usize().unwrap_or(2)).max(2);
    let mut nodes = Vec::new();
    let mut i = 0;
    loop {
        let t = t_low * T::lit(10.0).powf(T::nat(i) / T::nat(p));
        if t >= t_high * (T::one() - T::lit(1e-12)) {
            break;
        }
        nodes.push(t);
        i += 1;
    }
    nodes.push(t_high);
    (nodes, p)
}

/// Number of `t_low` values in the divergence test (`t_low·10^k`, `k = 0..4`).
pub const REFINEMENT_LEVELS: usize = 4;

fn estimate_table<T: Real>(
    x: Point2<T>,
    y_label: Point2<T>,
    gamma: T,
    alphas: &[T],
    lambdas: &[T],
    cfg: &TransformConfig<T>,
    mode: FieldMode<'_, T>,
    endpoint: &Endpoint<'_, T>,
    diagonal: bool,
) -> Result<Vec<TransformEstimate<T>>> {
    let t_high = validate(gamma, alphas, lambdas, cfg, &mode)?;
    let need_ladder = diagonal && alphas.iter().any(|&a| a == T::zero());
    let (nodes, per_decade) = if need_ladder {
        let top = cfg.t_low * T::lit(10.0).powi(REFINEMENT_LEVELS as i32 - 1);
        if !(t_high > top) {
            return Err(invalid("t_high", format!("divergence test needs t_high > {top}")));
        }
        decade_nodes(cfg.t_low, t_high, cfg.n_t_points)
    } else {
        (log_space(cfg.t_low, t_high, cfg.n_t_points), 0)
    };
    let pairs: Vec<(T, T)> = alphas.iter().flat_map(|&a| lambdas.iter().map(move |&l| (a, l))).collect();
    let engine = Engine { x, gamma, nodes: nodes.clone(), cfg: *cfg, mode, f_stop: underflow_clock(&pairs) };
    let reps = engine.run(endpoint)?;
    let u: Vec<T> = nodes.iter().map(|t| t.ln()).collect();
    let mut out = Vec::with_capacity(pairs.len());
    for &(alpha, lambda) in &pairs {
        let base = TransformEstimate {
            gamma,
            alpha,
            lambda,
            x,
            y: y_label,
            value: T::zero(),
            stderr: T::zero(),
            mc_stderr: T::zero(),
            quad_error: T::zero(),
            n_bridges: cfg.n_bridges,
            t_low: cfg.t_low,
            t_high,
            divergent: false,
            log_growth: None,
            seed: cfg.seed,
        };
        if diagonal && alpha == T::zero() {
            out.push(divergence_test(x, &reps, &nodes, &u, lambda, per_decade, base)?);
            continue;
        }
        let pi = integrate_pair(x, &reps, &nodes, &u, alpha, lambda, 0, cfg.tail_correction);
        let ms = mean_se(&pi.per_replicate);
        if !ms.mean.is_finite() {
            return Err(Error::NonFinite(format!("transform α = {alpha}, λ = {lambda}: {}", ms.mean)));
        }
        out.push(TransformEstimate {
            value: ms.mean,
            mc_stderr: ms.stderr,
            quad_error: pi.quad_error,
            stderr: (ms.stderr * ms.stderr + pi.quad_error * pi.quad_error).sqrt(),
            ..base
        });
    }
    Ok(out)
}

/// Truncated integrals at `t_low·10^k`; log growth in `ln(1/t_low)` means divergence.
fn divergence_test<T: Real>(
    x: Point2<T>,
    reps: &[Replicate<T>],
    nodes: &[T],
    u: &[T],
    lambda: T,
    per_decade: usize,
    base: TransformEstimate<T>,
) -> Result<TransformEstimate<T>> {
    let mut table = Vec::with_capacity(REFINEMENT_LEVELS);
    for k in (0..REFINEMENT_LEVELS).rev() {
        let j0 = k * per_decade;
        let pi = integrate_pair(x, reps, nodes, u, T::zero(), lambda, j0, false);
        let ms = mean_se(&pi.per_replicate);
        table.push(RefinementRow { t_low: nodes[j0], value: ms.mean, stderr: (ms.stderr * ms.stderr + pi.quad_error * pi.quad_error).sqrt() });
    }
    let xs: Vec<T> = table.iter().map(|r| -r.t_low.ln()).collect();
    let ys: Vec<T> = table.iter().map(|r| r.value).collect();
    let fit: LinearFit<T> = ols(&xs, &ys);
    let (first, last) = (table[0], table[REFINEMENT_LEVELS - 1]);
    let growth = LogGrowth { coefficient: fit.slope, intercept: fit.intercept, r_squared: fit.r_squared, table: table.clone() };
    if fit.r_squared >= T::lit(0.95) && fit.slope > T::zero() {
        return Ok(TransformEstimate { value: last.value, stderr: last.stderr, mc_stderr: last.stderr, divergent: true, log_growth: Some(growth), ..base });
    }
    let spread = T::lit(3.0) * (first.stderr * first.stderr + last.stderr * last.stderr).sqrt();
    if (last.value - first.value).abs() <= spread {
        return Ok(TransformEstimate { value: last.value, stderr: last.stderr, mc_stderr: last.stderr, log_growth: Some(growth), ..base });
    }
    let rows: Vec<String> = table.iter().map(|r| format!("t_low={:e}: {} ± {}", r.t_low.as_f64(), r.value.as_f64(), r.stderr.as_f64())).collect();
    Err(Error::DivergenceInconclusive {
        table: format!("{}; slope {} R² {}", rows.join("; "), fit.slope.as_f64(), fit.r_squared.as_f64()),
    })
}

/// Estimates `∫ t^α e^{-λt} 𝐩_t(x, y) dt` for every `(α, λ)` pair
/// (α-major), sharing fields and bridges across pairs.
pub fn transform_table<T: Real>(
    x: Point2<T>,
    y: Point2<T>,
    gamma: T,
    alphas: &[T],
    lambdas: &[T],
    cfg: &TransformConfig<T>,
    mode: FieldMode<'_, T>,
) -> Result<Vec<TransformEstimate<T>>> {
    let endpoint = move |_: Option<&FieldSample<T>>, _: &mut SimRng| (y, T::one());
    estimate_table(x, y, gamma, alphas, lambdas, cfg, mode, &endpoint, x == y)
}

pub fn integral_transform<T: Real>(
    x: Point2<T>,
    y: Point2<T>,
    gamma: T,
    alpha: T,
    lambda: T,
    cfg: &TransformConfig<T>,
    mode: FieldMode<'_, T>,
) -> Result<TransformEstimate<T>> {
    Ok(transform_table(x, y, gamma, &[alpha], &[lambda], cfg, mode)?.remove(0))
}

/// `∫_A ∫ t^α e^{-λt} 𝐩_t(x, y) dt M(dy)`: endpoints uniform in `A`, each
/// replicate weighted by `|A|·W(y)` with `W` the chaos density.
pub fn box_transform<T: Real>(
    x: Point2<T>,
    region: Region<T>,
    gamma: T,
    alpha: T,
    lambda: T,
    cfg: &TransformConfig<T>,
    mode: FieldMode<'_, T>,
) -> Result<TransformEstimate<T>> {
    let (lo, hi) = (region.lo, region.hi);
    if !(hi[0] > lo[0] && hi[1] > lo[1]) {
        return Err(invalid("region", "empty box"));
    }
    let area = (hi[0] - lo[0]) * (hi[1] - lo[1]);
    let endpoint = move |field: Option<&FieldSample<T>>, rng: &mut SimRng| {
        let y = [lo[0] + (hi[0] - lo[0]) * T::uniform(rng), lo[1] + (hi[1] - lo[1]) * T::uniform(rng)];
        let w = field.map_or(T::one(), |f| f.weight_at(y, gamma));
        (y, area * w)
    };
    let centre = [T::lit(0.5) * (lo[0] + hi[0]), T::lit(0.5) * (lo[1] + hi[1])];
    Ok(estimate_table(x, centre, gamma, &[alpha], &[lambda], cfg, mode, &endpoint, false)?.remove(0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralDimension<T> {
    pub d_s: T,
    pub fit: LinearFit<T>,
    pub alpha: T,
    pub estimates: Vec<TransformEstimate<T>>,
}

/// `d_S = 2(1 + α + s)` with `s` the slope of `ln I_α(λ)` against `ln λ`.
pub fn spectral_dimension_estimate<T: Real>(
    x: Point2<T>,
    gamma: T,
    alpha: T,
    lambdas: &[T],
    cfg: &TransformConfig<T>,
    mode: FieldMode<'_, T>,
) -> Result<SpectralDimension<T>> {
    if !(alpha > T::zero()) {
        return Err(invalid("alpha", format!("α = {alpha} must be > 0 for a finite transform")));
    }
    if lambdas.len() < 4 {
        return Err(invalid("lambdas", "need at least 4 values"));
    }
    let lo = lambdas.iter().copied().fold(T::infinity(), T::min);
    let hi = lambdas.iter().copied().fold(T::neg_infinity(), T::max);
    if !(lo > T::zero() && (hi / lo).log10() >= T::one() - T::lit(1e-12)) {
        return Err(invalid("lambdas", "must span at least one decade"));
    }
    let estimates = transform_table(x, x, gamma, &[alpha], lambdas, cfg, mode)?;
    if let Some(e) = estimates.iter().find(|e| !(e.value > T::zero() && e.value.is_finite())) {
        return Err(Error::NonFinite(format!("I_α(λ = {}) = {}", e.lambda, e.value)));
    }
    let xs: Vec<T> = estimates.iter().map(|e| e.lambda.ln()).collect();
    let ys: Vec<T> = estimates.iter().map(|e| e.value.ln()).collect();
    let fit = ols(&xs, &ys);
    Ok(SpectralDimension { d_s: T::lit(2.0) * (T::one() + alpha + fit.slope), fit, alpha, estimates })
}

/// CSV `gamma,alpha,lambda,dx,value,stderr,n_bridges,t_low,t_high,divergent,seed`.
pub fn write_transform_csv<T: Real, W: Write>(mut w: W, rows: &[TransformEstimate<T>]) -> Result<()> {
    writeln!(w, "gamma,alpha,lambda,dx,value,stderr,n_bridges,t_low,t_high,divergent,seed")?;
    for e in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            e.gamma.as_f64(),
            e.alpha.as_f64(),
            e.lambda.as_f64(),
            dist2(e.x, e.y).sqrt().as_f64(),
            e.value.as_f64(),
            e.stderr.as_f64(),
            e.n_bridges,
            e.t_low.as_f64(),
            e.t_high.as_f64(),
            e.divergent,
            e.seed
        )?;
    }
    Ok(())
}

/// Direct Liouville-side estimate of `E^x[∫ G(F(x,t)) 1_A(B_t) F(x,dt)]` on a
/// fixed field: left-endpoint sums along Brownian paths with step `dt`,
/// stopped once `F` exceeds `f_max`. Returns per-replicate values.
pub fn direct_box_functional<T: Real>(
    x: Point2<T>,
    region: Region<T>,
    gamma: T,
    field: &FieldSample<T>,
    g: impl Fn(T) -> T + Sync,
    dt: T,
    f_max: T,
    n_replicates: usize,
    seed: u64,
) -> Result<Vec<T>> {
    check_gamma(gamma)?;
    check_resolved(field.spec.cutoff, dt)?;
    if !(f_max > T::zero()) {
        return Err(invalid("f_max", "must be positive"));
    }
    let sd = dt.sqrt();
    let inside = |p: Point2<T>| p[0] >= region.lo[0] && p[0] < region.hi[0] && p[1] >= region.lo[1] && p[1] < region.hi[1];
    Ok((0..n_replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_from_seed(derive_seed(derive_seed(seed, r as u64), stream::PATH));
            let (mut p, mut f, mut acc) = (x, T::zero(), T::zero());
            while f <= f_max {
                let inc = field.weight_at(p, gamma) * dt;
                if inside(p) {
                    acc = acc + g(f) * inc;
                }
                f = f + inc;
                p = [p[0] + sd * T::std_normal(&mut rng), p[1] + sd * T::std_normal(&mut rng)];
            }
            acc
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::gamma as gamma_fn;

    fn det_cfg(n_t: usize) -> TransformConfig<f64> {
        TransformConfig { n_bridges: 4, n_t_points: n_t, ..Default::default() }
    }

    fn dummy_sampler() -> CirculantSampler<f64> {
        use crate::field::{CovarianceSpec, Dim, Embedding, GridSpec};
        let grid = GridSpec::square([0.0, 0.0], 1.0, 8).unwrap();
        CirculantSampler::new(grid, CovarianceSpec::new(Dim::Two, 1.0, 0.25).unwrap(), Embedding::Periodic).unwrap()
    }

    #[test]
    fn gamma_zero_closed_form() {
        let s = dummy_sampler();
        for &a in &[0.5, 1.0, 2.0] {
            for &l in &[0.5, 1.0, 2.0, 4.0] {
                let e = integral_transform([0.0, 0.0], [0.0, 0.0], 0.0, a, l, &det_cfg(40), FieldMode::Annealed(&s)).unwrap();
                let want = gamma_fn(a) * l.powf(-a) / (2.0 * std::f64::consts::PI);
                assert!((e.value - want).abs() <= 3.0 * e.stderr + 1e-14, "α={a} λ={l}: {} vs {want} ± {}", e.value, e.stderr);
                assert!(e.mc_stderr == 0.0 && !e.divergent);
                assert!((e.value - want).abs() < 1e-4 * want, "α={a} λ={l}: rel {}", (e.value - want) / want);
            }
        }
    }

    #[test]
    fn gamma_zero_off_diagonal_matches_quadrature() {
        let s = dummy_sampler();
        let (a, l) = (1.0, 1.0);
        let e = integral_transform([0.0, 0.0], [1.0, 0.0], 0.0, a, l, &det_cfg(40), FieldMode::Annealed(&s)).unwrap();
        let f = |u: f64| {
            let t = u.exp();
            t.powf(a) * (-l * t - 1.0 / (2.0 * t)).exp() / (2.0 * std::f64::consts::PI)
        };
        let want = integrate(f, -12.0, 6.0, 1e-15, 1e-12).unwrap().value;
        assert!((e.value - want).abs() <= 3.0 * e.stderr + 1e-12, "{} vs {want}", e.value);
    }

    #[test]
    fn alpha_zero_diverges_like_log() {
        let s = dummy_sampler();
        let e = integral_transform([0.0, 0.0], [0.0, 0.0], 0.0, 0.0, 1.0, &det_cfg(40), FieldMode::Annealed(&s)).unwrap();
        assert!(e.divergent);
        let g = e.log_growth.unwrap();
        assert!(g.r_squared >= 0.95);
        assert!((g.coefficient * 2.0 * std::f64::consts::PI - 1.0).abs() < 0.02, "{}", g.coefficient);
        for row in &g.table {
            let exact = (crate::special::exp_integral_e1(row.t_low) - crate::special::exp_integral_e1(50.0)) / (2.0 * std::f64::consts::PI);
            assert!((row.value - exact).abs() <= 3.0 * row.stderr + 1e-12, "{} vs {exact}", row.value);
        }
        assert_eq!(g.table.len(), REFINEMENT_LEVELS);
        assert!((g.table[REFINEMENT_LEVELS - 1].t_low - 1e-4).abs() < 1e-18);
        assert!((g.table[0].t_low - 1e-1).abs() < 1e-12);
    }

    #[test]
    fn alpha_zero_off_diagonal_is_finite() {
        let s = dummy_sampler();
        let e = integral_transform([0.0, 0.0], [0.5, 0.0], 0.0, 0.0, 1.0, &det_cfg(40), FieldMode::Annealed(&s)).unwrap();
        assert!(!e.divergent && e.value.is_finite() && e.value > 0.0);
    }

    #[test]
    fn underflow_clock_is_tight() {
        let f = underflow_clock(&[(1.0f64, 1.0), (2.0, 0.5)]);
        assert!((2.0 * f.ln() - 0.5 * f).exp() == 0.0);
        assert!((2.0 * (f * 0.98).ln() - 0.5 * f * 0.98).exp() > 0.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        let s = dummy_sampler();
        let m = FieldMode::Annealed(&s);
        let c = det_cfg(10);
        assert!(integral_transform([0.0, 0.0], [0.0, 0.0], 2.0, 1.0, 1.0, &c, m).is_err());
        assert!(integral_transform([0.0, 0.0], [0.0, 0.0], 0.0, -1.0, 1.0, &c, m).is_err());
        assert!(integral_transform([0.0, 0.0], [0.0, 0.0], 0.0, 1.0, 0.0, &c, m).is_err());
        let bad = TransformConfig { t_low: 10.0, t_high: Some(1.0), ..c };
        assert!(integral_transform([0.0, 0.0], [0.0, 0.0], 0.0, 1.0, 1.0, &bad, m).is_err());
        assert!(spectral_dimension_estimate([0.0, 0.0], 0.0, 1.0, &[1.0, 2.0, 3.0, 4.0], &c, m).is_err());
        assert!(spectral_dimension_estimate([0.0, 0.0], 0.0, 0.0, &[0.5, 1.0, 4.0, 16.0], &c, m).is_err());
    }

    #[test]
    fn spectral_dimension_two_at_gamma_zero() {
        let s = dummy_sampler();
        let sd = spectral_dimension_estimate([0.0, 0.0], 0.0, 1.0, &[0.5, 1.0, 2.0, 4.0, 8.0], &det_cfg(40), FieldMode::Annealed(&s)).unwrap();
        assert!((sd.d_s - 2.0).abs() < 1e-5, "{}", sd.d_s);
        assert!((sd.fit.slope + 1.0).abs() < 1e-5);
    }

    #[test]
    fn monotone_in_lambda_with_shared_randomness() {
        let s = dummy_sampler();
        let cfg = TransformConfig { n_bridges: 16, n_t_points: 12, t_high: Some(20.0), ..Default::default() };
        let rows = transform_table([0.3, 0.4], [0.3, 0.4], 1.0, &[1.0], &[0.5, 1.0, 2.0, 4.0], &cfg, FieldMode::Annealed(&s)).unwrap();
        assert!(rows.windows(2).all(|w| w[1].value < w[0].value));
        let again = transform_table([0.3, 0.4], [0.3, 0.4], 1.0, &[1.0], &[0.5, 1.0, 2.0, 4.0], &cfg, FieldMode::Annealed(&s)).unwrap();
        assert_eq!(rows, again);
    }

    #[test]
    fn csv_header_and_rows() {
        let s = dummy_sampler();
        let e = integral_transform([0.0, 0.0], [0.0, 0.0], 0.0, 1.0, 1.0, &det_cfg(10), FieldMode::Annealed(&s)).unwrap();
        let mut buf = Vec::new();
        write_transform_csv(&mut buf, &[e]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "gamma,alpha,lambda,dx,value,stderr,n_bridges,t_low,t_high,divergent,seed");
        assert_eq!(lines[1].split(',').count(), 11);
    }
}
