//! Statistical identity checks. Each function returns the raw statistics;
//! pass/fail thresholds are applied by the caller.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bridge::{couple_paths, occupation_kernel_bound, occupation_kernel_integral, rn_weight_at, sample_bridge, CoupledPaths};
use crate::chaos::{critical_boundary_measure, gmc_measure, Flavor};
use crate::error::Result;
use crate::field::{CirculantSampler, CoupledLevelsSampler, Dim, Embedding, GridSpec};
use crate::quad::integrate;
use crate::rng::{derive_seed, rng_from_seed};
use crate::scalar::{dist2, Point2};
use crate::special::normal_cdf;
use crate::stats::{ks_critical_1pct, ks_statistic, mean_se, median, MeanSe};

/// Start, end and lifetime used by the bridge weight checks.
pub const WEIGHT_X: Point2<f64> = [0.0, 0.0];
pub const WEIGHT_Y: Point2<f64> = [0.8, -0.4];
pub const WEIGHT_T: f64 = 1.0;
/// Box used for the bridge-vs-weighted-motion probabilities.
pub const WEIGHT_BOX: ([f64; 2], [f64; 2]) = ([0.2, -0.5], [0.8, 0.1]);

fn gaussian(rng: &mut impl Rng, sd: f64) -> f64 {
    sd * rng.sample::<f64, _>(rand_distr::StandardNormal)
}

/// Mean of the absolute-continuity weight over `n` Brownian prefixes up to `t/2`.
pub fn rn_weight_mean(n: usize, seed: u64) -> Result<MeanSe<f64>> {
    let s = WEIGHT_T / 2.0;
    let w = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from_seed(derive_seed(seed, i));
            let b = [WEIGHT_X[0] + gaussian(&mut rng, s.sqrt()), WEIGHT_X[1] + gaussian(&mut rng, s.sqrt())];
            rn_weight_at(WEIGHT_X, b, s, WEIGHT_Y, WEIGHT_T)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(mean_se(&w))
}

#[derive(Debug, Clone, Serialize)]
pub struct BoxProbability {
    pub s: f64,
    /// `P(b_s ∈ A)` for the bridge.
    pub bridge: MeanSe<f64>,
    /// `E[1_A(B_s) · weight]` for Brownian motion.
    pub weighted: MeanSe<f64>,
    /// Difference over the combined standard error.
    pub z: f64,
}

/// Bridge and weighted Brownian box probabilities at `s ∈ {t/4, t/2, 3t/4}`.
pub fn bridge_box_probabilities(n: usize, seed: u64) -> Result<Vec<BoxProbability>> {
    let (lo, hi) = WEIGHT_BOX;
    let inside = |p: Point2<f64>| (lo[0]..=hi[0]).contains(&p[0]) && (lo[1]..=hi[1]).contains(&p[1]);
    let bridge_seed = derive_seed(seed, 1);
    let walk_seed = derive_seed(seed, 2);
    let mut rows = Vec::with_capacity(3);
    for k in 1..=3usize {
        let s = k as f64 * WEIGHT_T / 4.0;
        let bridge = (0..n as u64)
            .into_par_iter()
            .map(|i| Ok(if inside(sample_bridge(WEIGHT_X, WEIGHT_Y, WEIGHT_T, 4, derive_seed(bridge_seed, i))?.positions[k]) { 1.0 } else { 0.0 }))
            .collect::<Result<Vec<f64>>>()?;
        let weighted = (0..n as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = rng_from_seed(derive_seed(derive_seed(walk_seed, k as u64), i));
                let b = [WEIGHT_X[0] + gaussian(&mut rng, s.sqrt()), WEIGHT_X[1] + gaussian(&mut rng, s.sqrt())];
                Ok(if inside(b) { rn_weight_at(WEIGHT_X, b, s, WEIGHT_Y, WEIGHT_T)? } else { 0.0 })
            })
            .collect::<Result<Vec<f64>>>()?;
        let (bridge, weighted) = (mean_se(&bridge), mean_se(&weighted));
        let z = (bridge.mean - weighted.mean) / (bridge.stderr.powi(2) + weighted.stderr.powi(2)).sqrt();
        rows.push(BoxProbability { s, bridge, weighted, z });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct OccupationCheck {
    /// Largest `|closed form − quadrature|` over the random inputs.
    pub max_abs_error: f64,
    pub n_closed_form: usize,
    /// Sweep points where the closed form exceeds the two-branch bound.
    pub bound_violations: usize,
    pub n_bounds: usize,
}

/// Closed form against adaptive quadrature in `ln s` on `n_closed_form`
/// random inputs, and the two-branch bound on an `n_bounds`-point sweep.
pub fn occupation_kernel_check(n_closed_form: usize, n_bounds: usize, seed: u64) -> Result<OccupationCheck> {
    let mut rng = rng_from_seed(derive_seed(seed, 0));
    let mut max_abs_error = 0.0f64;
    for _ in 0..n_closed_form {
        let y = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let z = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let t: f64 = rng.random_range(0.05..3.0);
        let r2 = dist2(y, z);
        let v = occupation_kernel_integral(y, z, t)?;
        let f = |u: f64| (-r2 / (2.0 * u.exp())).exp() / (2.0 * std::f64::consts::PI);
        let q = integrate(f, (r2 / 1600.0).ln(), (t / 2.0).ln(), 1e-15, 1e-13)?.value;
        max_abs_error = max_abs_error.max((v - q).abs());
    }
    let mut rng = rng_from_seed(derive_seed(seed, 1));
    let mut bound_violations = 0;
    for _ in 0..n_bounds {
        let y = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let z = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let t: f64 = rng.random_range(0.01..4.0);
        if occupation_kernel_integral(y, z, t)? > occupation_kernel_bound(y, z, t) {
            bound_violations += 1;
        }
    }
    Ok(OccupationCheck { max_abs_error, n_closed_form, bound_violations, n_bounds })
}

#[derive(Debug, Clone, Serialize)]
pub struct NormalizationCheck {
    pub gamma: f64,
    /// Boundary chaos total over the line grid.
    pub boundary: MeanSe<f64>,
    /// Bulk chaos total over the square grid.
    pub bulk: MeanSe<f64>,
    pub boundary_totals: Vec<f64>,
    pub bulk_totals: Vec<f64>,
    pub clipped_mass: f64,
}

/// Replicate totals of boundary chaos over the line sampler's grid and bulk
/// chaos over the square sampler's grid.
pub fn gmc_normalization(gamma: f64, line: &CirculantSampler<f64>, square: &CirculantSampler<f64>, replicates: usize, seed: u64) -> Result<NormalizationCheck> {
    if line.grid().dim != Dim::One || square.grid().dim != Dim::Two {
        return Err(crate::error::invalid("sampler", "need a line sampler and a square sampler"));
    }
    let (ls, ss) = (derive_seed(seed, 1), derive_seed(seed, 2));
    let boundary_totals = (0..replicates as u64)
        .into_par_iter()
        .map(|i| Ok(gmc_measure(&line.sample_replicate(ls, i), gamma, Flavor::Boundary)?.total()))
        .collect::<Result<Vec<f64>>>()?;
    let bulk_totals = (0..replicates as u64)
        .into_par_iter()
        .map(|i| Ok(gmc_measure(&square.sample_replicate(ss, i), gamma, Flavor::Bulk)?.total()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(NormalizationCheck {
        gamma,
        boundary: mean_se(&boundary_totals),
        bulk: mean_se(&bulk_totals),
        boundary_totals,
        bulk_totals,
        clipped_mass: line.clipped_mass().max(square.clipped_mass()),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalConvergence {
    pub levels: Vec<u32>,
    pub eps: Vec<f64>,
    /// `[replicate][level]` totals of the derivative form on the grid.
    pub derivative: Vec<Vec<f64>>,
    pub seneta_heyde: Vec<Vec<f64>>,
    /// Median of `|D − SH|/|D|` at the finest cutoff.
    pub median_normalization_gap: f64,
    /// Median of `|D_k − D_{k−1}|/|D_k|` between the two finest cutoffs.
    pub median_cauchy_derivative: f64,
    pub median_cauchy_seneta_heyde: f64,
    /// Replicates with nonpositive derivative total at the finest cutoff.
    pub nonpositive_derivative: usize,
    pub clipped_mass: f64,
}

/// Totals of the two critical normalizations over the grid, on coupled
/// fields with cutoffs `2^{-k}` for `k` in `levels`.
pub fn critical_convergence(grid: GridSpec<f64>, mass: f64, levels: &[u32], embedding: Embedding, replicates: usize, seed: u64) -> Result<CriticalConvergence> {
    let eps: Vec<f64> = levels.iter().map(|&k| 0.5f64.powi(k as i32)).collect();
    let sampler = CoupledLevelsSampler::new(grid, mass, &eps, embedding)?;
    let rows = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let fields = sampler.sample(derive_seed(seed, r));
            let mut d = Vec::with_capacity(fields.len());
            let mut sh = Vec::with_capacity(fields.len());
            for f in &fields {
                let c = critical_boundary_measure(f)?;
                d.push(c.derivative.total());
                sh.push(c.seneta_heyde.total());
            }
            Ok((d, sh))
        })
        .collect::<Result<Vec<_>>>()?;
    let (derivative, seneta_heyde): (Vec<Vec<f64>>, Vec<Vec<f64>>) = rows.into_iter().unzip();
    let last = eps.len() - 1;
    let rel = |a: f64, b: f64| ((a - b) / a).abs();
    let gap: Vec<f64> = derivative.iter().zip(&seneta_heyde).map(|(d, s)| rel(d[last], s[last])).collect();
    let cd: Vec<f64> = derivative.iter().map(|d| rel(d[last], d[last - 1])).collect();
    let cs: Vec<f64> = seneta_heyde.iter().map(|s| rel(s[last], s[last - 1])).collect();
    Ok(CriticalConvergence {
        levels: levels.to_vec(),
        eps,
        median_normalization_gap: median(&gap),
        median_cauchy_derivative: median(&cd),
        median_cauchy_seneta_heyde: median(&cs),
        nonpositive_derivative: derivative.iter().filter(|d| d[last] <= 0.0).count(),
        derivative,
        seneta_heyde,
        clipped_mass: sampler.clipped_mass(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CouplingSummary {
    pub replicates: usize,
    pub median_tau1: f64,
    /// Median meeting time of the first coordinates from first passage:
    /// `g²/(2 z²)` with `z` the upper quartile of the standard normal.
    pub oracle_median_tau1: f64,
    /// Increments of the spliced path at one random step per replicate,
    /// both coordinates, scaled to unit variance.
    pub ks_statistic: f64,
    pub ks_critical: f64,
    /// Replicates whose spliced path equals `B^y` at every grid time `≥ τ`.
    pub identical_after_tau: usize,
    /// Replicates with `τ` inside the horizon.
    pub met: usize,
}

/// Upper quartile of the standard normal, by bisection on the CDF.
fn normal_upper_quartile() -> f64 {
    let (mut lo, mut hi) = (0.0f64, 2.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid) < 0.75 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Coupling statistics over `replicates` pairs; also returns the meeting
/// times `(τ1, τ2, τ)` per replicate.
pub fn coupling_check(y0: Point2<f64>, y: Point2<f64>, horizon: f64, n_steps: usize, replicates: usize, seed: u64) -> Result<(CouplingSummary, Vec<[f64; 3]>)> {
    let pick_seed = derive_seed(seed, u64::MAX);
    let rows = (0..replicates as u64)
        .into_par_iter()
        .map(|i| {
            let c: CoupledPaths<f64> = couple_paths(y0, y, horizon, n_steps, derive_seed(seed, i))?;
            let mut rng = rng_from_seed(derive_seed(pick_seed, i));
            let k = rng.random_range(1..c.times.len());
            let sd = (c.times[k] - c.times[k - 1]).sqrt();
            let inc = [(c.path_bar[k][0] - c.path_bar[k - 1][0]) / sd, (c.path_bar[k][1] - c.path_bar[k - 1][1]) / sd];
            let identical = c.times.iter().zip(c.path_bar.iter().zip(&c.path_y)).all(|(&t, (p, q))| t < c.tau || p == q);
            Ok(([c.tau1, c.tau2, c.tau], inc, identical))
        })
        .collect::<Result<Vec<_>>>()?;
    let taus: Vec<[f64; 3]> = rows.iter().map(|r| r.0).collect();
    let incs: Vec<f64> = rows.iter().flat_map(|r| r.1).collect();
    let tau1: Vec<f64> = taus.iter().map(|t| t[0]).collect();
    let gap = (y0[0] - y[0]).abs();
    let z = normal_upper_quartile();
    let summary = CouplingSummary {
        replicates,
        median_tau1: median(&tau1),
        oracle_median_tau1: gap * gap / (2.0 * z * z),
        ks_statistic: ks_statistic(&incs, normal_cdf),
        ks_critical: ks_critical_1pct(incs.len()),
        identical_after_tau: rows.iter().filter(|r| r.2).count(),
        met: taus.iter().filter(|t| t[2].is_finite()).count(),
    };
    Ok((summary, taus))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upper_quartile() {
        assert!((normal_upper_quartile() - 0.674_489_750_196_081_7).abs() < 1e-12);
    }

    #[test]
    fn small_checks_run() {
        let m = rn_weight_mean(2000, 1).unwrap();
        assert!((m.mean - 1.0).abs() < 4.0 * m.stderr);
        let rows = bridge_box_probabilities(2000, 2).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.bridge.mean > 0.0 && r.z.is_finite()));
        let o = occupation_kernel_check(3, 20, 3).unwrap();
        assert!(o.max_abs_error < 1e-8 && o.bound_violations == 0);
        let (s, taus) = coupling_check([0.0, 0.0], [1.0, 1.0], 4.0, 400, 50, 4).unwrap();
        assert_eq!(taus.len(), 50);
        assert_eq!(s.identical_after_tau, 50);
    }
}
